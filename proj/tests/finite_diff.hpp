#pragma once

// Central finite-difference oracle for gradient checks. Perturbs buffers
// element by element and compares against analytic gradients with the
// relative error |a - n| / max(|a|, |n|, 1e-12).

#include <algorithm>
#include <cmath>
#include <functional>

#include "ffnet/tensor.hpp"

inline double fd_rel_err(double a, double n) {
    const double denom = std::max({std::fabs(a), std::fabs(n), 1e-12});
    return std::fabs(a - n) / denom;
}

// max relative error between analytic gradients and central differences of
// `loss` over every element of `values`
inline double fd_check_tensor(const std::function<double()>& loss,
                              ffnet::TensorD& values, const ffnet::TensorD& grads,
                              double eps = 1e-4) {
    double worst = 0.0;
    for (std::size_t i = 0; i < values.data.size(); ++i) {
        const double saved = values.data[i];
        values.data[i] = saved + eps;
        const double lp = loss();
        values.data[i] = saved - eps;
        const double lm = loss();
        values.data[i] = saved;
        const double numeric = (lp - lm) / (2.0 * eps);
        worst = std::max(worst, fd_rel_err(grads.data[i], numeric));
    }
    return worst;
}
