#include "ffnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "ffnet/gemm.hpp"

namespace ffnet {

namespace {

// unrolls k x k patches of one zero-padded image (C,H,W) into a
// (C*k*k) x (OH*OW) column matrix; row index is (c*k + kh)*k + kw, so a GEMM
// over rows visits input terms in the same c, kh, kw order as a plain
// nested-loop convolution
template <class T>
void im2col(const T* x, std::int64_t C, std::int64_t H, std::int64_t W, int k,
            int s, int p, std::int64_t OH, std::int64_t OW, T* col) {
    for (std::int64_t c = 0; c < C; ++c) {
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                T* dst = col + ((c * k + kh) * k + kw) * (OH * OW);
                for (std::int64_t oh = 0; oh < OH; ++oh) {
                    const std::int64_t ih = oh * s + kh - p;
                    T* drow = dst + oh * OW;
                    if (ih < 0 || ih >= H) {
                        std::memset(drow, 0, sizeof(T) * static_cast<std::size_t>(OW));
                        continue;
                    }
                    const T* xrow = x + (c * H + ih) * W;
                    if (s == 1) {
                        const std::int64_t iw0 = kw - p;
                        std::int64_t lo = std::max<std::int64_t>(0, -iw0);
                        std::int64_t hi = std::min<std::int64_t>(OW, W - iw0);
                        if (hi < lo) hi = lo;
                        if (lo > 0) std::memset(drow, 0, sizeof(T) * static_cast<std::size_t>(lo));
                        if (hi > lo) {
                            std::memcpy(drow + lo, xrow + iw0 + lo,
                                        sizeof(T) * static_cast<std::size_t>(hi - lo));
                        }
                        if (hi < OW) {
                            std::memset(drow + hi, 0, sizeof(T) * static_cast<std::size_t>(OW - hi));
                        }
                    } else {
                        for (std::int64_t ow = 0; ow < OW; ++ow) {
                            const std::int64_t iw = ow * s + kw - p;
                            drow[ow] = (iw >= 0 && iw < W) ? xrow[iw] : T(0);
                        }
                    }
                }
            }
        }
    }
}

// adjoint of im2col: scatter-adds column gradients back onto the image
template <class T>
void col2im(const T* col, std::int64_t C, std::int64_t H, std::int64_t W, int k,
            int s, int p, std::int64_t OH, std::int64_t OW, T* gx) {
    for (std::int64_t c = 0; c < C; ++c) {
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                const T* src = col + ((c * k + kh) * k + kw) * (OH * OW);
                for (std::int64_t oh = 0; oh < OH; ++oh) {
                    const std::int64_t ih = oh * s + kh - p;
                    if (ih < 0 || ih >= H) continue;
                    const T* srow = src + oh * OW;
                    T* grow = gx + (c * H + ih) * W;
                    for (std::int64_t ow = 0; ow < OW; ++ow) {
                        const std::int64_t iw = ow * s + kw - p;
                        if (iw >= 0 && iw < W) grow[iw] += srow[ow];
                    }
                }
            }
        }
    }
}

template <class T>
void check_conv_args(const TensorT<T>& x, const ConvSpec& spec,
                     const LayerParamsT<T>& params) {
    if (x.shape.c != spec.in_channels) {
        throw std::invalid_argument("conv2d: input has " + std::to_string(x.shape.c) +
                                    " channels, spec expects " +
                                    std::to_string(spec.in_channels));
    }
    if (spec.kernel < 1 || spec.stride < 1 || spec.pad < 0) {
        throw std::invalid_argument("conv2d: bad kernel/stride/pad");
    }
    if (spec.out_extent(x.shape.h) < 1 || spec.out_extent(x.shape.w) < 1) {
        throw std::invalid_argument("conv2d: output extent would be < 1 for input " +
                                    x.shape.str());
    }
    const Shape want_w{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
    if (!(params.w.shape == want_w)) {
        throw std::invalid_argument("conv2d: weight shape " + params.w.shape.str() +
                                    " does not match spec " + want_w.str());
    }
    if (spec.has_bias && !(params.b.shape == Shape{1, spec.out_channels, 1, 1})) {
        throw std::invalid_argument("conv2d: bias shape mismatch");
    }
}

}  // namespace

template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const ConvSpec& spec,
                          const LayerParamsT<T>& params) {
    check_conv_args(x, spec, params);
    const std::int64_t N = x.shape.n, C = x.shape.c, H = x.shape.h, W = x.shape.w;
    const std::int64_t OH = spec.out_extent(H), OW = spec.out_extent(W);
    const std::int64_t M = spec.out_channels;
    const std::int64_t K = C * spec.kernel * spec.kernel;
    const std::int64_t P = OH * OW;

    TensorT<T> y(Shape{N, M, OH, OW});
    std::vector<T> col(static_cast<std::size_t>(K * P));
    for (std::int64_t in = 0; in < N; ++in) {
        im2col(x.ptr() + in * C * H * W, C, H, W, spec.kernel, spec.stride, spec.pad,
               OH, OW, col.data());
        detail::gemm_nn<T>(params.w.ptr(), col.data(), y.ptr() + in * M * P, M, K, P,
                           /*accumulate=*/false);
        if (spec.has_bias) {
            for (std::int64_t oc = 0; oc < M; ++oc) {
                T* row = y.ptr() + (in * M + oc) * P;
                const T b = params.b.data[static_cast<std::size_t>(oc)];
                for (std::int64_t j = 0; j < P; ++j) row[j] += b;
            }
        }
    }
    return y;
}

template <class T>
LayerGradsT<T> conv2d_backward(const TensorT<T>& x, const ConvSpec& spec,
                               const LayerParamsT<T>& params,
                               const TensorT<T>& grad_out) {
    check_conv_args(x, spec, params);
    const std::int64_t N = x.shape.n, C = x.shape.c, H = x.shape.h, W = x.shape.w;
    const std::int64_t OH = spec.out_extent(H), OW = spec.out_extent(W);
    const std::int64_t M = spec.out_channels;
    const std::int64_t K = C * spec.kernel * spec.kernel;
    const std::int64_t P = OH * OW;
    if (!(grad_out.shape == Shape{N, M, OH, OW})) {
        throw std::invalid_argument("conv2d_backward: grad_out shape " +
                                    grad_out.shape.str() + " does not match output");
    }

    LayerGradsT<T> g;
    g.input = TensorT<T>(x.shape);
    g.weights = TensorT<T>(params.w.shape);
    g.bias = TensorT<T>(Shape{1, spec.out_channels, 1, 1});

    std::vector<T> col(static_cast<std::size_t>(K * P));
    std::vector<T> col_t(static_cast<std::size_t>(K * P));   // P x K
    std::vector<T> w_t(static_cast<std::size_t>(K * M));     // K x M
    std::vector<T> gcol(static_cast<std::size_t>(K * P));
    detail::transpose<T>(params.w.ptr(), w_t.data(), M, K);

    for (std::int64_t in = 0; in < N; ++in) {
        const T* go = grad_out.ptr() + in * M * P;

        // dL/db: plain sums, fixed order
        for (std::int64_t oc = 0; oc < M; ++oc) {
            T s = 0;
            const T* row = go + oc * P;
            for (std::int64_t j = 0; j < P; ++j) s += row[j];
            g.bias.data[static_cast<std::size_t>(oc)] += s;
        }

        im2col(x.ptr() + in * C * H * W, C, H, W, spec.kernel, spec.stride, spec.pad,
               OH, OW, col.data());

        // dL/dW += grad_out (M x P) . col^T (P x K)
        detail::transpose<T>(col.data(), col_t.data(), K, P);
        detail::gemm_nn<T>(go, col_t.data(), g.weights.ptr(), M, P, K,
                           /*accumulate=*/true);

        // dL/dcol = W^T (K x M) . grad_out (M x P), scattered back to the image
        detail::gemm_nn<T>(w_t.data(), go, gcol.data(), K, M, P, /*accumulate=*/false);
        col2im(gcol.data(), C, H, W, spec.kernel, spec.stride, spec.pad, OH, OW,
               g.input.ptr() + in * C * H * W);
    }
    return g;
}

template <class T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    }
    return y;
}

template <class T>
void relu_inplace(TensorT<T>& x) {
    for (auto& v : x.data) {
        if (v < T(0)) v = T(0);
    }
}

template <class T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& grad_out) {
    if (!(x.shape == grad_out.shape)) {
        throw std::invalid_argument("relu_backward: shape mismatch");
    }
    TensorT<T> g(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        g.data[i] = x.data[i] > T(0) ? grad_out.data[i] : T(0);
    }
    return g;
}

template <class T>
TensorT<T> fc_forward(const TensorT<T>& x, const LayerParamsT<T>& params) {
    const std::int64_t n = x.shape.n;
    const std::int64_t d = x.shape.c * x.shape.h * x.shape.w;
    const std::int64_t out = params.w.shape.n;
    if (params.w.shape.c != d || params.w.shape.h != 1 || params.w.shape.w != 1) {
        throw std::invalid_argument("fc_forward: input width " + std::to_string(d) +
                                    " does not match weights " + params.w.shape.str());
    }
    TensorT<T> y(Shape{n, out, 1, 1});
    // y (n x out) = x (n x d) . W^T (d x out)
    std::vector<T> w_t(static_cast<std::size_t>(d * out));
    detail::transpose<T>(params.w.ptr(), w_t.data(), out, d);
    detail::gemm_nn<T>(x.ptr(), w_t.data(), y.ptr(), n, d, out, /*accumulate=*/false);
    if (params.b.size() > 0) {
        for (std::int64_t in = 0; in < n; ++in) {
            for (std::int64_t o = 0; o < out; ++o) {
                y.data[static_cast<std::size_t>(in * out + o)] +=
                    params.b.data[static_cast<std::size_t>(o)];
            }
        }
    }
    return y;
}

template <class T>
LayerGradsT<T> fc_backward(const TensorT<T>& x, const LayerParamsT<T>& params,
                           const TensorT<T>& grad_out) {
    const std::int64_t n = x.shape.n;
    const std::int64_t d = x.shape.c * x.shape.h * x.shape.w;
    const std::int64_t out = params.w.shape.n;
    if (params.w.shape.c != d) {
        throw std::invalid_argument("fc_backward: width mismatch");
    }
    if (!(grad_out.shape == Shape{n, out, 1, 1})) {
        throw std::invalid_argument("fc_backward: grad_out shape mismatch");
    }

    LayerGradsT<T> g;
    g.input = TensorT<T>(x.shape);
    g.weights = TensorT<T>(params.w.shape);
    g.bias = TensorT<T>(Shape{1, out, 1, 1});

    // dL/db
    for (std::int64_t in = 0; in < n; ++in) {
        for (std::int64_t o = 0; o < out; ++o) {
            g.bias.data[static_cast<std::size_t>(o)] +=
                grad_out.data[static_cast<std::size_t>(in * out + o)];
        }
    }
    // dL/dW (out x d) = grad_out^T (out x n) . x (n x d)
    std::vector<T> go_t(static_cast<std::size_t>(out * n));
    detail::transpose<T>(grad_out.ptr(), go_t.data(), n, out);
    detail::gemm_nn<T>(go_t.data(), x.ptr(), g.weights.ptr(), out, n, d,
                       /*accumulate=*/false);
    // dL/dx (n x d) = grad_out (n x out) . W (out x d)
    detail::gemm_nn<T>(grad_out.ptr(), params.w.ptr(), g.input.ptr(), n, out, d,
                       /*accumulate=*/false);
    return g;
}

namespace {
template <class T>
void check_logits(const TensorT<T>& logits, const std::vector<std::int32_t>& labels) {
    if (logits.shape.h != 1 || logits.shape.w != 1) {
        throw std::invalid_argument("softmax: logits must be (n, classes, 1, 1)");
    }
    if (static_cast<std::int64_t>(labels.size()) != logits.shape.n) {
        throw std::invalid_argument("softmax: label count does not match batch");
    }
    for (const auto l : labels) {
        if (l < 0 || l >= logits.shape.c) {
            throw std::invalid_argument("softmax: label " + std::to_string(l) +
                                        " outside [0, " + std::to_string(logits.shape.c) + ")");
        }
    }
}
}  // namespace

template <class T>
XentResultT<T> softmax_xent(const TensorT<T>& logits,
                            const std::vector<std::int32_t>& labels) {
    check_logits(logits, labels);
    const std::int64_t n = logits.shape.n, k = logits.shape.c;
    XentResultT<T> r;
    r.grad_logits = TensorT<T>(logits.shape);
    double loss_sum = 0.0;
    std::vector<double> p(static_cast<std::size_t>(k));
    for (std::int64_t in = 0; in < n; ++in) {
        const T* row = logits.ptr() + in * k;
        double m = static_cast<double>(row[0]);
        for (std::int64_t j = 1; j < k; ++j) m = std::max(m, static_cast<double>(row[j]));
        double z = 0.0;
        for (std::int64_t j = 0; j < k; ++j) {
            p[static_cast<std::size_t>(j)] = std::exp(static_cast<double>(row[j]) - m);
            z += p[static_cast<std::size_t>(j)];
        }
        const std::int64_t lab = labels[static_cast<std::size_t>(in)];
        loss_sum += std::log(z) - (static_cast<double>(row[lab]) - m);
        T* grow = r.grad_logits.ptr() + in * k;
        for (std::int64_t j = 0; j < k; ++j) {
            double gj = p[static_cast<std::size_t>(j)] / z;
            if (j == lab) gj -= 1.0;
            grow[j] = static_cast<T>(gj / static_cast<double>(n));
        }
    }
    r.loss = static_cast<T>(loss_sum / static_cast<double>(n));
    return r;
}

template <class T>
TensorT<T> softmax(const TensorT<T>& logits) {
    if (logits.shape.h != 1 || logits.shape.w != 1) {
        throw std::invalid_argument("softmax: logits must be (n, classes, 1, 1)");
    }
    const std::int64_t n = logits.shape.n, k = logits.shape.c;
    TensorT<T> out(logits.shape);
    for (std::int64_t in = 0; in < n; ++in) {
        const T* row = logits.ptr() + in * k;
        T* orow = out.ptr() + in * k;
        double m = static_cast<double>(row[0]);
        for (std::int64_t j = 1; j < k; ++j) m = std::max(m, static_cast<double>(row[j]));
        double z = 0.0;
        std::vector<double> e(static_cast<std::size_t>(k));
        for (std::int64_t j = 0; j < k; ++j) {
            e[static_cast<std::size_t>(j)] = std::exp(static_cast<double>(row[j]) - m);
            z += e[static_cast<std::size_t>(j)];
        }
        for (std::int64_t j = 0; j < k; ++j) {
            orow[j] = static_cast<T>(e[static_cast<std::size_t>(j)] / z);
        }
    }
    return out;
}

template TensorT<float> conv2d_forward<float>(const TensorT<float>&, const ConvSpec&, const LayerParamsT<float>&);
template TensorT<double> conv2d_forward<double>(const TensorT<double>&, const ConvSpec&, const LayerParamsT<double>&);
template LayerGradsT<float> conv2d_backward<float>(const TensorT<float>&, const ConvSpec&, const LayerParamsT<float>&, const TensorT<float>&);
template LayerGradsT<double> conv2d_backward<double>(const TensorT<double>&, const ConvSpec&, const LayerParamsT<double>&, const TensorT<double>&);
template TensorT<float> relu<float>(const TensorT<float>&);
template TensorT<double> relu<double>(const TensorT<double>&);
template void relu_inplace<float>(TensorT<float>&);
template void relu_inplace<double>(TensorT<double>&);
template TensorT<float> relu_backward<float>(const TensorT<float>&, const TensorT<float>&);
template TensorT<double> relu_backward<double>(const TensorT<double>&, const TensorT<double>&);
template TensorT<float> fc_forward<float>(const TensorT<float>&, const LayerParamsT<float>&);
template TensorT<double> fc_forward<double>(const TensorT<double>&, const LayerParamsT<double>&);
template LayerGradsT<float> fc_backward<float>(const TensorT<float>&, const LayerParamsT<float>&, const TensorT<float>&);
template LayerGradsT<double> fc_backward<double>(const TensorT<double>&, const LayerParamsT<double>&, const TensorT<double>&);
template XentResultT<float> softmax_xent<float>(const TensorT<float>&, const std::vector<std::int32_t>&);
template XentResultT<double> softmax_xent<double>(const TensorT<double>&, const std::vector<std::int32_t>&);
template TensorT<float> softmax<float>(const TensorT<float>&);
template TensorT<double> softmax<double>(const TensorT<double>&);

}  // namespace ffnet
