#include "ffnet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "ffnet/rng.hpp"

namespace ffnet {

std::string Shape::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
}

void validate_shape(const Shape& s) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
        throw std::invalid_argument("shape extents must be positive, got " + s.str());
    }
    // overflow-safe element count
    constexpr std::int64_t kMax = std::numeric_limits<std::int64_t>::max();
    std::int64_t total = 1;
    for (std::int64_t d : {s.n, s.c, s.h, s.w}) {
        if (total > kMax / d) {
            throw std::invalid_argument("element count overflows for shape " + s.str());
        }
        total *= d;
    }
}

template <class T>
TensorT<T> tensor_full(const Shape& s, T value) {
    return TensorT<T>(s, value);
}

template <class T>
TensorT<T> tensor_normal(const Shape& s, T mean, T stddev, Rng& rng) {
    TensorT<T> t(s);
    for (auto& v : t.data) {
        v = static_cast<T>(rng.normal(static_cast<double>(mean), static_cast<double>(stddev)));
    }
    return t;
}

template <class T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape.n != b.shape.n || a.shape.h != b.shape.h || a.shape.w != b.shape.w) {
        throw std::invalid_argument("concat_channels: batch/spatial mismatch " +
                                    a.shape.str() + " vs " + b.shape.str());
    }
    TensorT<T> out(Shape{a.shape.n, a.shape.c + b.shape.c, a.shape.h, a.shape.w});
    const std::int64_t plane = a.shape.h * a.shape.w;
    const std::int64_t ac = a.shape.c, bc = b.shape.c;
    for (std::int64_t in = 0; in < a.shape.n; ++in) {
        std::memcpy(out.ptr() + (in * (ac + bc)) * plane,
                    a.ptr() + in * ac * plane, sizeof(T) * static_cast<std::size_t>(ac * plane));
        std::memcpy(out.ptr() + (in * (ac + bc) + ac) * plane,
                    b.ptr() + in * bc * plane, sizeof(T) * static_cast<std::size_t>(bc * plane));
    }
    return out;
}

template <class T>
TensorT<T> slice_channels(const TensorT<T>& t, std::int64_t c0, std::int64_t c1) {
    if (c0 < 0 || c1 <= c0 || c1 > t.shape.c) {
        throw std::invalid_argument("slice_channels: bad channel range");
    }
    TensorT<T> out(Shape{t.shape.n, c1 - c0, t.shape.h, t.shape.w});
    const std::int64_t plane = t.shape.h * t.shape.w;
    for (std::int64_t in = 0; in < t.shape.n; ++in) {
        std::memcpy(out.ptr() + in * (c1 - c0) * plane,
                    t.ptr() + (in * t.shape.c + c0) * plane,
                    sizeof(T) * static_cast<std::size_t>((c1 - c0) * plane));
    }
    return out;
}

template <class T>
TensorT<T> crop(const TensorT<T>& t, std::int64_t top, std::int64_t left,
                std::int64_t out_h, std::int64_t out_w) {
    if (out_h < 1 || out_w < 1 || top < 0 || left < 0 ||
        top + out_h > t.shape.h || left + out_w > t.shape.w) {
        throw std::out_of_range("crop: window outside image bounds");
    }
    TensorT<T> out(Shape{t.shape.n, t.shape.c, out_h, out_w});
    for (std::int64_t in = 0; in < t.shape.n; ++in) {
        for (std::int64_t ic = 0; ic < t.shape.c; ++ic) {
            for (std::int64_t ih = 0; ih < out_h; ++ih) {
                std::memcpy(&out.at(in, ic, ih, 0), &t.at(in, ic, top + ih, left),
                            sizeof(T) * static_cast<std::size_t>(out_w));
            }
        }
    }
    return out;
}

template <class T>
TensorT<T> flip_horizontal(const TensorT<T>& t) {
    TensorT<T> out(t.shape);
    for (std::int64_t in = 0; in < t.shape.n; ++in) {
        for (std::int64_t ic = 0; ic < t.shape.c; ++ic) {
            for (std::int64_t ih = 0; ih < t.shape.h; ++ih) {
                for (std::int64_t iw = 0; iw < t.shape.w; ++iw) {
                    out.at(in, ic, ih, iw) = t.at(in, ic, ih, t.shape.w - 1 - iw);
                }
            }
        }
    }
    return out;
}

template <class T>
void add_inplace(TensorT<T>& y, const TensorT<T>& x) {
    if (!(y.shape == x.shape)) {
        throw std::invalid_argument("add_inplace: shape mismatch " + y.shape.str() +
                                    " vs " + x.shape.str());
    }
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
}

template <class T>
void scale_inplace(TensorT<T>& y, T a) {
    for (auto& v : y.data) v *= a;
}

template <class T>
double l2_norm(const TensorT<T>& t) {
    double s = 0.0;
    for (const auto& v : t.data) s += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(s);
}

template TensorT<float> tensor_full<float>(const Shape&, float);
template TensorT<double> tensor_full<double>(const Shape&, double);
template TensorT<float> tensor_normal<float>(const Shape&, float, float, Rng&);
template TensorT<double> tensor_normal<double>(const Shape&, double, double, Rng&);
template TensorT<float> concat_channels<float>(const TensorT<float>&, const TensorT<float>&);
template TensorT<double> concat_channels<double>(const TensorT<double>&, const TensorT<double>&);
template TensorT<float> slice_channels<float>(const TensorT<float>&, std::int64_t, std::int64_t);
template TensorT<double> slice_channels<double>(const TensorT<double>&, std::int64_t, std::int64_t);
template TensorT<float> crop<float>(const TensorT<float>&, std::int64_t, std::int64_t, std::int64_t, std::int64_t);
template TensorT<double> crop<double>(const TensorT<double>&, std::int64_t, std::int64_t, std::int64_t, std::int64_t);
template TensorT<float> flip_horizontal<float>(const TensorT<float>&);
template TensorT<double> flip_horizontal<double>(const TensorT<double>&);
template void add_inplace<float>(TensorT<float>&, const TensorT<float>&);
template void add_inplace<double>(TensorT<double>&, const TensorT<double>&);
template void scale_inplace<float>(TensorT<float>&, float);
template void scale_inplace<double>(TensorT<double>&, double);
template double l2_norm<float>(const TensorT<float>&);
template double l2_norm<double>(const TensorT<double>&);

}  // namespace ffnet
