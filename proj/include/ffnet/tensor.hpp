#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ffnet {

class Rng;

// rank-4 extents, (batch, channels, height, width)
struct Shape {
    std::int64_t n = 0;
    std::int64_t c = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    std::int64_t elems() const { return n * c * h * w; }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

// throws std::invalid_argument on non-positive extents or element-count overflow
void validate_shape(const Shape& s);

// dense rank-4 array, contiguous (n, c, h, w) row-major storage
template <class T>
struct TensorT {
    Shape shape{};
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(const Shape& s, T fill = T(0)) : shape(s) {
        validate_shape(s);
        data.assign(static_cast<std::size_t>(s.elems()), fill);
    }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }

    std::int64_t index(std::int64_t in, std::int64_t ic, std::int64_t ih, std::int64_t iw) const {
        return ((in * shape.c + ic) * shape.h + ih) * shape.w + iw;
    }
    T& at(std::int64_t in, std::int64_t ic, std::int64_t ih, std::int64_t iw) {
        return data[static_cast<std::size_t>(index(in, ic, ih, iw))];
    }
    const T& at(std::int64_t in, std::int64_t ic, std::int64_t ih, std::int64_t iw) const {
        return data[static_cast<std::size_t>(index(in, ic, ih, iw))];
    }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    void fill(T v) { data.assign(data.size(), v); }

    bool operator==(const TensorT&) const = default;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// constant fill
template <class T>
TensorT<T> tensor_full(const Shape& s, T value);

// gaussian fill; consumes the generator in flat index order
template <class T>
TensorT<T> tensor_normal(const Shape& s, T mean, T stddev, Rng& rng);

// channel concatenation: a's channels occupy [0, a.c), b's occupy [a.c, a.c+b.c).
// batch and spatial extents must agree.
template <class T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b);

// copy of channels [c0, c1)
template <class T>
TensorT<T> slice_channels(const TensorT<T>& t, std::int64_t c0, std::int64_t c1);

// spatial window copy; output (i, j) = input (top+i, left+j).
// throws std::out_of_range when the window leaves the image.
template <class T>
TensorT<T> crop(const TensorT<T>& t, std::int64_t top, std::int64_t left,
                std::int64_t out_h, std::int64_t out_w);

// mirror along the width axis
template <class T>
TensorT<T> flip_horizontal(const TensorT<T>& t);

// y += x, shapes must match exactly
template <class T>
void add_inplace(TensorT<T>& y, const TensorT<T>& x);

template <class T>
void scale_inplace(TensorT<T>& y, T a);

template <class T>
double l2_norm(const TensorT<T>& t);

}  // namespace ffnet
