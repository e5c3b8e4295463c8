#pragma once

#include <cstdint>
#include <vector>

#include "ffnet/tensor.hpp"

namespace ffnet {

// square-kernel 2-d convolution hyperparameters.
// output extent: floor((N + 2*pad - kernel) / stride) + 1
struct ConvSpec {
    int kernel = 3;
    int in_channels = 0;
    int out_channels = 0;
    int stride = 1;
    int pad = 0;
    bool has_bias = true;

    std::int64_t out_extent(std::int64_t in) const {
        return (in + 2 * static_cast<std::int64_t>(pad) - kernel) / stride + 1;
    }
    std::int64_t weight_count() const {
        return static_cast<std::int64_t>(kernel) * kernel * in_channels * out_channels;
    }
    std::int64_t param_count() const {
        return weight_count() + (has_bias ? out_channels : 0);
    }

    bool operator==(const ConvSpec&) const = default;
};

// weights (out, in, k, k) for conv and (out, in, 1, 1) for fully-connected;
// bias (1, out, 1, 1)
template <class T>
struct LayerParamsT {
    TensorT<T> w;
    TensorT<T> b;
};

template <class T>
struct LayerGradsT {
    TensorT<T> input;
    TensorT<T> weights;
    TensorT<T> bias;
};

// cross-correlation of the zero-padded input with each filter, plus bias.
// throws std::invalid_argument on channel mismatch or degenerate output extent.
template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const ConvSpec& spec,
                          const LayerParamsT<T>& params);

// exact partial derivatives of the forward map; x is the saved forward input
template <class T>
LayerGradsT<T> conv2d_backward(const TensorT<T>& x, const ConvSpec& spec,
                               const LayerParamsT<T>& params,
                               const TensorT<T>& grad_out);

template <class T>
TensorT<T> relu(const TensorT<T>& x);

template <class T>
void relu_inplace(TensorT<T>& x);

// passes grad where x > 0; the subgradient at x == 0 is 0.
// relu(x) > 0 iff x > 0, so the saved post-activation works as x here too.
template <class T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& grad_out);

// y = W x + b per batch row; x of any (n,c,h,w) is read as (n, c*h*w)
template <class T>
TensorT<T> fc_forward(const TensorT<T>& x, const LayerParamsT<T>& params);

// grad.input comes back in x's original shape
template <class T>
LayerGradsT<T> fc_backward(const TensorT<T>& x, const LayerParamsT<T>& params,
                           const TensorT<T>& grad_out);

template <class T>
struct XentResultT {
    T loss;                  // mean over the batch of -log softmax[label]
    TensorT<T> grad_logits;  // (softmax - onehot) / n
};

// softmax cross entropy with max-subtraction; labels must lie in [0, classes)
template <class T>
XentResultT<T> softmax_xent(const TensorT<T>& logits,
                            const std::vector<std::int32_t>& labels);

// row-wise softmax probabilities (used by ten-crop fusion)
template <class T>
TensorT<T> softmax(const TensorT<T>& logits);

}  // namespace ffnet
