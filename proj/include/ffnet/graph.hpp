#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ffnet/layers.hpp"
#include "ffnet/rng.hpp"

namespace ffnet {

// One fast-forwarding stage: a deep branch of three 3x3 convolutions (pads
// 0, 0, 1 in application order, each followed by ReLU) in parallel with a
// single unpadded 5x5 convolution + ReLU. Branch outputs are concatenated
// channel-wise, deep branch first.
struct StageSpec {
    int in_channels = 0;
    int branch_width = 64;
    std::array<ConvSpec, 3> deep{};
    ConvSpec ff{};

    bool operator==(const StageSpec&) const = default;
};

struct NetworkSpec {
    int in_c = 3;
    int in_h = 32;
    int in_w = 32;
    std::vector<StageSpec> stages;
    int fc1 = 400;
    int fc2 = 100;
    int num_classes = 10;
    bool ablation = false;  // fast-forward branches removed, stages emit branch_width channels

    int stage_out_channels() const {
        if (stages.empty()) return in_c;
        return ablation ? stages.back().branch_width : 2 * stages.back().branch_width;
    }

    // flat key=value form; also the checkpoint fingerprint source
    std::string canonical_text() const;

    bool operator==(const NetworkSpec&) const = default;
};

// builds the stage/fc graph and validates that every convolution along the
// chain yields spatial extent >= 1; throws std::invalid_argument otherwise
NetworkSpec build_ffnet(int in_c, int in_h, int in_w, int num_classes,
                        int stage_count = 6, bool ablation = false,
                        int branch_width = 64, int fc1 = 400, int fc2 = 100);

// parses the flat key=value architecture description ('#' comments allowed;
// keys: input, stages, branch_width, fc1, fc2, classes, ablation).
// unknown keys are rejected.
NetworkSpec spec_from_text(const std::string& text);

struct NamedShape {
    std::string name;
    Shape shape;  // batch extent reported as 1
};

// exact output shape of every node, concat and flatten included
std::vector<NamedShape> infer_shapes(const NetworkSpec& spec);

// spatial height at the input and after each stage, e.g. 32,28,24,20,16,12,8
std::vector<std::int64_t> spatial_trace(const NetworkSpec& spec);

struct ParamRow {
    std::string name;
    std::int64_t count;
};

struct ParamCount {
    std::vector<ParamRow> rows;
    std::int64_t total = 0;
    std::int64_t bytes = 0;  // at 4 bytes per parameter
};

ParamCount count_params(const NetworkSpec& spec);

struct ConvLayerCount {
    int deep = 0;
    int ff = 0;
    int total() const { return deep + ff; }
};

ConvLayerCount conv_layer_count(const NetworkSpec& spec);

// parameterized-layer counts over input->loss paths in the stage DAG
struct PathDepth {
    int shortest = 0;
    int longest = 0;
};

PathDepth gradient_path_depth(const NetworkSpec& spec);

// named parameters with parallel gradient and momentum buffers.
// order: stage{i}.s2c1, .s2c2, .s2c3, .b2c1 (skipped under ablation), then
// fc1, fc2, out.
template <class T>
struct ParamEntryT {
    std::string name;
    LayerParamsT<T> p;  // values
    LayerParamsT<T> g;  // gradients
    LayerParamsT<T> m;  // momentum
};

template <class T>
class ParamStoreT {
public:
    std::vector<ParamEntryT<T>>& entries() { return entries_; }
    const std::vector<ParamEntryT<T>>& entries() const { return entries_; }

    ParamEntryT<T>& by_name(const std::string& name);
    const ParamEntryT<T>& by_name(const std::string& name) const;
    bool has(const std::string& name) const;

    void zero_grads();
    std::int64_t param_elems() const;  // total elements across value tensors

private:
    std::vector<ParamEntryT<T>> entries_;

    template <class U>
    friend ParamStoreT<U> init_params(const NetworkSpec&, std::uint64_t);
};

using ParamStore = ParamStoreT<float>;

// He-initialised weights (std = sqrt(2 / fan_in)), zero biases, zero gradient
// and momentum buffers; one generator seeded with `seed` fills the store in
// entry order
template <class T>
ParamStoreT<T> init_params(const NetworkSpec& spec, std::uint64_t seed);

// activations captured during a forward pass. every tensor is stored after
// its ReLU, which is exactly what the backward pass needs: the post-ReLU
// value doubles as the ReLU mask, and it is the input of the next layer.
template <class T>
struct StageTraceT {
    TensorT<T> s1;    // stage input
    TensorT<T> s2c1;  // deep conv 1 output
    TensorT<T> s2c2;  // deep conv 2 output
    TensorT<T> s2c3;  // deep conv 3 output (padded one)
    TensorT<T> b2c1;  // fast-forward conv output (empty under ablation)
    TensorT<T> s2;    // stage output (concat, or s2c3 under ablation)
};

template <class T>
struct ForwardTraceT {
    std::vector<StageTraceT<T>> stages;
    TensorT<T> fc1_out;  // post-ReLU
    TensorT<T> fc2_out;  // post-ReLU
};

// whole-network forward; capture into *trace when given.
// throws std::invalid_argument when x does not match the spec input shape.
template <class T>
TensorT<T> forward(const NetworkSpec& spec, const ParamStoreT<T>& params,
                   const TensorT<T>& x, ForwardTraceT<T>* trace = nullptr);

// reverse traversal; fills every gradient buffer in `params`. the gradient
// w.r.t. each stage input is the sum of the deep-branch and fast-forward
// contributions. requires a trace from a capturing forward on the same input.
template <class T>
void backward(const NetworkSpec& spec, ParamStoreT<T>& params,
              const ForwardTraceT<T>& trace, const TensorT<T>& grad_logits);

// test hook: corrupts one backward op (sign flip, or swapped ranges for the
// concat adjoint) so gradient checking can prove its own sensitivity
enum class BackwardFault { none, conv, fc, relu, concat };
void set_backward_fault(BackwardFault f);
BackwardFault backward_fault();

}  // namespace ffnet
