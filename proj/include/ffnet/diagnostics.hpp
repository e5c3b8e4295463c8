#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffnet/graph.hpp"

namespace ffnet {

struct GradCheckEntry {
    std::string name;    // parameter tensor, e.g. "stage1.s2c1.w"
    double max_rel_err;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_param;
    double global_max = 0.0;
    double tolerance = 0.0;
    bool pass = false;

    std::string table() const;  // human-readable summary
};

// Exhaustive central-difference check of the whole-network gradient in f64:
// every parameter is perturbed by +-eps and the analytic gradient is compared
// against (L+ - L-) / (2 eps) with relative error |a-n| / max(|a|,|n|,1e-12).
// The loss is piecewise smooth, so a difference quotient is trusted only when
// both evaluations share the same ReLU activation pattern; otherwise the step
// shrinks by 10x (up to three times) until they do. Intended for tiny specs
// (<= ~20k parameters). Throws std::runtime_error on non-finite values.
GradCheckReport gradcheck(const NetworkSpec& spec, ParamStoreT<double>& params,
                          const TensorD& x, const std::vector<std::int32_t>& labels,
                          double tolerance, double eps = 1e-4);

// convenience wrapper: He-initialised f64 parameters and a fixed random batch,
// all derived from `seed`
GradCheckReport gradcheck(const NetworkSpec& spec, std::uint64_t seed,
                          double tolerance, int batch = 2, double eps = 1e-4);

// per-stage L2 norm of the gradient of each stage's first deep-conv weights
struct FlowProfile {
    std::vector<double> stage_norms;
    std::string tag;  // "ffnet" or "ablation"
    std::uint64_t seed = 0;
};

// one forward/backward with an explicit loss gradient
FlowProfile flow_profile(const NetworkSpec& spec, ParamStore& params,
                         const Tensor& batch, const Tensor& grad_logits,
                         const std::string& tag = "ffnet", std::uint64_t seed = 0);

// convenience: cross-entropy loss gradient from labels
FlowProfile flow_profile(const NetworkSpec& spec, ParamStore& params,
                         const Tensor& batch, const std::vector<std::int32_t>& labels,
                         const std::string& tag = "ffnet", std::uint64_t seed = 0);

std::string flow_profile_csv(const FlowProfile& p);  // "stage,norm"

struct FlowRow {
    std::uint64_t seed;
    double r_ffnet;
    double r_ablation;
};

// Early/late gradient-norm ratios at initialisation: for each seed, builds a
// freshly initialised network and its ablation twin, runs one forward/backward
// on the same random batch, and records r = norm(stage 1) / norm(last stage)
// for both. No training happens.
struct FlowSummary {
    std::vector<FlowRow> rows;
    double fraction_ffnet_higher = 0.0;  // fraction of seeds with r_ffnet > r_ablation
    int stage_count = 0;
    int batch_size = 0;

    std::string table() const;
};

FlowSummary flow_experiment(int stage_count, int seed_count, int batch_size,
                            int in_h = 32, int in_w = 32, int classes = 10,
                            std::uint64_t seed0 = 1, int branch_width = 64);

std::string flow_summary_csv(const FlowSummary& s);  // "seed,r_ffnet,r_ablation"

}  // namespace ffnet
