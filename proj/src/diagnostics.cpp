#include "ffnet/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "ffnet/layers.hpp"

namespace ffnet {

namespace {
constexpr std::uint64_t kBatchStream = 0xBA7C;
constexpr std::uint64_t kLabelStream = 0x1AB5;

double rel_err(double a, double n) {
    const double denom = std::max({std::fabs(a), std::fabs(n), 1e-12});
    return std::fabs(a - n) / denom;
}

std::string fmt_sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}
}  // namespace

namespace {

// order-dependent hash of the ReLU activation pattern; two forward passes in
// the same linear region of the piecewise-smooth loss hash identically
std::uint64_t relu_pattern_hash(const ForwardTraceT<double>& trace) {
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&h](const TensorD& t) {
        for (const double v : t.data) {
            h = h * 1099511628211ull + (v > 0.0 ? 2u : 1u);
        }
    };
    for (const auto& st : trace.stages) {
        feed(st.s2c1);
        feed(st.s2c2);
        feed(st.s2c3);
        if (st.b2c1.size() > 0) feed(st.b2c1);
    }
    feed(trace.fc1_out);
    feed(trace.fc2_out);
    return h;
}

}  // namespace

GradCheckReport gradcheck(const NetworkSpec& spec, ParamStoreT<double>& params,
                          const TensorD& x, const std::vector<std::int32_t>& labels,
                          double tolerance, double eps) {
    auto loss_and_pattern = [&]() -> std::pair<double, std::uint64_t> {
        ForwardTraceT<double> t;
        const TensorD logits = forward(spec, params, x, &t);
        return {softmax_xent(logits, labels).loss, relu_pattern_hash(t)};
    };

    // analytic gradients
    params.zero_grads();
    ForwardTraceT<double> trace;
    const TensorD logits = forward(spec, params, x, &trace);
    const auto xent = softmax_xent(logits, labels);
    backward(spec, params, trace, xent.grad_logits);

    GradCheckReport report;
    report.tolerance = tolerance;

    for (auto& e : params.entries()) {
        auto check_tensor = [&](TensorD& values, const TensorD& grads,
                                const std::string& name) {
            double worst = 0.0;
            for (std::size_t i = 0; i < values.data.size(); ++i) {
                const double saved = values.data[i];
                // A central difference is only a derivative estimate when both
                // evaluations sit in the same ReLU linear region; when the
                // perturbation flips an activation, shrink the step and retry.
                double numeric = 0.0;
                double step = eps;
                for (int attempt = 0; attempt < 4; ++attempt, step *= 0.1) {
                    values.data[i] = saved + step;
                    const auto [lp, hp] = loss_and_pattern();
                    values.data[i] = saved - step;
                    const auto [lm, hm] = loss_and_pattern();
                    values.data[i] = saved;
                    numeric = (lp - lm) / (2.0 * step);
                    if (hp == hm) break;
                }
                const double analytic = grads.data[i];
                if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
                    throw std::runtime_error("gradcheck: non-finite value at " + name);
                }
                worst = std::max(worst, rel_err(analytic, numeric));
            }
            report.per_param.push_back({name, worst});
            report.global_max = std::max(report.global_max, worst);
        };
        check_tensor(e.p.w, e.g.w, e.name + ".w");
        check_tensor(e.p.b, e.g.b, e.name + ".b");
    }
    report.pass = report.global_max < tolerance;
    return report;
}

GradCheckReport gradcheck(const NetworkSpec& spec, std::uint64_t seed,
                          double tolerance, int batch, double eps) {
    ParamStoreT<double> params = init_params<double>(spec, seed);
    Rng data_rng = derive_rng(seed, kBatchStream);
    TensorD x = tensor_normal<double>(Shape{batch, spec.in_c, spec.in_h, spec.in_w},
                                      0.0, 1.0, data_rng);
    Rng label_rng = derive_rng(seed, kLabelStream);
    std::vector<std::int32_t> labels(static_cast<std::size_t>(batch));
    for (auto& l : labels) {
        l = static_cast<std::int32_t>(label_rng.below(spec.num_classes));
    }
    return gradcheck(spec, params, x, labels, tolerance, eps);
}

std::string GradCheckReport::table() const {
    std::ostringstream os;
    for (const auto& e : per_param) {
        os << e.name << "  max_rel_err " << fmt_sci(e.max_rel_err) << "\n";
    }
    os << "global max relative error: " << fmt_sci(global_max) << " (tolerance "
       << fmt_sci(tolerance) << ")\n"
       << (pass ? "PASS" : "FAIL") << "\n";
    return os.str();
}

FlowProfile flow_profile(const NetworkSpec& spec, ParamStore& params,
                         const Tensor& batch, const Tensor& grad_logits,
                         const std::string& tag, std::uint64_t seed) {
    params.zero_grads();
    ForwardTraceT<float> trace;
    forward(spec, params, batch, &trace);
    backward(spec, params, trace, grad_logits);

    FlowProfile profile;
    profile.tag = tag;
    profile.seed = seed;
    for (std::size_t i = 0; i < spec.stages.size(); ++i) {
        const auto& e = params.by_name("stage" + std::to_string(i + 1) + ".s2c1");
        profile.stage_norms.push_back(l2_norm(e.g.w));
    }
    return profile;
}

FlowProfile flow_profile(const NetworkSpec& spec, ParamStore& params,
                         const Tensor& batch, const std::vector<std::int32_t>& labels,
                         const std::string& tag, std::uint64_t seed) {
    ForwardTraceT<float> trace;
    const Tensor logits = forward(spec, params, batch, &trace);
    const auto xent = softmax_xent(logits, labels);
    return flow_profile(spec, params, batch, xent.grad_logits, tag, seed);
}

std::string flow_profile_csv(const FlowProfile& p) {
    std::string out = "stage,norm\n";
    for (std::size_t i = 0; i < p.stage_norms.size(); ++i) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i + 1, p.stage_norms[i]);
        out += buf;
    }
    return out;
}

FlowSummary flow_experiment(int stage_count, int seed_count, int batch_size,
                            int in_h, int in_w, int classes, std::uint64_t seed0,
                            int branch_width) {
    if (stage_count < 1) throw std::invalid_argument("flow_experiment: need >= 1 stage");
    if (seed_count < 1) throw std::invalid_argument("flow_experiment: need >= 1 seed");

    const NetworkSpec ffnet =
        build_ffnet(3, in_h, in_w, classes, stage_count, false, branch_width);
    const NetworkSpec ablation =
        build_ffnet(3, in_h, in_w, classes, stage_count, true, branch_width);

    FlowSummary summary;
    summary.stage_count = stage_count;
    summary.batch_size = batch_size;

    int higher = 0;
    for (int s = 0; s < seed_count; ++s) {
        const std::uint64_t seed = seed0 + static_cast<std::uint64_t>(s);
        Rng data_rng = derive_rng(seed, kBatchStream);
        const Tensor x = tensor_normal<float>(Shape{batch_size, 3, in_h, in_w}, 0.0f,
                                              1.0f, data_rng);
        Rng label_rng = derive_rng(seed, kLabelStream);
        std::vector<std::int32_t> labels(static_cast<std::size_t>(batch_size));
        for (auto& l : labels) {
            l = static_cast<std::int32_t>(label_rng.below(classes));
        }

        auto ratio = [&](const NetworkSpec& net) {
            ParamStore params = init_params<float>(net, seed);
            const FlowProfile p = flow_profile(net, params, x, labels);
            const double first = p.stage_norms.front();
            const double last = p.stage_norms.back();
            return first / last;
        };
        const double r_ff = ratio(ffnet);
        const double r_ab = ratio(ablation);
        summary.rows.push_back({seed, r_ff, r_ab});
        if (r_ff > r_ab) ++higher;
    }
    summary.fraction_ffnet_higher =
        static_cast<double>(higher) / static_cast<double>(seed_count);
    return summary;
}

std::string flow_summary_csv(const FlowSummary& s) {
    std::string out = "seed,r_ffnet,r_ablation\n";
    for (const auto& r : s.rows) {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "%llu,%.9g,%.9g\n",
                      static_cast<unsigned long long>(r.seed), r.r_ffnet, r.r_ablation);
        out += buf;
    }
    return out;
}

std::string FlowSummary::table() const {
    std::ostringstream os;
    os << "seed      r_ffnet       r_ablation\n";
    for (const auto& r : rows) {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "%-8llu  %-12.6g  %-12.6g\n",
                      static_cast<unsigned long long>(r.seed), r.r_ffnet, r.r_ablation);
        os << buf;
    }
    char frac[96];
    std::snprintf(frac, sizeof(frac),
                  "fraction of seeds with r_ffnet > r_ablation: %.3f\n",
                  fraction_ffnet_higher);
    os << frac;
    return os.str();
}

}  // namespace ffnet
