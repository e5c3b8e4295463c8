// Acceptance suite: runs every top-level criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code = number of failures.
//
// Usage: acceptance [path-to-ffnet-cli]

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "ffnet/checkpoint.hpp"
#include "ffnet/data.hpp"
#include "ffnet/diagnostics.hpp"
#include "ffnet/gemm.hpp"
#include "ffnet/trainer.hpp"
#include "finite_diff.hpp"
#include "naive_conv.hpp"
#include "test_util.hpp"

using namespace ffnet;

namespace {

std::string g_cli_path;
int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    std::printf("[%s] %-24s %s (%.1fs)\n", pass ? "PASS" : "FAIL", name.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void criterion(const std::string& name,
               const std::function<std::pair<bool, std::string>()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        auto [p, d] = body();
        pass = p;
        detail = d;
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(name, pass, detail, secs);
}

std::string run_cli(const std::string& args, int* code) {
    const std::string cmd = g_cli_path + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
        *code = -1;
        return "";
    }
    std::string out;
    std::array<char, 512> buf;
    while (fgets(buf.data(), buf.size(), pipe) != nullptr) out += buf.data();
    const int status = pclose(pipe);
    *code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return out;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

// -------------------------------------------------------------------------
// criterion 1: per-layer and end-to-end finite-difference gradient checks
// -------------------------------------------------------------------------

template <class T>
T weighted_sum(const TensorT<T>& y, const TensorT<T>& r) {
    T s = T(0);
    for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * r.data[i];
    return s;
}

double conv_layer_trials(Rng& rng, int trials) {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int k = 1 + 2 * static_cast<int>(rng.below(2));
        const int s = 1 + static_cast<int>(rng.below(2));
        const int p = static_cast<int>(rng.below(2));
        const int cin = 1 + static_cast<int>(rng.below(3));
        const int cout = 1 + static_cast<int>(rng.below(3));
        ConvSpec spec{k, cin, cout, s, p, true};
        const std::int64_t h = k + 2 + rng.below(3);
        if (spec.out_extent(h) < 1) {
            --t;
            continue;
        }
        TensorD x = random_tensor<double>(Shape{2, cin, h, h}, rng);
        LayerParamsT<double> params;
        params.w = random_tensor<double>(Shape{cout, cin, k, k}, rng);
        params.b = random_tensor<double>(Shape{1, cout, 1, 1}, rng);
        const TensorD r = random_tensor<double>(
            Shape{2, cout, spec.out_extent(h), spec.out_extent(h)}, rng);
        auto loss = [&]() { return weighted_sum(conv2d_forward(x, spec, params), r); };
        const auto g = conv2d_backward(x, spec, params, r);
        worst = std::max(worst, fd_check_tensor(loss, x, g.input));
        worst = std::max(worst, fd_check_tensor(loss, params.w, g.weights));
        worst = std::max(worst, fd_check_tensor(loss, params.b, g.bias));
    }
    return worst;
}

double fc_layer_trials(Rng& rng, int trials) {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const std::int64_t n = 1 + rng.below(3), d = 1 + rng.below(8), out = 1 + rng.below(5);
        TensorD x = random_tensor<double>(Shape{n, d, 1, 1}, rng);
        LayerParamsT<double> p;
        p.w = random_tensor<double>(Shape{out, d, 1, 1}, rng);
        p.b = random_tensor<double>(Shape{1, out, 1, 1}, rng);
        const TensorD r = random_tensor<double>(Shape{n, out, 1, 1}, rng);
        auto loss = [&]() { return weighted_sum(fc_forward(x, p), r); };
        const auto g = fc_backward(x, p, r);
        worst = std::max(worst, fd_check_tensor(loss, x, g.input));
        worst = std::max(worst, fd_check_tensor(loss, p.w, g.weights));
        worst = std::max(worst, fd_check_tensor(loss, p.b, g.bias));
    }
    return worst;
}

double relu_layer_trials(Rng& rng, int trials) {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        TensorD x = random_tensor<double>(Shape{1, 3, 4, 4}, rng, /*min_abs=*/1e-2);
        const TensorD r = random_tensor<double>(x.shape, rng);
        auto loss = [&]() { return weighted_sum(relu(x), r); };
        const TensorD g = relu_backward(x, r);
        worst = std::max(worst, fd_check_tensor(loss, x, g));
    }
    return worst;
}

double softmax_layer_trials(Rng& rng, int trials) {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        TensorD logits = random_tensor<double>(Shape{3, 6, 1, 1}, rng);
        const auto labels = random_labels(3, 6, rng);
        auto loss = [&]() { return softmax_xent(logits, labels).loss; };
        const auto res = softmax_xent(logits, labels);
        worst = std::max(worst, fd_check_tensor(loss, logits, res.grad_logits));
    }
    return worst;
}

std::pair<bool, std::string> gradient_correctness() {
    Rng rng(101);
    const double conv_err = conv_layer_trials(rng, 20);
    const double fc_err = fc_layer_trials(rng, 20);
    const double relu_err = relu_layer_trials(rng, 20);
    const double sm_err = softmax_layer_trials(rng, 20);

    // The literal 2-stage 8x8 request contradicts the stage size rule the
    // architecture itself pins down (8 -> 4 -> 0); it must be rejected, and
    // the end-to-end check runs on the smallest valid extent instead (10x10).
    bool geometry_documented = false;
    try {
        build_ffnet(3, 8, 8, 2, 2, false, 8, 16, 8);
    } catch (const std::invalid_argument&) {
        geometry_documented = true;
    }
    const NetworkSpec tiny = build_ffnet(3, 10, 10, 2, 2, false, 8, 16, 8);
    const auto report = gradcheck(tiny, 101, 1e-4);

    const double layer_worst = std::max({conv_err, fc_err, relu_err, sm_err});
    const bool pass = layer_worst < 1e-4 && geometry_documented && report.pass;
    return {pass,
            "per-layer max rel err " + fmt(layer_worst) +
                " (conv/fc/relu/softmax, 20 trials each); end-to-end 2-stage 2-class max rel err " +
                fmt(report.global_max) +
                " at 10x10 (8x8 is geometrically impossible and rejected: " +
                (geometry_documented ? "yes" : "NO") + ")"};
}

// -------------------------------------------------------------------------
// criterion 2: architecture accounting via the CLI and an independent sum
// -------------------------------------------------------------------------

std::pair<bool, std::string> architecture_accounting() {
    const NetworkSpec spec = build_ffnet(3, 32, 32, 10, 6);
    const auto pc = count_params(spec);
    const auto store = init_params<float>(spec, 1);
    const bool totals_agree = pc.total == 5161382 && store.param_elems() == pc.total;
    const bool trace_ok =
        spatial_trace(spec) == std::vector<std::int64_t>{32, 28, 24, 20, 16, 12, 8};
    const auto convs = conv_layer_count(spec);
    const bool convs_ok = convs.deep == 18 && convs.ff == 6;

    bool cli_ok = true;
    std::string cli_note;
    if (!g_cli_path.empty()) {
        int code = 0;
        const std::string out =
            run_cli("inspect --stages 6 --input 3x32x32 --classes 10", &code);
        cli_ok = code == 0 &&
                 out.find("spatial trace: 32 -> 28 -> 24 -> 20 -> 16 -> 12 -> 8") !=
                     std::string::npos &&
                 out.find("conv layers: 24 (18 deep + 6 fast-forward)") != std::string::npos &&
                 out.find("total params 5161382") != std::string::npos;
        cli_note = cli_ok ? "; inspect output verified" : "; CLI INSPECT MISMATCH";
    } else {
        cli_note = "; CLI not provided, library-level only";
    }

    return {totals_agree && trace_ok && convs_ok && cli_ok,
            "total 5161382 = independent element sum; trace 32..8; 24 convs (18+6); "
            "20.6 MB derived (documented gap vs the published 10.8 MB)" + cli_note};
}

// -------------------------------------------------------------------------
// criterion 3: gradient-path depth, fast-forward vs ablation
// -------------------------------------------------------------------------

std::pair<bool, std::string> path_depth_claim() {
    const auto ff = gradient_path_depth(build_ffnet(3, 32, 32, 10, 6));
    const auto ab = gradient_path_depth(build_ffnet(3, 32, 32, 10, 6, true));
    const bool pass = ff.shortest == 9 && ff.longest == 21 && ab.shortest == 21;
    return {pass, "ffnet shortest " + std::to_string(ff.shortest) + " vs ablation " +
                      std::to_string(ab.shortest) + " (longest " +
                      std::to_string(ff.longest) + ")"};
}

// -------------------------------------------------------------------------
// criterion 4: gradient-flow experiment at initialization
// -------------------------------------------------------------------------

std::pair<bool, std::string> gradient_flow() {
    const FlowSummary s = flow_experiment(/*stage_count=*/6, /*seed_count=*/20,
                                          /*batch_size=*/8);
    const bool pass = s.fraction_ffnet_higher >= 0.9;
    return {pass, "r_ffnet > r_ablation in " + fmt(100.0 * s.fraction_ffnet_higher) +
                      "% of 20 seeds (threshold 90%)"};
}

// -------------------------------------------------------------------------
// criterion 5: desk-scale training behaviour on the separable set
// -------------------------------------------------------------------------

std::pair<bool, std::string> desk_scale_training() {
    const NetworkSpec spec = build_ffnet(3, 32, 32, 2, 2);  // two stages, full width
    const Dataset data = synthetic_dataset(SyntheticKind::separable, 16, 2, 501);

    // (a) monotonic decrease over the first 20 iterations at lr 1e-3
    //     (full-batch vanilla descent; augmentation off so the objective is fixed)
    TrainConfig mono;
    mono.batch_size = 16;
    mono.lr = 1e-3;
    mono.momentum = 0.0;
    mono.weight_decay = 0.0;
    mono.augment = false;
    mono.eval_interval = 1;
    mono.max_iterations = 20;
    mono.seed = 501;
    auto mono_params = init_params<float>(spec, 501);
    const auto mono_run = train(spec, mono_params, data, mono);
    bool monotonic = mono_run.metrics.size() == 20;
    for (std::size_t i = 1; i < mono_run.metrics.size(); ++i) {
        if (!(mono_run.metrics[i].loss < mono_run.metrics[i - 1].loss)) monotonic = false;
    }

    // (b) > 95% training accuracy within 500 iterations
    TrainConfig fit;
    fit.batch_size = 16;
    fit.lr = 0.01;
    fit.momentum = 0.9;
    fit.weight_decay = 5e-4;
    fit.augment = false;
    fit.eval_interval = 0;
    fit.seed = 502;
    auto fit_params = init_params<float>(spec, 502);
    std::int64_t used = 0;
    double accuracy = 0.0;
    while (used < 500) {
        fit.max_iterations = std::min<std::int64_t>(used + 25, 500);
        train(spec, fit_params, data, fit, used);
        used = fit.max_iterations;
        accuracy = evaluate(spec, fit_params, data, false).accuracy;
        if (accuracy > 0.95) break;
    }

    const bool pass = monotonic && accuracy > 0.95;
    return {pass, std::string("loss strictly decreasing over 20 iters at lr 1e-3: ") +
                      (monotonic ? "yes" : "NO") + "; train accuracy " + fmt(accuracy) +
                      " after " + std::to_string(used) + " iters (2-stage net)"};
}

// -------------------------------------------------------------------------
// criterion 6: determinism and checkpoint persistence
// -------------------------------------------------------------------------

std::pair<bool, std::string> determinism_persistence() {
    set_max_threads(1);  // the --deterministic contract
    const NetworkSpec spec = build_ffnet(3, 32, 32, 2, 1, false, 8, 16, 8);
    const Dataset data = synthetic_dataset(SyntheticKind::separable, 8, 2, 601);

    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.eval_interval = 1;
    cfg.seed = 601;
    cfg.max_iterations = 6;

    auto p1 = init_params<float>(spec, 601);
    auto p2 = init_params<float>(spec, 601);
    const auto r1 = train(spec, p1, data, cfg);
    const auto r2 = train(spec, p2, data, cfg);
    const bool identical = metrics_csv(r1.metrics) == metrics_csv(r2.metrics);

    // interrupted at iteration 3, checkpointed, resumed
    cfg.max_iterations = 3;
    auto ph = init_params<float>(spec, 601);
    const auto head = train(spec, ph, data, cfg);
    const std::string ckpt = "acceptance_resume.ffnt";
    save_checkpoint(ckpt, spec, ph, 3);
    auto pr = init_params<float>(spec, 77);
    const auto iter = load_checkpoint(ckpt, spec, pr);
    cfg.max_iterations = 6;
    const auto tail = train(spec, pr, data, cfg, static_cast<std::int64_t>(iter));
    std::remove(ckpt.c_str());

    std::vector<MetricsRow> stitched = head.metrics;
    stitched.insert(stitched.end(), tail.metrics.begin(), tail.metrics.end());
    const bool resume_ok = metrics_csv(stitched) == metrics_csv(r1.metrics);

    bool params_ok = true;
    for (std::size_t i = 0; i < p1.entries().size(); ++i) {
        if (p1.entries()[i].p.w.data != pr.entries()[i].p.w.data) params_ok = false;
    }
    set_max_threads(0);

    return {identical && resume_ok && params_ok,
            std::string("fixed-seed metrics bitwise identical: ") + (identical ? "yes" : "NO") +
                "; save->load->resume matches the uninterrupted run: " +
                (resume_ok && params_ok ? "yes" : "NO")};
}

// -------------------------------------------------------------------------
// criterion 7: im2col convolution equals the naive reference bitwise
// -------------------------------------------------------------------------

std::pair<bool, std::string> conv_oracle_equivalence() {
    Rng rng(701);
    int checked = 0;
    for (int t = 0; t < 50; ++t) {
        const int k = 1 + 2 * static_cast<int>(rng.below(3));
        const int s = 1 + static_cast<int>(rng.below(2));
        const int p = static_cast<int>(rng.below(3));
        const int cin = 1 + static_cast<int>(rng.below(4));
        const int cout = 1 + static_cast<int>(rng.below(5));
        ConvSpec spec{k, cin, cout, s, p, true};
        const std::int64_t h = k + rng.below(7);
        const std::int64_t w = k + rng.below(7);
        if (spec.out_extent(h) < 1 || spec.out_extent(w) < 1) {
            --t;
            continue;
        }
        const Tensor x = tensor_normal<float>(Shape{1 + rng.below(3), cin, h, w},
                                              0.0f, 1.0f, rng);
        LayerParamsT<float> params;
        params.w = tensor_normal<float>(Shape{cout, cin, k, k}, 0.0f, 1.0f, rng);
        params.b = tensor_normal<float>(Shape{1, cout, 1, 1}, 0.0f, 1.0f, rng);
        const Tensor fast = conv2d_forward(x, spec, params);
        const Tensor slow = naive_conv2d(x, spec, params);
        if (fast.data != slow.data) {
            return {false, "bitwise mismatch at instance " + std::to_string(t)};
        }
        ++checked;
    }
    return {checked >= 50, std::to_string(checked) + " randomized instances bitwise equal"};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli_path = argv[1];

    std::printf("ffnet acceptance suite\n");
    criterion("gradient correctness", gradient_correctness);
    criterion("architecture accounting", architecture_accounting);
    criterion("gradient path depth", path_depth_claim);
    criterion("gradient flow", gradient_flow);
    criterion("desk-scale training", desk_scale_training);
    criterion("determinism+persistence", determinism_persistence);
    criterion("conv oracle equivalence", conv_oracle_equivalence);

    std::printf("%d of 7 criteria passed\n", 7 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
