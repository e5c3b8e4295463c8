#include "ffnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ffnet/layers.hpp"

namespace ffnet {

namespace {
// stream ids for deterministic rng derivation
constexpr std::uint64_t kEpochStream = 0xE70C;
constexpr std::uint64_t kSampleStream = 0x5A3B;

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}
}  // namespace

double TrainConfig::lr_at(std::int64_t iteration) const {
    if (schedule == LrSchedule::fixed) return lr;
    double v = lr;
    for (std::int64_t s = 0; s < iteration / step_size; ++s) v *= gamma;
    return v;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) {
        throw std::invalid_argument("momentum must be in [0, 1)");
    }
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
    if (max_iterations < 0) throw std::invalid_argument("max_iterations must be >= 0");
    if (schedule == LrSchedule::step && step_size < 1) {
        throw std::invalid_argument("step_size must be >= 1");
    }
}

void sgd_step(ParamStore& params, const TrainConfig& cfg, std::int64_t iteration) {
    const float lr = static_cast<float>(cfg.lr_at(iteration));
    const float mu = static_cast<float>(cfg.momentum);
    const float wd = static_cast<float>(cfg.weight_decay);
    for (auto& e : params.entries()) {
        auto update = [&](Tensor& w, Tensor& g, Tensor& v) {
            for (std::size_t i = 0; i < w.data.size(); ++i) {
                v.data[i] = mu * v.data[i] - lr * (g.data[i] + wd * w.data[i]);
                w.data[i] += v.data[i];
            }
            g.fill(0.0f);
        };
        update(e.p.w, e.g.w, e.m.w);
        update(e.p.b, e.g.b, e.m.b);
    }
}

namespace {

// epoch permutation derived from (seed, epoch); cached between iterations
struct BatchSampler {
    const Dataset& data;
    std::uint64_t seed;
    std::int64_t epoch = -1;
    std::vector<std::int64_t> perm;

    std::int64_t index_at(std::int64_t global_sample) {
        const std::int64_t n = data.size();
        const std::int64_t e = global_sample / n;
        if (e != epoch) {
            epoch = e;
            perm.resize(static_cast<std::size_t>(n));
            std::iota(perm.begin(), perm.end(), std::int64_t(0));
            Rng rng = derive_rng(seed, kEpochStream, static_cast<std::uint64_t>(e));
            for (std::int64_t i = n - 1; i > 0; --i) {
                std::swap(perm[static_cast<std::size_t>(i)],
                          perm[static_cast<std::size_t>(rng.below(i + 1))]);
            }
        }
        return perm[static_cast<std::size_t>(global_sample % n)];
    }
};

double batch_accuracy(const Tensor& logits, const std::vector<std::int32_t>& labels) {
    const auto pred = predict_labels(logits);
    std::int64_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == labels[i]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace

std::vector<std::int32_t> predict_labels(const Tensor& logits) {
    const std::int64_t n = logits.shape.n, k = logits.shape.c;
    std::vector<std::int32_t> pred(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const float* row = logits.ptr() + i * k;
        std::int32_t best = 0;
        for (std::int64_t j = 1; j < k; ++j) {
            if (row[j] > row[best]) best = static_cast<std::int32_t>(j);  // ties keep the lowest index
        }
        pred[static_cast<std::size_t>(i)] = best;
    }
    return pred;
}

TrainResult train(const NetworkSpec& spec, ParamStore& params, const Dataset& data,
                  const TrainConfig& cfg, std::int64_t start_iteration,
                  const Dataset* val) {
    cfg.validate();
    if (data.size() < 1) throw std::invalid_argument("train: dataset is empty");
    if (data.images.shape.c != spec.in_c || data.images.shape.h != spec.in_h ||
        data.images.shape.w != spec.in_w) {
        throw std::invalid_argument("train: dataset sample shape does not match spec input");
    }

    TrainResult result;
    BatchSampler sampler{data, cfg.seed};
    const std::int64_t sample_elems =
        static_cast<std::int64_t>(spec.in_c) * spec.in_h * spec.in_w;
    Tensor batch(Shape{cfg.batch_size, spec.in_c, spec.in_h, spec.in_w});
    std::vector<std::int32_t> labels(static_cast<std::size_t>(cfg.batch_size));
    ForwardTraceT<float> trace;

    for (std::int64_t iter = start_iteration; iter < cfg.max_iterations; ++iter) {
        for (int j = 0; j < cfg.batch_size; ++j) {
            const std::int64_t g = iter * cfg.batch_size + j;
            const std::int64_t idx = sampler.index_at(g);
            Tensor img = data.image(idx);
            if (cfg.augment) {
                Rng rng = derive_rng(cfg.seed, kSampleStream, static_cast<std::uint64_t>(g));
                img = augment(img, rng);
            }
            std::memcpy(batch.ptr() + j * sample_elems, img.ptr(),
                        sizeof(float) * static_cast<std::size_t>(sample_elems));
            labels[static_cast<std::size_t>(j)] = data.labels[static_cast<std::size_t>(idx)];
        }

        const Tensor logits = forward(spec, params, batch, &trace);
        const auto xent = softmax_xent(logits, labels);
        backward(spec, params, trace, xent.grad_logits);
        sgd_step(params, cfg, iter);

        const std::int64_t done = iter + 1;
        if (cfg.eval_interval > 0 && done % cfg.eval_interval == 0) {
            result.metrics.push_back({done, "train", static_cast<double>(xent.loss),
                                      batch_accuracy(logits, labels)});
            if (val != nullptr) {
                const EvalResult ev = evaluate(spec, params, *val, false);
                result.metrics.push_back({done, "val", ev.loss, ev.accuracy});
            }
        }
    }
    return result;
}

EvalResult evaluate(const NetworkSpec& spec, const ParamStore& params,
                    const Dataset& data, bool ten_crop_mode, int batch_size) {
    const std::int64_t n = data.size();
    if (n < 1) throw std::invalid_argument("evaluate: dataset is empty");

    double loss_sum = 0.0;
    std::int64_t hits = 0;

    if (!ten_crop_mode) {
        const std::int64_t sample = data.images.shape.c * data.images.shape.h * data.images.shape.w;
        for (std::int64_t at = 0; at < n; at += batch_size) {
            const std::int64_t m = std::min<std::int64_t>(batch_size, n - at);
            Tensor chunk(Shape{m, data.images.shape.c, data.images.shape.h, data.images.shape.w});
            std::memcpy(chunk.ptr(), data.images.ptr() + at * sample,
                        sizeof(float) * static_cast<std::size_t>(m * sample));
            std::vector<std::int32_t> labels(data.labels.begin() + at,
                                             data.labels.begin() + at + m);
            const Tensor logits = forward(spec, params, chunk);
            const auto xent = softmax_xent(logits, labels);
            loss_sum += static_cast<double>(xent.loss) * static_cast<double>(m);
            const auto pred = predict_labels(logits);
            for (std::int64_t j = 0; j < m; ++j) {
                if (pred[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(j)]) {
                    ++hits;
                }
            }
        }
    } else {
        // 10 crops per image, probabilities averaged before the argmax
        for (std::int64_t i = 0; i < n; ++i) {
            const auto crops = ten_crop(data.image(i));
            Tensor pack(Shape{static_cast<std::int64_t>(crops.size()), data.images.shape.c,
                              data.images.shape.h, data.images.shape.w});
            const std::int64_t sample = pack.shape.c * pack.shape.h * pack.shape.w;
            for (std::size_t c = 0; c < crops.size(); ++c) {
                std::memcpy(pack.ptr() + static_cast<std::int64_t>(c) * sample,
                            crops[c].ptr(), sizeof(float) * static_cast<std::size_t>(sample));
            }
            const Tensor probs = softmax(forward(spec, params, pack));
            const std::int64_t k = probs.shape.c;
            std::vector<double> avg(static_cast<std::size_t>(k), 0.0);
            for (std::int64_t c = 0; c < probs.shape.n; ++c) {
                for (std::int64_t j = 0; j < k; ++j) {
                    avg[static_cast<std::size_t>(j)] += probs.ptr()[c * k + j];
                }
            }
            for (auto& v : avg) v /= static_cast<double>(probs.shape.n);

            std::int64_t best = 0;
            for (std::int64_t j = 1; j < k; ++j) {
                if (avg[static_cast<std::size_t>(j)] > avg[static_cast<std::size_t>(best)]) {
                    best = j;
                }
            }
            const std::int32_t label = data.labels[static_cast<std::size_t>(i)];
            if (best == label) ++hits;
            loss_sum += -std::log(std::max(avg[static_cast<std::size_t>(label)], 1e-300));
        }
    }
    return {loss_sum / static_cast<double>(n),
            static_cast<double>(hits) / static_cast<double>(n)};
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out = "iteration,split,loss,accuracy\n";
    for (const auto& r : rows) {
        out += std::to_string(r.iteration) + "," + r.split + "," + fmt_g(r.loss) + "," +
               fmt_g(r.accuracy) + "\n";
    }
    return out;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    const std::string text = metrics_csv(rows);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw io_error("write failed for '" + path + "'");
}

}  // namespace ffnet
