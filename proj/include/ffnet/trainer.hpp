#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffnet/data.hpp"
#include "ffnet/graph.hpp"

namespace ffnet {

enum class LrSchedule { fixed, step };

struct TrainConfig {
    int batch_size = 32;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::int64_t max_iterations = 0;
    std::int64_t eval_interval = 100;
    std::uint64_t seed = 1;
    bool augment = true;
    LrSchedule schedule = LrSchedule::fixed;
    double gamma = 0.1;             // step schedule decay factor
    std::int64_t step_size = 100000;

    double lr_at(std::int64_t iteration) const;
    void validate() const;  // throws std::invalid_argument
};

struct MetricsRow {
    std::int64_t iteration;
    std::string split;  // "train" or "val"
    double loss;
    double accuracy;
};

// v <- momentum * v - lr * (g + weight_decay * w); w <- w + v; gradients are
// cleared afterwards. lr comes from cfg.lr_at(iteration).
void sgd_step(ParamStore& params, const TrainConfig& cfg, std::int64_t iteration);

struct TrainResult {
    std::vector<MetricsRow> metrics;
};

// Runs forward/backward/sgd_step for iterations [start_iteration,
// cfg.max_iterations). One batch is one iteration. Batch order comes from a
// per-epoch permutation derived from (seed, epoch) and augmentation from
// (seed, global sample index), so a resumed run continues bit-exactly from
// (seed, iteration) alone. Logs a train row (batch loss/accuracy before the
// update) every eval_interval iterations, plus a val row when `val` is given.
TrainResult train(const NetworkSpec& spec, ParamStore& params, const Dataset& data,
                  const TrainConfig& cfg, std::int64_t start_iteration = 0,
                  const Dataset* val = nullptr);

struct EvalResult {
    double loss;
    double accuracy;
};

// plain mode: one pass over the images as-is. ten-crop mode: average the 10
// softmax probability vectors per image, then argmax; loss is -log of the
// averaged probability at the label. ties break toward the lowest class index.
EvalResult evaluate(const NetworkSpec& spec, const ParamStore& params,
                    const Dataset& data, bool ten_crop_mode, int batch_size = 64);

// argmax per row with lowest-index tie break
std::vector<std::int32_t> predict_labels(const Tensor& logits);

// header "iteration,split,loss,accuracy", one row per event, LF endings
std::string metrics_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

}  // namespace ffnet
