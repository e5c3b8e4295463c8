#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffnet/errors.hpp"
#include "ffnet/rng.hpp"
#include "ffnet/tensor.hpp"

namespace ffnet {

// per-channel pixel statistics, computed from a training split only
struct Stats {
    std::vector<double> mean;
    std::vector<double> stddev;  // population standard deviation
};

struct Dataset {
    Tensor images;                     // (n, c, h, w), values in [0,1] as loaded
    std::vector<std::int32_t> labels;  // class indices < class_count
    int class_count = 0;
    Stats stats;                       // statistics applied to this set, if any

    std::int64_t size() const { return images.shape.n; }
    // copy of sample i as (1, c, h, w)
    Tensor image(std::int64_t i) const;
};

struct Cifar10 {
    Dataset train;
    Dataset test;
};

// Binary record layout: 1 label byte + 1024 R + 1024 G + 1024 B bytes per
// 32x32 image; pixels are scaled by 1/255 on load.
// throws io_error (missing/unreadable file), format_error (size not a
// multiple of 3073), label_error (label byte >= class_count).
Dataset load_records(const std::string& path, int class_count);

// exact inverse of load_records: reproduces the source bytes
void write_records(const std::string& path, const Dataset& d);

// reads data_batch_{1..5}.bin and test_batch.bin from dir
Cifar10 load_cifar10(const std::string& dir);

Stats compute_stats(const Dataset& d);

// per-channel (x - mean) / stddev, in place; throws std::invalid_argument on
// non-finite stats or stddev <= 0
void normalize(Dataset& d, const Stats& s);

// training-time augmentation: zero-pad by 4, random crop back to the original
// extent, then a 50% horizontal flip. image is (1, c, h, w).
Tensor augment(const Tensor& image, Rng& rng);

// deterministic evaluation crops: 4 corners + center of the 4-pixel
// zero-padded image at the original extent, plus their horizontal mirrors
std::vector<Tensor> ten_crop(const Tensor& image);

enum class SyntheticKind { separable, noise };

// separable: class-dependent constant-pattern 3x32x32 images with slight
// pixel noise, labels round-robin; noise: uniform pixels, uniform labels.
// requires n >= classes.
Dataset synthetic_dataset(SyntheticKind kind, std::int64_t n, int classes,
                          std::uint64_t seed);

// holds out the last `holdout` samples as a validation split
std::pair<Dataset, Dataset> split_validation(const Dataset& d, std::int64_t holdout);

}  // namespace ffnet
