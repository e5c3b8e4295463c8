#include "ffnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace ffnet {

namespace {
constexpr std::int64_t kImageBytes = 3072;  // 3 x 32 x 32
constexpr std::int64_t kRecordBytes = kImageBytes + 1;
constexpr int kPad = 4;  // augmentation / ten-crop padding
}  // namespace

Tensor Dataset::image(std::int64_t i) const {
    const Shape s{1, images.shape.c, images.shape.h, images.shape.w};
    Tensor out(s);
    std::memcpy(out.ptr(), images.ptr() + i * s.elems(),
                sizeof(float) * static_cast<std::size_t>(s.elems()));
    return out;
}

Dataset load_records(const std::string& path, int class_count) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open '" + path + "'");
    is.seekg(0, std::ios::end);
    const std::int64_t bytes = static_cast<std::int64_t>(is.tellg());
    is.seekg(0);
    if (bytes <= 0 || bytes % kRecordBytes != 0) {
        throw format_error("'" + path + "': size " + std::to_string(bytes) +
                           " is not a multiple of " + std::to_string(kRecordBytes));
    }
    const std::int64_t n = bytes / kRecordBytes;

    Dataset d;
    d.class_count = class_count;
    d.images = Tensor(Shape{n, 3, 32, 32});
    d.labels.resize(static_cast<std::size_t>(n));

    std::vector<std::uint8_t> rec(static_cast<std::size_t>(kRecordBytes));
    for (std::int64_t i = 0; i < n; ++i) {
        is.read(reinterpret_cast<char*>(rec.data()), kRecordBytes);
        if (is.gcount() != kRecordBytes) throw io_error("'" + path + "': short read");
        const int label = rec[0];
        if (label >= class_count) {
            throw label_error("'" + path + "': record " + std::to_string(i) +
                              " has label " + std::to_string(label) + " >= " +
                              std::to_string(class_count));
        }
        d.labels[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(label);
        float* img = d.images.ptr() + i * kImageBytes;
        for (std::int64_t j = 0; j < kImageBytes; ++j) {
            img[j] = static_cast<float>(rec[static_cast<std::size_t>(j + 1)]) * (1.0f / 255.0f);
        }
    }
    return d;
}

void write_records(const std::string& path, const Dataset& d) {
    if (d.images.shape.c != 3 || d.images.shape.h != 32 || d.images.shape.w != 32) {
        throw std::invalid_argument("write_records: dataset is not in 3x32x32 layout");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    std::vector<std::uint8_t> rec(static_cast<std::size_t>(kRecordBytes));
    for (std::int64_t i = 0; i < d.size(); ++i) {
        rec[0] = static_cast<std::uint8_t>(d.labels[static_cast<std::size_t>(i)]);
        const float* img = d.images.ptr() + i * kImageBytes;
        for (std::int64_t j = 0; j < kImageBytes; ++j) {
            // inverse of the 1/255 scaling; exact for byte-derived values
            rec[static_cast<std::size_t>(j + 1)] =
                static_cast<std::uint8_t>(std::lround(img[j] * 255.0f));
        }
        os.write(reinterpret_cast<const char*>(rec.data()), kRecordBytes);
    }
    if (!os) throw io_error("write failed for '" + path + "'");
}

Cifar10 load_cifar10(const std::string& dir) {
    namespace fs = std::filesystem;
    Cifar10 out;
    bool first = true;
    for (int b = 1; b <= 5; ++b) {
        const std::string path = (fs::path(dir) / ("data_batch_" + std::to_string(b) + ".bin")).string();
        Dataset part = load_records(path, 10);
        if (first) {
            out.train = std::move(part);
            first = false;
        } else {
            // append
            Tensor merged(Shape{out.train.size() + part.size(), 3, 32, 32});
            std::memcpy(merged.ptr(), out.train.images.ptr(),
                        sizeof(float) * out.train.images.data.size());
            std::memcpy(merged.ptr() + out.train.images.size(), part.images.ptr(),
                        sizeof(float) * part.images.data.size());
            out.train.images = std::move(merged);
            out.train.labels.insert(out.train.labels.end(), part.labels.begin(),
                                    part.labels.end());
        }
    }
    out.test = load_records((fs::path(dir) / "test_batch.bin").string(), 10);
    return out;
}

Stats compute_stats(const Dataset& d) {
    const std::int64_t c = d.images.shape.c;
    const std::int64_t plane = d.images.shape.h * d.images.shape.w;
    const std::int64_t n = d.size();
    Stats s;
    s.mean.assign(static_cast<std::size_t>(c), 0.0);
    s.stddev.assign(static_cast<std::size_t>(c), 0.0);
    for (std::int64_t ic = 0; ic < c; ++ic) {
        double sum = 0.0, sq = 0.0;
        for (std::int64_t in = 0; in < n; ++in) {
            const float* p = d.images.ptr() + (in * c + ic) * plane;
            for (std::int64_t j = 0; j < plane; ++j) {
                sum += p[j];
                sq += static_cast<double>(p[j]) * p[j];
            }
        }
        const double cnt = static_cast<double>(n * plane);
        const double mean = sum / cnt;
        const double var = std::max(0.0, sq / cnt - mean * mean);
        s.mean[static_cast<std::size_t>(ic)] = mean;
        s.stddev[static_cast<std::size_t>(ic)] = std::sqrt(var);
    }
    return s;
}

void normalize(Dataset& d, const Stats& s) {
    const std::int64_t c = d.images.shape.c;
    if (static_cast<std::int64_t>(s.mean.size()) != c ||
        static_cast<std::int64_t>(s.stddev.size()) != c) {
        throw std::invalid_argument("normalize: stats channel count mismatch");
    }
    for (std::int64_t ic = 0; ic < c; ++ic) {
        const double m = s.mean[static_cast<std::size_t>(ic)];
        const double sd = s.stddev[static_cast<std::size_t>(ic)];
        if (!std::isfinite(m) || !std::isfinite(sd) || sd <= 0.0) {
            throw std::invalid_argument("normalize: channel " + std::to_string(ic) +
                                        " has unusable stddev " + std::to_string(sd));
        }
    }
    const std::int64_t plane = d.images.shape.h * d.images.shape.w;
    for (std::int64_t in = 0; in < d.size(); ++in) {
        for (std::int64_t ic = 0; ic < c; ++ic) {
            float* p = d.images.ptr() + (in * c + ic) * plane;
            const float m = static_cast<float>(s.mean[static_cast<std::size_t>(ic)]);
            const float sd = static_cast<float>(s.stddev[static_cast<std::size_t>(ic)]);
            for (std::int64_t j = 0; j < plane; ++j) p[j] = (p[j] - m) / sd;
        }
    }
    d.stats = s;
}

namespace {
// zero-pad by kPad on all sides
Tensor pad_image(const Tensor& image) {
    const Shape s = image.shape;
    Tensor padded(Shape{s.n, s.c, s.h + 2 * kPad, s.w + 2 * kPad});
    for (std::int64_t ic = 0; ic < s.c; ++ic) {
        for (std::int64_t ih = 0; ih < s.h; ++ih) {
            std::memcpy(&padded.at(0, ic, ih + kPad, kPad), &image.at(0, ic, ih, 0),
                        sizeof(float) * static_cast<std::size_t>(s.w));
        }
    }
    return padded;
}
}  // namespace

Tensor augment(const Tensor& image, Rng& rng) {
    const Tensor padded = pad_image(image);
    const std::int64_t top = rng.below(2 * kPad + 1);
    const std::int64_t left = rng.below(2 * kPad + 1);
    Tensor out = crop(padded, top, left, image.shape.h, image.shape.w);
    if (rng.coin()) out = flip_horizontal(out);
    return out;
}

std::vector<Tensor> ten_crop(const Tensor& image) {
    const Tensor padded = pad_image(image);
    const std::int64_t h = image.shape.h, w = image.shape.w;
    const std::int64_t offsets[5][2] = {
        {0, 0}, {0, 2 * kPad}, {2 * kPad, 0}, {2 * kPad, 2 * kPad}, {kPad, kPad}};
    std::vector<Tensor> crops;
    crops.reserve(10);
    for (const auto& off : offsets) {
        crops.push_back(crop(padded, off[0], off[1], h, w));
    }
    for (int i = 0; i < 5; ++i) {
        crops.push_back(flip_horizontal(crops[static_cast<std::size_t>(i)]));
    }
    return crops;
}

Dataset synthetic_dataset(SyntheticKind kind, std::int64_t n, int classes,
                          std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("synthetic_dataset: need >= 2 classes");
    if (n < classes) throw std::invalid_argument("synthetic_dataset: need n >= classes");

    Dataset d;
    d.class_count = classes;
    d.images = Tensor(Shape{n, 3, 32, 32});
    d.labels.resize(static_cast<std::size_t>(n));
    Rng rng(mix_seed(seed, 0x5D47));

    const std::int64_t plane = 32 * 32;
    for (std::int64_t i = 0; i < n; ++i) {
        if (kind == SyntheticKind::separable) {
            const int label = static_cast<int>(i % classes);
            d.labels[static_cast<std::size_t>(i)] = label;
            for (std::int64_t c = 0; c < 3; ++c) {
                // class-dependent constant level, staggered per channel
                const double level =
                    (static_cast<double>((label + c) % classes) + 1.0) / (classes + 1.0);
                float* p = d.images.ptr() + (i * 3 + c) * plane;
                for (std::int64_t j = 0; j < plane; ++j) {
                    const double noisy = level + 0.02 * rng.normal();
                    p[j] = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
                }
            }
        } else {
            d.labels[static_cast<std::size_t>(i)] =
                static_cast<std::int32_t>(rng.below(classes));
            float* p = d.images.ptr() + i * 3 * plane;
            for (std::int64_t j = 0; j < 3 * plane; ++j) {
                p[j] = static_cast<float>(rng.uniform());
            }
        }
    }
    return d;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& d, std::int64_t holdout) {
    if (holdout < 1 || holdout >= d.size()) {
        throw std::invalid_argument("split_validation: holdout must be in [1, n)");
    }
    const std::int64_t keep = d.size() - holdout;
    const std::int64_t sample = d.images.shape.c * d.images.shape.h * d.images.shape.w;

    Dataset head, tail;
    head.class_count = tail.class_count = d.class_count;
    head.stats = tail.stats = d.stats;
    head.images = Tensor(Shape{keep, d.images.shape.c, d.images.shape.h, d.images.shape.w});
    tail.images = Tensor(Shape{holdout, d.images.shape.c, d.images.shape.h, d.images.shape.w});
    std::memcpy(head.images.ptr(), d.images.ptr(),
                sizeof(float) * static_cast<std::size_t>(keep * sample));
    std::memcpy(tail.images.ptr(), d.images.ptr() + keep * sample,
                sizeof(float) * static_cast<std::size_t>(holdout * sample));
    head.labels.assign(d.labels.begin(), d.labels.begin() + keep);
    tail.labels.assign(d.labels.begin() + keep, d.labels.end());
    return {std::move(head), std::move(tail)};
}

}  // namespace ffnet
