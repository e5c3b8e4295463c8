#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ffnet/data.hpp"

using namespace ffnet;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

struct FileGuard {
    std::string path;
    ~FileGuard() { std::remove(path.c_str()); }
};

// fixture: n records in the 1 + 3072 byte layout with deterministic bytes
std::vector<std::uint8_t> make_record_bytes(int n, int classes, unsigned seed = 1) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(static_cast<std::size_t>(n) * 3073);
    unsigned state = seed;
    auto next = [&state]() {
        state = state * 1664525u + 1013904223u;
        return static_cast<std::uint8_t>(state >> 24);
    };
    for (int i = 0; i < n; ++i) {
        bytes.push_back(static_cast<std::uint8_t>(i % classes));
        for (int j = 0; j < 3072; ++j) bytes.push_back(next());
    }
    return bytes;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("record loading") {
    FileGuard f{tmp_path("ffnet_records.bin")};
    const auto bytes = make_record_bytes(7, 10);
    write_bytes(f.path, bytes);

    const Dataset d = load_records(f.path, 10);
    CHECK(d.size() == 7);
    CHECK(d.class_count == 10);
    CHECK(d.images.shape == Shape{7, 3, 32, 32});
    for (int i = 0; i < 7; ++i) CHECK(d.labels[static_cast<std::size_t>(i)] == i % 10);

    // pixel scaling: first pixel of record 0 is bytes[1] / 255
    CHECK(d.images.data[0] == doctest::Approx(bytes[1] / 255.0f));
    // values stay in [0, 1]
    for (float v : d.images.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("record parsing is byte-exact under re-serialization") {
    FileGuard f{tmp_path("ffnet_records_rt.bin")};
    FileGuard f2{tmp_path("ffnet_records_rt2.bin")};
    const auto bytes = make_record_bytes(5, 10, 77);
    write_bytes(f.path, bytes);

    const Dataset d = load_records(f.path, 10);
    write_records(f2.path, d);
    CHECK(read_bytes(f2.path) == bytes);
}

TEST_CASE("record loader error paths") {
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_records(tmp_path("ffnet_missing.bin"), 10), io_error);
    }
    SUBCASE("truncated record") {
        FileGuard f{tmp_path("ffnet_trunc.bin")};
        auto bytes = make_record_bytes(1, 10);
        bytes.pop_back();  // 3072 bytes, one short
        write_bytes(f.path, bytes);
        CHECK_THROWS_AS(load_records(f.path, 10), format_error);
    }
    SUBCASE("label out of range") {
        FileGuard f{tmp_path("ffnet_badlabel.bin")};
        auto bytes = make_record_bytes(2, 10);
        bytes[0] = 11;
        write_bytes(f.path, bytes);
        CHECK_THROWS_AS(load_records(f.path, 10), label_error);
    }
}

TEST_CASE("cifar-10 directory loader") {
    const auto dir = std::filesystem::temp_directory_path() / "ffnet_cifar_fixture";
    std::filesystem::create_directories(dir);
    for (int b = 1; b <= 5; ++b) {
        write_bytes((dir / ("data_batch_" + std::to_string(b) + ".bin")).string(),
                    make_record_bytes(4, 10, static_cast<unsigned>(b)));
    }
    write_bytes((dir / "test_batch.bin").string(), make_record_bytes(3, 10, 99));

    const Cifar10 c = load_cifar10(dir.string());
    CHECK(c.train.size() == 20);
    CHECK(c.test.size() == 3);
    CHECK(c.train.class_count == 10);

    std::filesystem::remove_all(dir);
}

TEST_CASE("normalization") {
    SUBCASE("mean 0, std 1 is the identity") {
        Dataset d = synthetic_dataset(SyntheticKind::noise, 16, 10, 1);
        const auto before = d.images.data;
        Stats s;
        s.mean = {0.0, 0.0, 0.0};
        s.stddev = {1.0, 1.0, 1.0};
        normalize(d, s);
        CHECK(d.images.data == before);
    }
    SUBCASE("constant channel rejects its own stats") {
        Dataset d;
        d.class_count = 2;
        d.images = tensor_full<float>(Shape{4, 3, 32, 32}, 0.25f);
        d.labels = {0, 1, 0, 1};
        const Stats s = compute_stats(d);
        CHECK(s.stddev[0] == 0.0);
        CHECK_THROWS_AS(normalize(d, s), std::invalid_argument);
    }
    SUBCASE("renormalized statistics are zero mean, unit std") {
        Dataset d = synthetic_dataset(SyntheticKind::noise, 64, 10, 3);
        const Stats s = compute_stats(d);
        normalize(d, s);
        const Stats after = compute_stats(d);
        for (int c = 0; c < 3; ++c) {
            CHECK(std::fabs(after.mean[static_cast<std::size_t>(c)]) < 1e-6);
            CHECK(std::fabs(after.stddev[static_cast<std::size_t>(c)] - 1.0) < 1e-4);
        }
    }
}

TEST_CASE("augmentation") {
    const Dataset d = synthetic_dataset(SyntheticKind::noise, 12, 10, 5);
    const Tensor img = d.image(0);

    SUBCASE("shape preserved, values from the source or padding") {
        Rng rng(1);
        const Tensor a = augment(img, rng);
        CHECK(a.shape == img.shape);
    }
    SUBCASE("fixed seed gives identical output") {
        Rng r1(9), r2(9);
        CHECK(augment(img, r1).data == augment(img, r2).data);
    }
    SUBCASE("different draws eventually differ") {
        Rng rng(3);
        const Tensor first = augment(img, rng);
        bool changed = false;
        for (int i = 0; i < 16 && !changed; ++i) {
            changed = augment(img, rng).data != first.data;
        }
        CHECK(changed);
    }
}

TEST_CASE("ten-crop") {
    const Dataset d = synthetic_dataset(SyntheticKind::noise, 12, 10, 7);
    const Tensor img = d.image(1);
    const auto crops = ten_crop(img);
    REQUIRE(crops.size() == 10);
    for (const auto& c : crops) CHECK(c.shape == Shape{1, 3, 32, 32});

    // center crop of the padded image recovers the original
    CHECK(crops[4].data == img.data);
    // mirrored center crop equals the mirrored original
    CHECK(crops[9].data == flip_horizontal(img).data);

    // on an all-zero image every crop equals the original
    const Tensor zero(Shape{1, 3, 32, 32});
    for (const auto& c : ten_crop(zero)) CHECK(c.data == zero.data);
}

TEST_CASE("synthetic datasets") {
    SUBCASE("same seed, same dataset") {
        const Dataset a = synthetic_dataset(SyntheticKind::separable, 16, 2, 11);
        const Dataset b = synthetic_dataset(SyntheticKind::separable, 16, 2, 11);
        CHECK(a.images.data == b.images.data);
        CHECK(a.labels == b.labels);
    }
    SUBCASE("separable structure") {
        const Dataset d = synthetic_dataset(SyntheticKind::separable, 16, 2, 13);
        CHECK(d.size() == 16);
        CHECK(d.class_count == 2);
        for (int i = 0; i < 16; ++i) CHECK(d.labels[static_cast<std::size_t>(i)] == i % 2);
        for (float v : d.images.data) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
    SUBCASE("noise labels stay in range") {
        const Dataset d = synthetic_dataset(SyntheticKind::noise, 50, 10, 17);
        for (auto l : d.labels) {
            CHECK(l >= 0);
            CHECK(l < 10);
        }
    }
    SUBCASE("n below classes is rejected") {
        CHECK_THROWS_AS(synthetic_dataset(SyntheticKind::separable, 1, 2, 1),
                        std::invalid_argument);
    }
}

TEST_CASE("validation split") {
    const Dataset d = synthetic_dataset(SyntheticKind::noise, 10, 5, 19);
    const auto [head, tail] = split_validation(d, 3);
    CHECK(head.size() == 7);
    CHECK(tail.size() == 3);
    CHECK(tail.labels[0] == d.labels[7]);
    CHECK_THROWS_AS(split_validation(d, 10), std::invalid_argument);
}
