#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <stdexcept>

#include "ffnet/rng.hpp"
#include "ffnet/tensor.hpp"

using namespace ffnet;

TEST_CASE("constant fills") {
    Tensor z(Shape{1, 3, 32, 32});
    CHECK(z.size() == 3072);
    for (float v : z.data) CHECK(v == 0.0f);

    const Tensor t = tensor_full<float>(Shape{2, 1, 1, 1}, 7.5f);
    CHECK(t.data[0] == 7.5f);
    CHECK(t.data[1] == 7.5f);
}

TEST_CASE("normal fill is seed-reproducible bitwise") {
    Rng a(42), b(42);
    const Tensor ta = tensor_normal<float>(Shape{1, 1, 2, 2}, 0.0f, 1.0f, a);
    const Tensor tb = tensor_normal<float>(Shape{1, 1, 2, 2}, 0.0f, 1.0f, b);
    CHECK(ta.data == tb.data);

    Rng c(43);
    const Tensor tc = tensor_normal<float>(Shape{1, 1, 2, 2}, 0.0f, 1.0f, c);
    CHECK(ta.data != tc.data);
}

TEST_CASE("shape validation") {
    CHECK_THROWS_AS(Tensor(Shape{0, 1, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor(Shape{1, -2, 4, 4}), std::invalid_argument);
    // element count overflow
    const std::int64_t big = std::int64_t(1) << 62;
    CHECK_THROWS_AS(validate_shape(Shape{big, big, 2, 2}), std::invalid_argument);
}

TEST_CASE("concat_channels") {
    SUBCASE("shapes") {
        const Tensor a(Shape{1, 64, 28, 28}), b(Shape{1, 64, 28, 28});
        const Tensor c = concat_channels(a, b);
        CHECK(c.shape == Shape{1, 128, 28, 28});
    }
    SUBCASE("copy semantics") {
        Tensor a(Shape{1, 1, 2, 2}), b(Shape{1, 1, 2, 2});
        a.data = {1, 2, 3, 4};
        b.data = {5, 6, 7, 8};
        const Tensor c = concat_channels(a, b);
        CHECK(c.data == std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8});
    }
    SUBCASE("spatial mismatch") {
        const Tensor a(Shape{1, 64, 28, 28}), b(Shape{1, 64, 27, 28});
        CHECK_THROWS_AS(concat_channels(a, b), std::invalid_argument);
    }
    SUBCASE("batch mismatch") {
        const Tensor a(Shape{2, 4, 3, 3}), b(Shape{1, 4, 3, 3});
        CHECK_THROWS_AS(concat_channels(a, b), std::invalid_argument);
    }
}

TEST_CASE("concat then slice recovers both inputs bitwise") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const Shape sa{1 + rng.below(3), 1 + rng.below(5), 1 + rng.below(6), 1 + rng.below(6)};
        const Shape sb{sa.n, 1 + rng.below(5), sa.h, sa.w};
        Tensor a = tensor_normal<float>(sa, 0.0f, 1.0f, rng);
        Tensor b = tensor_normal<float>(sb, 0.0f, 1.0f, rng);
        const Tensor c = concat_channels(a, b);
        CHECK(slice_channels(c, 0, sa.c).data == a.data);
        CHECK(slice_channels(c, sa.c, sa.c + sb.c).data == b.data);
    }
}

TEST_CASE("crop") {
    SUBCASE("identity") {
        Rng rng(1);
        const Tensor t = tensor_normal<float>(Shape{2, 3, 5, 4}, 0.0f, 1.0f, rng);
        const Tensor c = crop(t, 0, 0, 5, 4);
        CHECK(c.data == t.data);
    }
    SUBCASE("window values") {
        Tensor t(Shape{1, 1, 3, 3});
        t.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
        const Tensor c = crop(t, 1, 1, 2, 2);
        CHECK(c.data == std::vector<float>{5, 6, 8, 9});
    }
    SUBCASE("out of bounds") {
        const Tensor t(Shape{1, 1, 3, 3});
        CHECK_THROWS_AS(crop(t, 2, 0, 2, 2), std::out_of_range);
        CHECK_THROWS_AS(crop(t, 0, 2, 2, 2), std::out_of_range);
    }
}

TEST_CASE("flip_horizontal is an involution") {
    Rng rng(5);
    const Tensor t = tensor_normal<float>(Shape{2, 3, 4, 7}, 0.0f, 1.0f, rng);
    CHECK(flip_horizontal(flip_horizontal(t)).data == t.data);
}

TEST_CASE("rng streams") {
    SUBCASE("same seed same sequence") {
        Rng a(123), b(123);
        for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    }
    SUBCASE("below stays in range") {
        Rng rng(9);
        for (int i = 0; i < 1000; ++i) {
            const auto v = rng.below(7);
            CHECK(v >= 0);
            CHECK(v < 7);
        }
    }
    SUBCASE("derived streams differ") {
        CHECK(mix_seed(1, 2) != mix_seed(1, 3));
        CHECK(mix_seed(1, 2, 3) != mix_seed(1, 2, 4));
    }
}
