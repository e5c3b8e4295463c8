#pragma once

#include <cstdint>
#include <random>

namespace ffnet {

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is pinned by the C++ standard, and normal variates come from the
// Marsaglia polar transform implemented here, so a given seed yields the same
// stream everywhere (libm-correctly-rounded sqrt/log assumed).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n), n > 0
    std::int64_t below(std::int64_t n);

    // gaussian via the polar method; second variate of each pair is cached
    double normal(double mean = 0.0, double stddev = 1.0);

    bool coin() { return (eng_() >> 63) != 0; }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// mixes a base seed with up to three stream identifiers (splitmix64 finalizer);
// gives loops, samples and epochs independent deterministic streams
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

inline Rng derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0) {
    return Rng(mix_seed(seed, a, b, c));
}

}  // namespace ffnet
