#include "ffnet/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace ffnet {

std::int64_t Rng::below(std::int64_t n) {
    if (n <= 0) throw std::invalid_argument("Rng::below: n must be positive");
    // multiply-shift range reduction (Lemire), no floating point involved
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(eng_()) * static_cast<unsigned __int128>(n);
    return static_cast<std::int64_t>(wide >> 64);
}

double Rng::normal(double mean, double stddev) {
    if (has_spare_) {
        has_spare_ = false;
        return mean + stddev * spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return mean + stddev * (u * f);
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}
}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
    std::uint64_t x = splitmix64(seed ^ 0xD1B54A32D192ED03ull);
    x = splitmix64(x ^ a);
    x = splitmix64(x ^ b);
    x = splitmix64(x ^ c);
    return x;
}

}  // namespace ffnet
