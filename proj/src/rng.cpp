#include "musgen/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace musgen {

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

Rng::Rng(uint64_t seed) : seed_(seed), eng_(seed) {}

double Rng::uniform() {
    // 53 random bits -> double in [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
}

uint64_t Rng::uniform_int(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::uniform_int: n must be >= 1");
    // Modulo bias is < n / 2^64, far below anything our tests can resolve.
    return eng_() % n;
}

Rng Rng::fork(uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x51ED2701)));
}

}  // namespace musgen
