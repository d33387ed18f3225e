#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace musgen {

uint64_t splitmix64(uint64_t x);
uint64_t fnv1a64(std::string_view s);

// Deterministic random source. mt19937_64 is fully specified by the
// standard; the variate helpers are hand-rolled so streams never depend
// on libstdc++ distribution internals.
class Rng {
  public:
    explicit Rng(uint64_t seed);

    double uniform();                     // [0, 1)
    double uniform(double lo, double hi); // [lo, hi)
    double normal();                      // standard normal (Marsaglia polar)
    uint64_t uniform_int(uint64_t n);     // [0, n), n >= 1

    // Independent child stream; depends only on the construction seed and
    // the stream id, not on how many draws were taken so far.
    Rng fork(uint64_t stream) const;

    uint64_t seed() const { return seed_; }

  private:
    uint64_t seed_;
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace musgen
