#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "regimeml/common.hpp"

namespace regimeml {

namespace detail {
// SplitMix64 finalizer; used for seeding and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Deterministic random stream. One root seed drives the whole run; child
/// streams are derived by index so parallel replications never share state.
/// Gaussian draws use Box-Muller on raw 53-bit uniforms, so sequences do not
/// depend on standard-library distribution internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        engine_.seed(detail::splitmix64(s));
    }

    std::uint64_t seed() const { return seed_; }

    /// Independent stream for replication/worker `index`.
    Rng child(std::uint64_t index) const {
        std::uint64_t s = seed_ ^ (0xA3C59AC2ULL + index * 0x9E3779B97F4A7C15ULL);
        std::uint64_t mixed = detail::splitmix64(s);
        return Rng(detail::splitmix64(mixed) ^ (index + 1));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1); never returns 0 (safe under log).
    double uniform_pos() {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return u;
    }

    /// Uniform integer in {0, ..., n-1}; n must be positive.
    std::int64_t uniform_int(std::int64_t n) {
        auto un = static_cast<std::uint64_t>(n);
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::int64_t>(x % un);
    }

    /// Standard normal draw (Box-Muller, spare cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform_pos();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = kTwoPi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace regimeml
