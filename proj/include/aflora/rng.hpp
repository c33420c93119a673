#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace aflora {

/// Deterministic seedable generator with 64-bit state (SplitMix64 core).
/// Streams are derived by hashing the root seed with a stream tag, never by
/// consuming parent state, so split order and draw order cannot interact:
/// rng.split(a).split(b) is a pure function of (seed, a, b). Every client,
/// round, and subsystem in the simulator draws from its own split stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(mix(seed)) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Child generator for an independent stream; does not advance this one.
    Rng split(std::uint64_t stream) const {
        return Rng(mix(seed_ ^ (0xD1B54A32D192ED03ULL * (stream + 0x632BE59BD9B4E019ULL))));
    }

    Rng split(std::uint64_t a, std::uint64_t b) const { return split(a).split(b); }
    Rng split(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
        return split(a).split(b).split(c);
    }

    /// Uniform double in [0, 1), 53 mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; second value of each pair is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        cached_ = radius * std::sin(angle);
        has_cached_ = true;
        return radius * std::cos(angle);
    }

    /// Unbiased integer in [0, bound); bound must be positive.
    std::uint64_t uniform_int(std::uint64_t bound) {
        const std::uint64_t threshold = (~std::uint64_t{0} / bound) * bound;
        std::uint64_t v = next_u64();
        while (v >= threshold) {
            v = next_u64();
        }
        return v % bound;
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    std::uint64_t seed() const { return seed_; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// Stream tags for the experiment-wide RNG tree. Kept in one place so tests
// can reconstruct any stream a run used.
namespace stream {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kParticipation = 3;
inline constexpr std::uint64_t kClient = 4;
inline constexpr std::uint64_t kServer = 5;
inline constexpr std::uint64_t kBaselineInit = 6;
}  // namespace stream

}  // namespace aflora
