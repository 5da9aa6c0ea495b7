#ifndef GLNS_RNG_HPP
#define GLNS_RNG_HPP

#include <array>
#include <cstdint>
#include <span>
#include <utility>

namespace glns {

/// SplitMix64 step. Used for seeding and for deriving independent streams.
std::uint64_t splitmix64(std::uint64_t& state);

/// Mixes a seed with stream identifiers into a new 64-bit seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/**
 * Portable pseudo-random generator: xoshiro256** seeded through SplitMix64.
 *
 * Every draw goes through the member functions below (no std::*_distribution),
 * so a given seed produces the same stream on every platform and compiler.
 */
class Rng {
public:
    using State = std::array<std::uint64_t, 4>;

    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi);

    /// Uniform integer in the closed range [lo, hi]. Requires lo <= hi.
    long long uniform_int(long long lo, long long hi);

    /// Uniform index in [0, n). Requires n > 0.
    std::size_t index(std::size_t n);

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Roulette draw: index i with probability w_i / sum(w). Weights must be >= 0 with a positive sum.
    std::size_t weighted_index(std::span<const double> weights);

    /// Child generator whose stream depends on this generator's seed and the stream id, not on its position.
    Rng split(std::uint64_t stream) const;

    const State& state() const { return state_; }
    void set_state(const State& state) { state_ = state; }
    std::uint64_t seed() const { return seed_; }

private:
    State state_{};
    std::uint64_t seed_ = 0;
};

}  // namespace glns

#endif
