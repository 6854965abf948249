#ifndef MAXOUTLAB_PRNG_HPP
#define MAXOUTLAB_PRNG_HPP

#include <cmath>
#include <cstdint>

namespace maxoutlab {

/// Deterministic 64-bit generator: xoshiro256++ seeded through splitmix64.
///
/// The full generator identity is (seed, stream_id).  Substreams are derived
/// by hashing, never by jumping, so any (seed, stream) pair can be
/// reconstructed without consuming the parent's state:
///
///     substream state = splitmix64 sequence over
///         seed ^ splitmix64(stream_id * 0x9E3779B97F4A7C15)
///
/// Identical (seed, stream_id, call sequence) gives identical output on any
/// platform; no libc or std::distribution is involved.
class Prng {
public:
    static constexpr const char* kAlgorithm = "xoshiro256++/splitmix64";

    explicit Prng(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_(stream_id) {
        std::uint64_t x = seed ^ splitmix64_once(stream_id * 0x9E3779B97F4A7C15ULL);
        for (auto& w : state_) w = splitmix64_next(x);
        // xoshiro must not start from the all-zero state
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    /// Independent child generator; the parent's state is untouched.
    Prng split(std::uint64_t substream_id) const {
        return Prng(seed_, splitmix64_once(stream_ ^ (substream_id + 0x632BE59BD9B4E019ULL)));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53 bits of mantissa.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; two uniforms consumed per call.
    double normal() {
        double u1 = uniform();
        while (u1 == 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Unbiased integer in [0, n), rejection sampled.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    static std::uint64_t splitmix64_next(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t splitmix64_once(std::uint64_t x) { return splitmix64_next(x); }

    std::uint64_t state_[4];
    std::uint64_t seed_;
    std::uint64_t stream_;
};

} // namespace maxoutlab

#endif
