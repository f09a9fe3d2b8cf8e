// Counter-based Gaussian noise keyed by (seed, stream, step, channel).
//
// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as
// 1, 2, 3"). Every draw is a pure function of its key, so trajectory j's
// noise does not depend on how many trajectories exist or on the order in
// which they are generated.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mtll {

/// Noise channels. Particle noise never aliases the observation channel.
enum class Channel : std::uint32_t {
    State = 0,
    Observation = 1,
    ParticleState = 2,
};

namespace detail {

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

// (0, 1], 53 bits.
inline double to_unit_open0(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits =
        ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

} // namespace detail

/// Stateless keyed generator. Cheap to copy; holds only the seed.
class KeyedNormal {
public:
    explicit KeyedNormal(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Standard normal for (stream, step, channel).
    double operator()(std::uint64_t stream, std::uint64_t step,
                      Channel channel) const {
        const auto out = raw(stream, step, channel);
        const double u1 = detail::to_unit_open0(out[0], out[1]);
        const double u2 = detail::to_unit_open0(out[2], out[3]);
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    std::array<std::uint32_t, 4> raw(std::uint64_t stream, std::uint64_t step,
                                     Channel channel) const {
        // Stream keeps 32 bits in the counter; the upper half folds into
        // the key so streams >= 2^32 still get distinct sequences.
        const std::array<std::uint32_t, 4> ctr{
            static_cast<std::uint32_t>(step),
            static_cast<std::uint32_t>(step >> 32),
            static_cast<std::uint32_t>(stream),
            static_cast<std::uint32_t>(channel)};
        const std::array<std::uint32_t, 2> key{
            static_cast<std::uint32_t>(seed_),
            static_cast<std::uint32_t>(seed_ >> 32) ^
                static_cast<std::uint32_t>(stream >> 32)};
        return detail::philox4x32_10(ctr, key);
    }

private:
    std::uint64_t seed_;
};

/// Derives an independent seed from a base seed and a label (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t label) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (label + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace mtll
