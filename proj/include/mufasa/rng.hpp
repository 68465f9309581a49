#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace mufasa {

/// SplitMix64 generator (64-bit state). Distributions are implemented here
/// rather than with <random> so that draws are identical across standard
/// libraries; the identifier below is recorded with every run.
class Rng {
public:
    static constexpr std::string_view kAlgorithm = "splitmix64/box-muller/v1";

    explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Uniform integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n) noexcept;
    double normal() noexcept;
    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

    std::uint64_t state() const noexcept { return state_; }

    /// Independent seed for a named sub-stream of `seed`.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) noexcept;

private:
    std::uint64_t state_;
};

}  // namespace mufasa
