#pragma once

#include <cstdint>

#include "fdr/core.hpp"

namespace fdr {

/// SplitMix64 output function (Steele, Lea & Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: substream `stream` of master `seed` is a pure
/// function of (seed, stream, draw index), so replication k can always be
/// given substream k no matter how work is scheduled across threads.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : state_(mix64(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)))) {}

    std::uint64_t next_u64() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    /// Uniform on the open interval (0,1); never returns 0 or 1, so it can
    /// feed the normal quantile directly.
    double next_uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
    }

    /// Standard normal variate via the inverse CDF.
    double next_normal() { return standard_normal_quantile(next_uniform()); }

private:
    std::uint64_t state_;
};

}  // namespace fdr
