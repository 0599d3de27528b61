#pragma once

#include <cstdint>
#include <random>

namespace ustatbench {

/// Replication seed: one master value for the whole run plus a stream index.
/// Distinct (master, stream) pairs give independent engines; equal pairs give
/// identical draws regardless of which thread consumes them.
struct Seed {
    std::uint64_t master = 0;
    std::uint64_t stream = 0;

    /// Sub-stream for an auxiliary purpose (conditioning panels, centerings)
    /// that must not overlap the replication's own draws.
    [[nodiscard]] Seed derive(std::uint64_t tag) const noexcept;

    friend bool operator==(const Seed&, const Seed&) = default;
};

using Engine = std::mt19937_64;

[[nodiscard]] Engine make_engine(Seed seed);

/// Uniform on the open interval (0, 1): never returns 0 or 1, so inverse-CDF
/// samplers stay finite.
[[nodiscard]] inline double uniform_open(Engine& eng) {
    return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace ustatbench
