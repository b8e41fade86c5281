#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cfmdd/beamforming.hpp"
#include "cfmdd/channel.hpp"
#include "cfmdd/config.hpp"
#include "cfmdd/sinr.hpp"

namespace cfmdd {

/// Estimated SINRs on every DL (d, m) and UL (d, mbar) slot.
struct SinrTable {
  std::size_t D = 0, M = 0, Mbar = 0;
  std::vector<double> dl;  // [d * M + m]
  std::vector<double> ul;  // [d * Mbar + mbar]
};

/// Draws simulated per oracle chunk; chunk c uses its own derived seed, so the
/// result does not depend on how chunks are scheduled.
inline constexpr std::size_t kOracleChunk = 1024;

/// Monte-Carlo estimate of the ZF SINRs from the received-signal models:
/// symbols, SI channels, IAI/IMI CIRs are re-drawn every trial and the
/// interference powers seen after precoding/combining are averaged.
/// Noise enters analytically. `draws` must be at least 1000. The config is
/// not validated, so zero interference levels are accepted.
SinrTable mc_interference_oracle(const ChannelSet& channels, const Beamformers& beamformers,
                                 const PowerAllocation& pa, const NetworkConfig& config,
                                 std::size_t draws, std::uint64_t seed);

/// Single-threaded reference; bit-identical to mc_interference_oracle.
SinrTable mc_interference_oracle_serial(const ChannelSet& channels,
                                        const Beamformers& beamformers,
                                        const PowerAllocation& pa, const NetworkConfig& config,
                                        std::size_t draws, std::uint64_t seed);

/// Analytic SINR table from the equivalent-gain model.
SinrTable analytic_sinr_table(const SinrModel& model, const PowerAllocation& pa);

}  // namespace cfmdd
