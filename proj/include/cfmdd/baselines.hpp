#pragma once

#include <cstddef>
#include <vector>

#include "cfmdd/beamforming.hpp"
#include "cfmdd/config.hpp"
#include "cfmdd/sinr.hpp"

namespace cfmdd {

/// p_i = max(0, mu - inv_gain_i) with sum p_i = budget. Non-finite inverse
/// gains mark unusable channels and receive zero power.
std::vector<double> waterfill(const std::vector<double>& inv_gains, double budget);

/// Water level mu of the allocation above (infinity when budget is 0 and no
/// channel is usable).
double water_level(const std::vector<double>& inv_gains, double budget);

/// Interference-blind baseline: every AP water-fills P_l over its (d, m)
/// channels with inv_gain sigma^2 / omega^2, every MS water-fills P_d over
/// its UL subcarriers with inv_gain sigma^2 sum_l upsilon / L_d^2.
PowerAllocation greedy_unfair(const EquivalentGains& gains, const NetworkConfig& config);

struct ClusterAssignment {
  std::vector<std::vector<std::size_t>> aps_of_ms;  // L_d, ascending
  std::vector<std::vector<std::size_t>> ms_of_ap;   // D_l, ascending

  std::size_t L() const { return ms_of_ap.size(); }
  std::size_t D() const { return aps_of_ms.size(); }
  /// Throws InvalidInputError unless l in L_d <=> d in D_l and every MS has
  /// a serving AP.
  void check() const;
  ServingMask mask() const;
};

ClusterAssignment full_assignment(std::size_t L, std::size_t D);

/// Two-step user-centric clustering on per-link gains (typically
/// single_user_gains). Step 1 hands out master APs one at a time to the
/// unassigned MS with the strongest link to an unclaimed AP; step 2 attaches
/// every idle AP to the MS it sees best. Throws ConfigError when L < D.
ClusterAssignment user_centric_cluster(const EquivalentGains& gains, const NetworkConfig& config);

}  // namespace cfmdd
