#pragma once

#include <cstddef>
#include <vector>

#include "cfmdd/baselines.hpp"
#include "cfmdd/beamforming.hpp"
#include "cfmdd/channel.hpp"
#include "cfmdd/config.hpp"

namespace cfmdd {

/// AP/MS graph of one network instance.
///
/// AP feature l: [omega_{l,.,1}, ..., omega_{l,.,M}, P_l, xi_si_ap, xi_iai],
/// where each block lists the MSs in ap_slots[l]; MS feature d:
/// [upsilon_{.,d,1}, ..., upsilon_{.,d,Mbar}, P_d, xi_si_ms, xi_imi] over the
/// APs in ms_slots[d]. With full service the slots are all nodes in index
/// order, giving lengths DM+3 and LMbar+3.
struct HetGraph {
  NetworkConfig config;
  EquivalentGains gains;  // entries of unserved pairs are zero
  Topology topology;

  std::vector<std::vector<double>> ap_features;
  std::vector<std::vector<double>> ms_features;
  std::vector<std::vector<std::size_t>> ap_slots;  // MSs served by AP l (neighbors on MS-UL-AP)
  std::vector<std::vector<std::size_t>> ms_slots;  // APs serving MS d (neighbors on AP-DL-MS)

  // Euclidean distances in meters; diagonals are 0.
  std::vector<double> dist_ap_ms;  // L x D
  std::vector<double> dist_ap_ap;  // L x L
  std::vector<double> dist_ms_ms;  // D x D

  std::size_t L() const { return gains.L; }
  std::size_t D() const { return gains.D; }
  double ap_ms(std::size_t l, std::size_t d) const { return dist_ap_ms[l * D() + d]; }
  double ap_ap(std::size_t l, std::size_t lp) const { return dist_ap_ap[l * L() + lp]; }
  double ms_ms(std::size_t d, std::size_t dp) const { return dist_ms_ms[d * D() + dp]; }
};

HetGraph build_graph(const EquivalentGains& gains, const Topology& topology,
                     const NetworkConfig& config);

/// Relabels nodes: node i of the result is AP ap_perm[i] / MS ms_perm[i] of g.
HetGraph permute_graph(const HetGraph& g, const std::vector<std::size_t>& ap_perm,
                       const std::vector<std::size_t>& ms_perm);

/// Restricts the AP-MS meta-paths to the assigned pairs and zeroes the gains
/// of unserved pairs; the interference meta-paths stay dense.
HetGraph apply_cluster_mask(const HetGraph& g, const ClusterAssignment& assignment);

/// Label-independent node orders: APs sorted by their total DL gain, MSs by
/// the total DL gain they receive (ties by index). Entry i is the original
/// index of the i-th node.
struct CanonicalOrder {
  std::vector<std::size_t> ap, ms;
};
CanonicalOrder canonical_order(const HetGraph& g);

}  // namespace cfmdd
