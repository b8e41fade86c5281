#include "cfmdd/hgnn/graph.hpp"

#include <algorithm>
#include <numeric>

#include "cfmdd/errors.hpp"

namespace cfmdd {

namespace {

void fill_features(HetGraph& g) {
  const std::size_t L = g.L(), D = g.D(), M = g.gains.M, Mbar = g.gains.Mbar;
  const auto& c = g.config;
  g.ap_slots.assign(L, {});
  g.ms_slots.assign(D, {});
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t d = 0; d < D; ++d) {
      if (g.gains.serving.serves(l, d)) {
        g.ap_slots[l].push_back(d);
        g.ms_slots[d].push_back(l);
      }
    }
  }
  g.ap_features.assign(L, {});
  for (std::size_t l = 0; l < L; ++l) {
    auto& f = g.ap_features[l];
    for (std::size_t m = 0; m < M; ++m) {
      for (const auto d : g.ap_slots[l]) f.push_back(g.gains.w(l, d, m));
    }
    f.insert(f.end(), {c.P_l, c.xi_si_ap, c.xi_iai});
  }
  g.ms_features.assign(D, {});
  for (std::size_t d = 0; d < D; ++d) {
    auto& f = g.ms_features[d];
    for (std::size_t mb = 0; mb < Mbar; ++mb) {
      for (const auto l : g.ms_slots[d]) f.push_back(g.gains.v(l, d, mb));
    }
    f.insert(f.end(), {c.P_d, c.xi_si_ms, c.xi_imi});
  }
  const auto& aps = g.topology.ap_positions;
  const auto& mss = g.topology.ms_positions;
  g.dist_ap_ms.assign(L * D, 0.0);
  g.dist_ap_ap.assign(L * L, 0.0);
  g.dist_ms_ms.assign(D * D, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t d = 0; d < D; ++d) g.dist_ap_ms[l * D + d] = distance(aps[l], mss[d]);
    for (std::size_t lp = 0; lp < L; ++lp) {
      g.dist_ap_ap[l * L + lp] = lp == l ? 0.0 : distance(aps[l], aps[lp]);
    }
  }
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t dp = 0; dp < D; ++dp) {
      g.dist_ms_ms[d * D + dp] = dp == d ? 0.0 : distance(mss[d], mss[dp]);
    }
  }
}

void check_perm(const std::vector<std::size_t>& perm, std::size_t n, const char* what) {
  std::vector<bool> seen(n, false);
  if (perm.size() != n) throw InvalidInputError(std::string(what) + " permutation has wrong size");
  for (const auto i : perm) {
    if (i >= n || seen[i]) throw InvalidInputError(std::string(what) + " permutation is invalid");
    seen[i] = true;
  }
}

double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0);
}

}  // namespace

HetGraph build_graph(const EquivalentGains& gains, const Topology& topology,
                     const NetworkConfig& config) {
  if (gains.L != config.L || gains.D != config.D || gains.M != config.M ||
      gains.Mbar != config.Mbar) {
    throw InvalidInputError("gains do not match the network configuration");
  }
  if (topology.ap_positions.size() != gains.L || topology.ms_positions.size() != gains.D) {
    throw InvalidInputError("topology does not match the gains");
  }
  HetGraph g;
  g.config = config;
  g.gains = gains;
  g.topology = topology;
  for (std::size_t l = 0; l < gains.L; ++l) {
    for (std::size_t d = 0; d < gains.D; ++d) {
      if (gains.serving.serves(l, d)) continue;
      for (std::size_t m = 0; m < gains.M; ++m) g.gains.w(l, d, m) = 0.0;
      for (std::size_t mb = 0; mb < gains.Mbar; ++mb) g.gains.v(l, d, mb) = 0.0;
    }
  }
  fill_features(g);
  return g;
}

HetGraph permute_graph(const HetGraph& g, const std::vector<std::size_t>& ap_perm,
                       const std::vector<std::size_t>& ms_perm) {
  const std::size_t L = g.L(), D = g.D(), M = g.gains.M, Mbar = g.gains.Mbar;
  check_perm(ap_perm, L, "AP");
  check_perm(ms_perm, D, "MS");
  EquivalentGains gains(L, D, M, Mbar);
  gains.serving = ServingMask(L, D, false);
  Topology topo;
  for (std::size_t i = 0; i < L; ++i) topo.ap_positions.push_back(g.topology.ap_positions[ap_perm[i]]);
  for (std::size_t j = 0; j < D; ++j) topo.ms_positions.push_back(g.topology.ms_positions[ms_perm[j]]);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < D; ++j) {
      const std::size_t l = ap_perm[i], d = ms_perm[j];
      gains.serving.set(i, j, g.gains.serving.serves(l, d));
      for (std::size_t m = 0; m < M; ++m) gains.w(i, j, m) = g.gains.w(l, d, m);
      for (std::size_t mb = 0; mb < Mbar; ++mb) gains.v(i, j, mb) = g.gains.v(l, d, mb);
    }
  }
  HetGraph out;
  out.config = g.config;
  out.gains = std::move(gains);
  out.topology = std::move(topo);
  fill_features(out);
  return out;
}

HetGraph apply_cluster_mask(const HetGraph& g, const ClusterAssignment& assignment) {
  if (assignment.L() != g.L() || assignment.D() != g.D()) {
    throw InvalidInputError("cluster assignment does not match the graph size");
  }
  assignment.check();
  EquivalentGains gains = g.gains;
  const ServingMask mask = assignment.mask();
  for (std::size_t l = 0; l < g.L(); ++l) {
    for (std::size_t d = 0; d < g.D(); ++d) {
      if (mask.serves(l, d)) continue;
      for (std::size_t m = 0; m < gains.M; ++m) gains.w(l, d, m) = 0.0;
      for (std::size_t mb = 0; mb < gains.Mbar; ++mb) gains.v(l, d, mb) = 0.0;
    }
  }
  gains.serving = mask;
  HetGraph out;
  out.config = g.config;
  out.gains = std::move(gains);
  out.topology = g.topology;
  fill_features(out);
  return out;
}

CanonicalOrder canonical_order(const HetGraph& g) {
  const std::size_t L = g.L(), D = g.D(), M = g.gains.M;
  std::vector<double> ap_key(L), ms_key(D);
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<double> v;
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t m = 0; m < M; ++m) v.push_back(g.gains.w(l, d, m));
    }
    ap_key[l] = sorted_sum(std::move(v));
  }
  for (std::size_t d = 0; d < D; ++d) {
    std::vector<double> v;
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t m = 0; m < M; ++m) v.push_back(g.gains.w(l, d, m));
    }
    ms_key[d] = sorted_sum(std::move(v));
  }
  CanonicalOrder o;
  o.ap.resize(L);
  o.ms.resize(D);
  std::iota(o.ap.begin(), o.ap.end(), 0);
  std::iota(o.ms.begin(), o.ms.end(), 0);
  std::stable_sort(o.ap.begin(), o.ap.end(),
                   [&](std::size_t a, std::size_t b) { return ap_key[a] > ap_key[b]; });
  std::stable_sort(o.ms.begin(), o.ms.end(),
                   [&](std::size_t a, std::size_t b) { return ms_key[a] > ms_key[b]; });
  return o;
}

}  // namespace cfmdd
