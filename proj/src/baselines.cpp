#include "cfmdd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cfmdd/errors.hpp"

namespace cfmdd {

double water_level(const std::vector<double>& inv_gains, double budget) {
  if (budget < 0.0 || !std::isfinite(budget)) {
    throw InvalidInputError("water-filling budget must be finite and nonnegative");
  }
  std::vector<double> v;
  v.reserve(inv_gains.size());
  for (const double g : inv_gains) {
    if (std::isnan(g) || g < 0.0) throw InvalidInputError("inverse gains must be nonnegative");
    if (std::isfinite(g)) v.push_back(g);
  }
  if (v.empty()) {
    if (budget > 0.0) throw InvalidInputError("water-filling needs at least one finite channel");
    return std::numeric_limits<double>::infinity();
  }
  std::sort(v.begin(), v.end());
  // Largest k such that the level over the k best channels stays below the
  // (k+1)-th inverse gain.
  double prefix = 0.0;
  double mu = v[0] + budget;
  for (std::size_t k = 1; k <= v.size(); ++k) {
    prefix += v[k - 1];
    const double level = (budget + prefix) / static_cast<double>(k);
    if (k == v.size() || level <= v[k]) {
      mu = level;
      break;
    }
  }
  return mu;
}

std::vector<double> waterfill(const std::vector<double>& inv_gains, double budget) {
  std::vector<double> p(inv_gains.size(), 0.0);
  if (budget == 0.0) {
    water_level(inv_gains, budget);  // argument checks
    return p;
  }
  const double mu = water_level(inv_gains, budget);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < inv_gains.size(); ++i) {
    if (std::isfinite(inv_gains[i]) && inv_gains[i] < mu) {
      p[i] = mu - inv_gains[i];
      active.push_back(i);
    }
  }
  // The last active entry absorbs the rounding residue: it is set to the
  // budget minus the prefix sum, so the final addition lands on the budget.
  if (!active.empty()) {
    const std::size_t k = active.back();
    const double prefix = std::accumulate(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
    p[k] = std::max(0.0, budget - prefix);
  }
  return p;
}

PowerAllocation greedy_unfair(const EquivalentGains& gains, const NetworkConfig& config) {
  const std::size_t L = gains.L, D = gains.D, M = gains.M, Mbar = gains.Mbar;
  PowerAllocation pa(L, D, M, Mbar);
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<double> inv(D * M, inf);
    bool any = false;
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t m = 0; m < M; ++m) {
        const double w = gains.w(l, d, m);
        if (w > 0.0) {
          inv[d * M + m] = config.sigma2 / (w * w);
          any = true;
        }
      }
    }
    if (!any) continue;
    const auto p = waterfill(inv, config.P_l);
    for (std::size_t i = 0; i < D * M; ++i) pa.p_dl[l * D * M + i] = p[i];
  }
  for (std::size_t d = 0; d < D; ++d) {
    std::size_t n_serving = 0;
    for (std::size_t l = 0; l < L; ++l) n_serving += gains.serving.serves(l, d) ? 1 : 0;
    if (n_serving == 0) continue;
    const double Ld = static_cast<double>(n_serving);
    std::vector<double> inv(Mbar, inf);
    for (std::size_t mb = 0; mb < Mbar; ++mb) {
      double s = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        if (gains.serving.serves(l, d)) s += gains.v(l, d, mb);
      }
      inv[mb] = config.sigma2 * s / (Ld * Ld);
    }
    const auto p = waterfill(inv, config.P_d);
    for (std::size_t mb = 0; mb < Mbar; ++mb) pa.ul(d, mb) = p[mb];
  }
  return pa;
}

void ClusterAssignment::check() const {
  const std::size_t nL = L(), nD = D();
  for (std::size_t d = 0; d < nD; ++d) {
    if (aps_of_ms[d].empty()) {
      throw InvalidInputError("MS " + std::to_string(d) + " has no serving AP");
    }
    for (const auto l : aps_of_ms[d]) {
      if (l >= nL) throw InvalidInputError("AP index out of range in cluster assignment");
      const auto& s = ms_of_ap[l];
      if (std::find(s.begin(), s.end(), d) == s.end()) {
        throw InvalidInputError("cluster assignment is not bidirectionally consistent");
      }
    }
  }
  for (std::size_t l = 0; l < nL; ++l) {
    for (const auto d : ms_of_ap[l]) {
      if (d >= nD) throw InvalidInputError("MS index out of range in cluster assignment");
      const auto& s = aps_of_ms[d];
      if (std::find(s.begin(), s.end(), l) == s.end()) {
        throw InvalidInputError("cluster assignment is not bidirectionally consistent");
      }
    }
  }
}

ServingMask ClusterAssignment::mask() const {
  ServingMask mask(L(), D(), false);
  for (std::size_t l = 0; l < L(); ++l) {
    for (const auto d : ms_of_ap[l]) mask.set(l, d, true);
  }
  return mask;
}

ClusterAssignment full_assignment(std::size_t L, std::size_t D) {
  ClusterAssignment a;
  a.aps_of_ms.assign(D, {});
  a.ms_of_ap.assign(L, {});
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t d = 0; d < D; ++d) {
      a.aps_of_ms[d].push_back(l);
      a.ms_of_ap[l].push_back(d);
    }
  }
  return a;
}

namespace {

double best_gain(const EquivalentGains& gains, std::size_t l, std::size_t d) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < gains.M; ++m) best = std::max(best, gains.w(l, d, m));
  return best;
}

}  // namespace

ClusterAssignment user_centric_cluster(const EquivalentGains& gains, const NetworkConfig& config) {
  const std::size_t L = gains.L, D = gains.D;
  if (L != config.L || D != config.D) {
    throw InvalidInputError("gains do not match the network configuration");
  }
  if (L < D) {
    throw ConfigError("user-centric clustering needs L >= D (L=" + std::to_string(L) +
                      ", D=" + std::to_string(D) + ")");
  }
  ClusterAssignment a;
  a.aps_of_ms.assign(D, {});
  a.ms_of_ap.assign(L, {});
  std::vector<bool> claimed(L, false), has_master(D, false);

  for (std::size_t round = 0; round < D; ++round) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bl = L, bd = D;
    for (std::size_t d = 0; d < D; ++d) {
      if (has_master[d]) continue;
      for (std::size_t l = 0; l < L; ++l) {
        if (claimed[l]) continue;
        const double g = best_gain(gains, l, d);
        if (g > best || bl == L) {
          best = g;
          bl = l;
          bd = d;
        }
      }
    }
    claimed[bl] = true;
    has_master[bd] = true;
    a.aps_of_ms[bd].push_back(bl);
    a.ms_of_ap[bl].push_back(bd);
  }

  for (std::size_t l = 0; l < L; ++l) {
    if (claimed[l]) continue;
    std::size_t bd = 0;
    double best = best_gain(gains, l, 0);
    for (std::size_t d = 1; d < D; ++d) {
      const double g = best_gain(gains, l, d);
      if (g > best) {
        best = g;
        bd = d;
      }
    }
    a.aps_of_ms[bd].push_back(l);
    a.ms_of_ap[l].push_back(bd);
  }
  for (auto& s : a.aps_of_ms) std::sort(s.begin(), s.end());
  return a;
}

}  // namespace cfmdd
