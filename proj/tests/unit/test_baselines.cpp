#include <doctest.h>

#include <limits>
#include <numeric>

#include "cfmdd/baselines.hpp"
#include "cfmdd/errors.hpp"
#include "cfmdd/hgnn/graph.hpp"
#include "cfmdd/qtsca.hpp"
#include "helpers.hpp"

using namespace cfmdd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_invariants(const ClusterAssignment& a, bool single_antenna) {
  CHECK_NOTHROW(a.check());
  std::vector<bool> covered(a.L(), false);
  for (std::size_t d = 0; d < a.D(); ++d) {
    CHECK(a.aps_of_ms[d].size() >= 1);
    for (const auto l : a.aps_of_ms[d]) covered[l] = true;
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l < a.L(); ++l) {
    CHECK(covered[l]);
    if (single_antenna) CHECK(a.ms_of_ap[l].size() <= 1);
    total += a.ms_of_ap[l].size();
    for (const auto d : a.ms_of_ap[l]) {
      const auto& s = a.aps_of_ms[d];
      CHECK(std::find(s.begin(), s.end(), l) != s.end());
    }
  }
  if (single_antenna) CHECK(total == a.L());
}

}  // namespace

TEST_CASE("water-filling examples") {
  const auto eq = waterfill({0.5, 0.5, 0.5, 0.5}, 2.0);
  for (const double p : eq) CHECK(p == doctest::Approx(0.5).epsilon(1e-15));
  const auto two = waterfill({1.0, 4.0}, 1.0);
  CHECK(two[0] == 1.0);
  CHECK(two[1] == 0.0);
  CHECK(water_level({1.0, 4.0}, 1.0) == 2.0);
  for (const double p : waterfill({1.0, 2.0, 3.0}, 0.0)) CHECK(p == 0.0);
  const auto blocked = waterfill({kInf, 1.0, kInf}, 3.0);
  CHECK(blocked[0] == 0.0);
  CHECK(blocked[1] == 3.0);
  CHECK(blocked[2] == 0.0);
  CHECK_THROWS_AS(waterfill({1.0}, -1.0), InvalidInputError);
  CHECK_THROWS_AS(waterfill({kInf, kInf}, 1.0), InvalidInputError);
  CHECK_THROWS_AS(waterfill({-1.0, 2.0}, 1.0), InvalidInputError);
}

TEST_CASE("water-filling KKT conditions") {
  Rng rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> n_dist(1, 24);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = n_dist(rng);
    std::vector<double> inv(n);
    for (auto& g : inv) g = u(rng) < 0.1 ? kInf : std::exp(6.0 * u(rng) - 3.0);
    if (std::none_of(inv.begin(), inv.end(), [](double g) { return std::isfinite(g); })) {
      inv[0] = 1.0;
    }
    const double budget = 10.0 * u(rng);
    const auto p = waterfill(inv, budget);
    const double mu = water_level(inv, budget);
    double mean = 0.0, sq = 0.0;
    std::size_t active = 0;
    for (int i = 0; i < n; ++i) {
      CHECK(p[i] >= 0.0);
      if (p[i] > 0.0) {
        const double level = p[i] + inv[i];
        mean += level;
        sq += level * level;
        ++active;
        CHECK(std::abs(level - mu) < 1e-9 * std::max(1.0, mu));
      } else {
        CHECK(inv[i] >= mu * (1.0 - 1e-12));
      }
    }
    if (active > 0) {
      mean /= active;
      CHECK(sq / active - mean * mean < 1e-9);
    }
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == budget);
  }
}

TEST_CASE("greedy baseline") {
  const NetworkConfig c = test::small_config(4, 2, 4, 4, 2);
  const auto ch = draw_channels(generate_topology(c, 3), c, 3);
  const auto g = equivalent_gains(zf_beamformers(ch, c), ch);
  const auto p = greedy_unfair(g, c);
  CHECK(p.nonnegative());
  for (std::size_t l = 0; l < c.L; ++l) CHECK(p.ap_total(l) == doctest::Approx(c.P_l).epsilon(1e-14));
  for (std::size_t d = 0; d < c.D; ++d) CHECK(p.ms_total(d) == doctest::Approx(c.P_d).epsilon(1e-14));
  CHECK(p.within_budgets(c.P_l, c.P_d));

  SUBCASE("dominant channel takes nearly everything") {
    EquivalentGains weak = g;
    for (auto& w : weak.omega) w = 1e-9;
    for (std::size_t l = 0; l < c.L; ++l) weak.w(l, l % 2, 1) = 1e-6;
    const auto q = greedy_unfair(weak, c);
    for (std::size_t l = 0; l < c.L; ++l) CHECK(q.dl(l, l % 2, 1) > 0.999 * c.P_l);
  }
}

TEST_CASE("QT-SCA beats the greedy baseline") {
  const NetworkConfig c = test::small_config(8, 2, 8, 4, 2);
  const auto ch = draw_channels(generate_topology(c, 11), c, 11);
  const auto g = equivalent_gains(zf_beamformers(ch, c), ch);
  const SinrModel model(g, ch, c);
  const double greedy = model.spectral_efficiency(greedy_unfair(g, c));
  const double qt = model.spectral_efficiency(qt_sca_solve(model, c).p);
  MESSAGE("greedy " << greedy << " vs QT-SCA " << qt);
  CHECK(greedy < qt);
}

TEST_CASE("user-centric clustering") {
  SUBCASE("one MS, two APs") {
    const NetworkConfig c = test::small_config(2, 1, 1, 2, 1);
    const auto ch = draw_channels(generate_topology(c, 1), c, 1);
    const auto a = user_centric_cluster(single_user_gains(ch), c);
    CHECK(a.aps_of_ms[0] == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("L = D gives one AP per MS") {
    const NetworkConfig c = test::small_config(4, 4, 1, 2, 1);
    const auto ch = draw_channels(generate_topology(c, 2), c, 2);
    const auto a = user_centric_cluster(single_user_gains(ch), c);
    for (std::size_t d = 0; d < 4; ++d) CHECK(a.aps_of_ms[d].size() == 1);
    check_invariants(a, true);
  }
  SUBCASE("random L = 12, D = 6") {
    const NetworkConfig c = test::small_config(12, 6, 1, 4, 2);
    for (std::uint64_t s = 1; s <= 20; ++s) {
      const auto ch = draw_channels(generate_topology(c, s), c, s);
      check_invariants(user_centric_cluster(single_user_gains(ch), c), true);
    }
  }
  SUBCASE("masters go to the strongest links") {
    NetworkConfig c = test::small_config(3, 2, 1, 1, 1);
    EquivalentGains g(3, 2, 1, 1);
    g.w(0, 0, 0) = 5.0;
    g.w(0, 1, 0) = 9.0;  // AP 0 is the best AP for both MSs
    g.w(1, 0, 0) = 4.0;
    g.w(1, 1, 0) = 1.0;
    g.w(2, 0, 0) = 1.0;
    g.w(2, 1, 0) = 1.0;  // tie: AP 2 joins the lower index
    const auto a = user_centric_cluster(g, c);
    CHECK(a.aps_of_ms[1] == std::vector<std::size_t>{0});
    CHECK(a.aps_of_ms[0] == std::vector<std::size_t>{1, 2});
  }
  SUBCASE("too few APs") {
    const NetworkConfig c = test::small_config(2, 3, 1, 1, 1);
    CHECK_THROWS_AS(user_centric_cluster(EquivalentGains(2, 3, 1, 1), c), ConfigError);
  }
  SUBCASE("inconsistent assignments are rejected") {
    auto a = full_assignment(2, 2);
    CHECK_NOTHROW(a.check());
    a.ms_of_ap[1] = {0};
    CHECK_THROWS_AS(a.check(), InvalidInputError);
    a = full_assignment(2, 2);
    a.aps_of_ms[0].clear();
    a.ms_of_ap[0] = {1};
    a.ms_of_ap[1] = {1};
    CHECK_THROWS_AS(a.check(), InvalidInputError);
  }
}

TEST_CASE("cluster masks on graphs") {
  const NetworkConfig c = test::small_config(6, 3, 1, 2, 1);
  const auto topo = generate_topology(c, 4);
  const auto ch = draw_channels(topo, c, 4);
  const auto su = single_user_gains(ch);
  const auto full = build_graph(su, topo, c);

  const auto same = apply_cluster_mask(full, full_assignment(6, 3));
  CHECK(same.ap_features == full.ap_features);
  CHECK(same.ms_features == full.ms_features);
  CHECK(same.ap_slots == full.ap_slots);

  const auto a = user_centric_cluster(su, c);
  const auto masked = apply_cluster_mask(full, a);
  for (std::size_t l = 0; l < 6; ++l) {
    CHECK(masked.ap_slots[l].size() == 1);
    CHECK(masked.ap_features[l].size() == c.M + 3);
    CHECK(masked.ap_features[l][0] == su.w(l, masked.ap_slots[l][0], 0));
  }
  for (std::size_t d = 0; d < 3; ++d) {
    CHECK(masked.ms_slots[d] == a.aps_of_ms[d]);
    CHECK(masked.ms_features[d].size() == a.aps_of_ms[d].size() * c.Mbar + 3);
  }
  // the interference distances stay dense
  CHECK(masked.dist_ap_ap == full.dist_ap_ap);

  const auto gains = equivalent_gains(zf_beamformers(ch, c, a.mask()), ch);
  const auto p = greedy_unfair(gains, c);
  for (std::size_t l = 0; l < 6; ++l) {
    for (std::size_t d = 0; d < 3; ++d) {
      if (a.mask().serves(l, d)) continue;
      for (std::size_t m = 0; m < c.M; ++m) CHECK(p.dl(l, d, m) == 0.0);
    }
  }
  auto bad = a;
  bad.ms_of_ap[0].push_back((a.ms_of_ap[0][0] + 1) % 3);
  CHECK_THROWS_AS(apply_cluster_mask(full, bad), InvalidInputError);
}
