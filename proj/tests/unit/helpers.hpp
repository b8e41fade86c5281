#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "cfmdd/beamforming.hpp"
#include "cfmdd/channel.hpp"
#include "cfmdd/config.hpp"
#include "cfmdd/dataset.hpp"
#include "cfmdd/sinr.hpp"

namespace cfmdd::test {

inline NetworkConfig small_config(std::size_t L, std::size_t D, std::size_t N, std::size_t M,
                                  std::size_t Mbar) {
  NetworkConfig c;
  c.L = L;
  c.D = D;
  c.N = N;
  c.M = M;
  c.Mbar = Mbar;
  c.U = std::min<std::size_t>(4, M + Mbar);
  return c;
}

inline double rel_err(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

/// Random allocation inside the budgets.
inline PowerAllocation random_allocation(const NetworkConfig& c, std::uint64_t seed,
                                         double fill = 0.8) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  PowerAllocation p = PowerAllocation::zeros_like(c);
  for (std::size_t l = 0; l < c.L; ++l) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.D * c.M; ++i) s += (p.p_dl[l * c.D * c.M + i] = u(rng));
    for (std::size_t i = 0; i < c.D * c.M; ++i) p.p_dl[l * c.D * c.M + i] *= fill * c.P_l / s;
  }
  for (std::size_t d = 0; d < c.D; ++d) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.Mbar; ++i) s += (p.p_ul[d * c.Mbar + i] = u(rng));
    for (std::size_t i = 0; i < c.Mbar; ++i) p.p_ul[d * c.Mbar + i] *= fill * c.P_d / s;
  }
  return p;
}

}  // namespace cfmdd::test
