#include "cfmdd/channel.hpp"

#include <cmath>
#include <numbers>

#include "cfmdd/errors.hpp"

namespace cfmdd {

Topology generate_topology(const NetworkConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, Stream::kTopology));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] { return Point{config.S_D * unit(rng), config.S_D * unit(rng)}; };
  Topology t;
  t.ap_positions.reserve(config.L);
  t.ms_positions.reserve(config.D);
  for (std::size_t l = 0; l < config.L; ++l) t.ap_positions.push_back(draw());
  for (std::size_t d = 0; d < config.D; ++d) t.ms_positions.push_back(draw());
  return t;
}

double distance(const Point& a, const Point& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

double large_scale_fading(double distance_m, double shadow_draw, double sigma_sh) {
  if (!(distance_m > 0.0)) {
    throw ConfigError("large-scale fading needs a positive distance, got " +
                      std::to_string(distance_m));
  }
  const double db = -30.5 - 36.7 * std::log10(distance_m) + sigma_sh * shadow_draw;
  return std::pow(10.0, db / 10.0);
}

std::vector<cdouble> subcarrier_channels(std::span<const cdouble> cir, std::size_t m_sum) {
  if (cir.size() > m_sum) {
    throw ConfigError("CIR length " + std::to_string(cir.size()) +
                      " exceeds subcarrier count " + std::to_string(m_sum));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(m_sum));
  std::vector<cdouble> h(m_sum);
  for (std::size_t k = 0; k < m_sum; ++k) {
    cdouble acc{0.0, 0.0};
    for (std::size_t u = 0; u < cir.size(); ++u) {
      // Reduce k*u mod m_sum first so the twiddle angle stays small.
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * u) % m_sum) /
                           static_cast<double>(m_sum);
      acc += cir[u] * std::polar(1.0, angle);
    }
    h[k] = scale * acc;
  }
  return h;
}

std::vector<cdouble> draw_cir(Rng& rng, double beta, std::size_t taps) {
  std::vector<cdouble> g(taps);
  for (auto& tap : g) tap = draw_cn(rng, beta / static_cast<double>(taps));
  return g;
}

ChannelSet::ChannelSet(std::size_t L, std::size_t D, std::size_t N, std::size_t M,
                       std::size_t Mbar, std::size_t U)
    : L_(L),
      D_(D),
      N_(N),
      M_(M),
      Mbar_(Mbar),
      U_(U),
      beta_ld_(L * D, 0.0),
      beta_ll_(L * L, 0.0),
      beta_dd_(D * D, 0.0),
      taps_(L * D * N * U),
      freq_(L * D * N * (M + Mbar)),
      si_ap_(L * N * N),
      si_ms_(D) {}

void ChannelSet::refresh_frequency_response() {
  for (std::size_t l = 0; l < L_; ++l) {
    for (std::size_t d = 0; d < D_; ++d) {
      for (std::size_t n = 0; n < N_; ++n) {
        const auto hf = subcarrier_channels(cir(l, d, n), M_sum());
        for (std::size_t k = 0; k < M_sum(); ++k) h(l, d, k)[n] = hf[k];
      }
    }
  }
}

ChannelSet draw_channels(const Topology& topology, const NetworkConfig& config,
                         std::uint64_t seed) {
  const std::size_t L = config.L, D = config.D, N = config.N, U = config.U;
  if (U > config.M_sum()) {
    throw ConfigError("tap count U exceeds the subcarrier count M + Mbar");
  }
  ChannelSet ch(L, D, N, config.M, config.Mbar, U);

  Rng shadow_rng(derive_seed(seed, Stream::kShadowing));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gain = [&](const Point& a, const Point& b) {
    const double dist = std::max(distance(a, b), kMinLinkDistance);
    return large_scale_fading(dist, normal(shadow_rng), config.sigma_sh);
  };
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t d = 0; d < D; ++d) {
      ch.beta_ld(l, d) = gain(topology.ap_positions[l], topology.ms_positions[d]);
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t lp = l + 1; lp < L; ++lp) {
      const double b = gain(topology.ap_positions[l], topology.ap_positions[lp]);
      ch.beta_ll(l, lp) = b;
      ch.beta_ll(lp, l) = b;
    }
  }
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t dp = d + 1; dp < D; ++dp) {
      const double b = gain(topology.ms_positions[d], topology.ms_positions[dp]);
      ch.beta_dd(d, dp) = b;
      ch.beta_dd(dp, d) = b;
    }
  }

  Rng rng(derive_seed(seed, Stream::kChannels));
  const double tap_var = 1.0 / static_cast<double>(U);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t d = 0; d < D; ++d) {
      const double var = ch.beta_ld(l, d) * tap_var;
      for (std::size_t n = 0; n < N; ++n) {
        for (auto& tap : ch.cir(l, d, n)) tap = draw_cn(rng, var);
      }
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    for (auto& entry : ch.si_ap(l)) entry = draw_cn(rng, config.xi_si_ap);
  }
  for (std::size_t d = 0; d < D; ++d) ch.si_ms(d) = draw_cn(rng, config.xi_si_ms);

  ch.refresh_frequency_response();
  return ch;
}

}  // namespace cfmdd
