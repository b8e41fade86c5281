#include "cfmdd/mc_oracle.hpp"

#include <cmath>
#include <numbers>

#include "cfmdd/errors.hpp"
#include "cfmdd/rng.hpp"

namespace cfmdd {

namespace {

// Deterministic parts of one instance shared by every trial.
struct OracleSetup {
  std::size_t L, D, N, M, Mbar, U, m_sum;
  std::vector<double> sq_dl;  // sqrt(p_ldm)
  std::vector<double> sq_ul;  // sqrt(p_dmbar)
  std::vector<cdouble> twiddle;  // [k * U + u], scaled by 1/sqrt(m_sum)
  // Effective scalar links h_ld^H f_ld'[m] and w_ld^H h_ld'[mbar].
  std::vector<cdouble> dl_link;  // [((l * D + d) * D + dp) * M + m]
  std::vector<cdouble> ul_link;  // [((l * D + d) * D + dp) * Mbar + mbar]
  std::vector<double> dl_signal, ul_signal, ul_noise;
};

OracleSetup make_setup(const ChannelSet& ch, const Beamformers& bf, const PowerAllocation& pa,
                       const NetworkConfig& cfg) {
  OracleSetup s;
  s.L = ch.L();
  s.D = ch.D();
  s.N = ch.N();
  s.M = ch.M();
  s.Mbar = ch.Mbar();
  s.U = ch.U();
  s.m_sum = ch.M_sum();
  const std::size_t L = s.L, D = s.D, N = s.N, M = s.M, Mbar = s.Mbar;
  s.sq_dl.resize(pa.p_dl.size());
  s.sq_ul.resize(pa.p_ul.size());
  for (std::size_t i = 0; i < pa.p_dl.size(); ++i) s.sq_dl[i] = std::sqrt(pa.p_dl[i]);
  for (std::size_t i = 0; i < pa.p_ul.size(); ++i) s.sq_ul[i] = std::sqrt(pa.p_ul[i]);

  s.twiddle.resize(s.m_sum * s.U);
  const double scale = 1.0 / std::sqrt(static_cast<double>(s.m_sum));
  for (std::size_t k = 0; k < s.m_sum; ++k) {
    for (std::size_t u = 0; u < s.U; ++u) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * u) % s.m_sum) /
                           static_cast<double>(s.m_sum);
      s.twiddle[k * s.U + u] = std::polar(scale, angle);
    }
  }

  s.dl_link.assign(L * D * D * M, cdouble{});
  s.ul_link.assign(L * D * D * Mbar, cdouble{});
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t dp = 0; dp < D; ++dp) {
        for (std::size_t m = 0; m < M; ++m) {
          const auto h = ch.h_dl(l, d, m);
          const auto& f = bf.dl[l * M + m];
          cdouble acc{};
          for (std::size_t n = 0; n < N; ++n) {
            acc += std::conj(h[n]) * f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dp));
          }
          s.dl_link[((l * D + d) * D + dp) * M + m] = acc;
        }
        for (std::size_t mb = 0; mb < Mbar; ++mb) {
          const auto h = ch.h_ul(l, dp, mb);
          const auto& w = bf.ul[l * Mbar + mb];
          cdouble acc{};
          for (std::size_t n = 0; n < N; ++n) {
            acc += std::conj(w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d))) * h[n];
          }
          s.ul_link[((l * D + d) * D + dp) * Mbar + mb] = acc;
        }
      }
    }
  }

  s.dl_signal.assign(D * M, 0.0);
  s.ul_signal.assign(D * Mbar, 0.0);
  s.ul_noise.assign(D * Mbar, 0.0);
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t m = 0; m < M; ++m) {
      cdouble acc{};
      for (std::size_t l = 0; l < L; ++l) {
        acc += s.sq_dl[(l * D + d) * M + m] * s.dl_link[((l * D + d) * D + d) * M + m];
      }
      s.dl_signal[d * M + m] = std::norm(acc);
    }
    for (std::size_t mb = 0; mb < Mbar; ++mb) {
      cdouble acc{};
      double wnorm = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        acc += s.ul_link[((l * D + d) * D + d) * Mbar + mb];
        wnorm += bf.ul[l * Mbar + mb].col(static_cast<Eigen::Index>(d)).squaredNorm();
      }
      s.ul_signal[d * Mbar + mb] = pa.ul(d, mb) * std::norm(acc);
      s.ul_noise[d * Mbar + mb] = cfg.sigma2 * wnorm;
    }
  }
  return s;
}

// Subcarrier k response of a freshly drawn CIR with variance beta/U per tap.
void draw_response(Rng& rng, const OracleSetup& s, double beta, std::size_t k0, std::size_t count,
                   cdouble* out) {
  cdouble taps[64];
  std::vector<cdouble> heap;
  cdouble* g = taps;
  if (s.U > 64) {
    heap.resize(s.U);
    g = heap.data();
  }
  const double var = beta / static_cast<double>(s.U);
  for (std::size_t u = 0; u < s.U; ++u) g[u] = draw_cn(rng, var);
  for (std::size_t i = 0; i < count; ++i) {
    const cdouble* tw = &s.twiddle[(k0 + i) * s.U];
    cdouble acc{};
    for (std::size_t u = 0; u < s.U; ++u) acc += tw[u] * g[u];
    out[i] = acc;
  }
}

// Interference-power sums of one chunk: D*M DL entries followed by D*Mbar UL.
std::vector<double> run_chunk(const OracleSetup& s, const ChannelSet& ch, const Beamformers& bf,
                              const NetworkConfig& cfg, std::size_t trials, std::uint64_t seed) {
  const std::size_t L = s.L, D = s.D, N = s.N, M = s.M, Mbar = s.Mbar;
  std::vector<double> acc(D * M + D * Mbar, 0.0);
  Rng rng(seed);
  std::vector<cdouble> x_dl(D * M), x_ul(D * Mbar);
  std::vector<cdouble> s_sub(L * M * N);  // s_l[m]
  std::vector<cdouble> s_sum(L * N);      // sum_m s_l[m]
  std::vector<cdouble> v(L * N);          // residual SI + IAI at each AP
  std::vector<cdouble> resp(std::max(M, Mbar));
  const double sq_imi = std::sqrt(cfg.xi_imi);
  const double sq_iai = std::sqrt(cfg.xi_iai);

  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& x : x_dl) x = draw_cn(rng, 1.0);
    for (auto& x : x_ul) x = draw_cn(rng, 1.0);

    // DL: MUI on each subcarrier, SI and IMI from the UL transmissions.
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t m = 0; m < M; ++m) {
        cdouble mui{};
        for (std::size_t l = 0; l < L; ++l) {
          for (std::size_t dp = 0; dp < D; ++dp) {
            if (dp == d) continue;
            mui += s.sq_dl[(l * D + dp) * M + m] * s.dl_link[((l * D + d) * D + dp) * M + m] *
                   x_dl[dp * M + m];
          }
        }
        acc[d * M + m] += std::norm(mui);
      }
      const cdouble h_si = draw_cn(rng, cfg.xi_si_ms);
      cdouble z_si{};
      for (std::size_t mb = 0; mb < Mbar; ++mb) z_si += s.sq_ul[d * Mbar + mb] * x_ul[d * Mbar + mb];
      z_si *= h_si;
      cdouble z_imi{};
      for (std::size_t dp = 0; dp < D; ++dp) {
        if (dp == d) continue;
        draw_response(rng, s, ch.beta_dd(d, dp), M, Mbar, resp.data());
        for (std::size_t mb = 0; mb < Mbar; ++mb) {
          z_imi += s.sq_ul[dp * Mbar + mb] * resp[mb] * x_ul[dp * Mbar + mb];
        }
      }
      z_imi *= sq_imi;
      const double p = std::norm(z_si) + std::norm(z_imi);
      for (std::size_t m = 0; m < M; ++m) acc[d * M + m] += p;
    }

    // Transmit vectors s_l[m] = sum_d sqrt(p_ldm) f_ld[m] x_d[m].
    std::fill(s_sub.begin(), s_sub.end(), cdouble{});
    std::fill(s_sum.begin(), s_sum.end(), cdouble{});
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t m = 0; m < M; ++m) {
        const auto& f = bf.dl[l * M + m];
        for (std::size_t d = 0; d < D; ++d) {
          const cdouble c = s.sq_dl[(l * D + d) * M + m] * x_dl[d * M + m];
          if (c == cdouble{}) continue;
          for (std::size_t n = 0; n < N; ++n) {
            s_sub[(l * M + m) * N + n] +=
                c * f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
          }
        }
        for (std::size_t n = 0; n < N; ++n) s_sum[l * N + n] += s_sub[(l * M + m) * N + n];
      }
    }
    // Residual SI through a fresh N x N SI channel, IAI through fresh inter-AP
    // channels on each DL subcarrier.
    std::fill(v.begin(), v.end(), cdouble{});
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t i = 0; i < N; ++i) {
        cdouble si{};
        for (std::size_t j = 0; j < N; ++j) si += draw_cn(rng, cfg.xi_si_ap) * s_sum[l * N + j];
        v[l * N + i] += si;
      }
      for (std::size_t lp = 0; lp < L; ++lp) {
        if (lp == l) continue;
        for (std::size_t i = 0; i < N; ++i) {
          cdouble iai{};
          for (std::size_t j = 0; j < N; ++j) {
            draw_response(rng, s, ch.beta_ll(l, lp), 0, M, resp.data());
            for (std::size_t m = 0; m < M; ++m) iai += resp[m] * s_sub[(lp * M + m) * N + j];
          }
          v[l * N + i] += sq_iai * iai;
        }
      }
    }
    // UL: MUI after combining plus per-AP combined residual interference.
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t mb = 0; mb < Mbar; ++mb) {
        cdouble mui{};
        for (std::size_t dp = 0; dp < D; ++dp) {
          if (dp == d) continue;
          cdouble link{};
          for (std::size_t l = 0; l < L; ++l) link += s.ul_link[((l * D + d) * D + dp) * Mbar + mb];
          mui += s.sq_ul[dp * Mbar + mb] * link * x_ul[dp * Mbar + mb];
        }
        double p = std::norm(mui);
        for (std::size_t l = 0; l < L; ++l) {
          const auto& w = bf.ul[l * Mbar + mb];
          cdouble y{};
          for (std::size_t n = 0; n < N; ++n) {
            y += std::conj(w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d))) *
                 v[l * N + n];
          }
          p += std::norm(y);
        }
        acc[D * M + d * Mbar + mb] += p;
      }
    }
  }
  return acc;
}

std::size_t chunk_count(std::size_t draws) { return (draws + kOracleChunk - 1) / kOracleChunk; }

std::size_t chunk_trials(std::size_t draws, std::size_t c) {
  return std::min(kOracleChunk, draws - c * kOracleChunk);
}

std::uint64_t chunk_seed(std::uint64_t seed, std::size_t c) {
  return mix_seed(derive_seed(seed, Stream::kOracle), c);
}

SinrTable finish(const OracleSetup& s, const std::vector<std::vector<double>>& chunks,
                 const NetworkConfig& cfg, std::size_t draws) {
  std::vector<double> total(s.D * s.M + s.D * s.Mbar, 0.0);
  for (const auto& c : chunks) {
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += c[i];
  }
  const double inv = 1.0 / static_cast<double>(draws);
  SinrTable out;
  out.D = s.D;
  out.M = s.M;
  out.Mbar = s.Mbar;
  out.dl.resize(s.D * s.M);
  out.ul.resize(s.D * s.Mbar);
  for (std::size_t i = 0; i < out.dl.size(); ++i) {
    out.dl[i] = s.dl_signal[i] / (total[i] * inv + cfg.sigma2);
  }
  for (std::size_t i = 0; i < out.ul.size(); ++i) {
    out.ul[i] = s.ul_signal[i] / (total[s.D * s.M + i] * inv + s.ul_noise[i]);
  }
  return out;
}

void check_inputs(const ChannelSet& ch, const Beamformers& bf, const PowerAllocation& pa,
                  std::size_t draws) {
  if (draws < 1000) throw InvalidInputError("oracle needs at least 1000 draws");
  if (bf.L != ch.L() || bf.D != ch.D() || pa.L != ch.L() || pa.D != ch.D() || pa.M != ch.M() ||
      pa.Mbar != ch.Mbar()) {
    throw InvalidInputError("oracle inputs describe different networks");
  }
  if (!pa.nonnegative()) throw InvalidInputError("power allocation has negative entries");
}

}  // namespace

SinrTable mc_interference_oracle(const ChannelSet& channels, const Beamformers& beamformers,
                                 const PowerAllocation& pa, const NetworkConfig& config,
                                 std::size_t draws, std::uint64_t seed) {
  check_inputs(channels, beamformers, pa, draws);
  const OracleSetup s = make_setup(channels, beamformers, pa, config);
  const std::size_t n = chunk_count(draws);
  std::vector<std::vector<double>> chunks(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < n; ++c) {
    chunks[c] = run_chunk(s, channels, beamformers, config, chunk_trials(draws, c),
                          chunk_seed(seed, c));
  }
  return finish(s, chunks, config, draws);
}

SinrTable mc_interference_oracle_serial(const ChannelSet& channels,
                                        const Beamformers& beamformers,
                                        const PowerAllocation& pa, const NetworkConfig& config,
                                        std::size_t draws, std::uint64_t seed) {
  check_inputs(channels, beamformers, pa, draws);
  const OracleSetup s = make_setup(channels, beamformers, pa, config);
  const std::size_t n = chunk_count(draws);
  std::vector<std::vector<double>> chunks(n);
  for (std::size_t c = 0; c < n; ++c) {
    chunks[c] = run_chunk(s, channels, beamformers, config, chunk_trials(draws, c),
                          chunk_seed(seed, c));
  }
  return finish(s, chunks, config, draws);
}

SinrTable analytic_sinr_table(const SinrModel& model, const PowerAllocation& pa) {
  SinrTable t;
  t.D = model.D();
  t.M = model.M();
  t.Mbar = model.Mbar();
  t.dl.resize(t.D * t.M);
  t.ul.resize(t.D * t.Mbar);
  for (std::size_t d = 0; d < t.D; ++d) {
    for (std::size_t m = 0; m < t.M; ++m) t.dl[d * t.M + m] = model.sinr_dl(pa, d, m);
    for (std::size_t mb = 0; mb < t.Mbar; ++mb) t.ul[d * t.Mbar + mb] = model.sinr_ul(pa, d, mb);
  }
  return t;
}

}  // namespace cfmdd
