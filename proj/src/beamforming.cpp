#include "cfmdd/beamforming.hpp"

#include <Eigen/SVD>

#include "cfmdd/errors.hpp"

namespace cfmdd {

std::size_t ServingMask::aps_serving(std::size_t d) const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < L_; ++l) n += serves(l, d) ? 1 : 0;
  return n;
}

std::size_t ServingMask::ms_served_by(std::size_t l) const {
  std::size_t n = 0;
  for (std::size_t d = 0; d < D_; ++d) n += serves(l, d) ? 1 : 0;
  return n;
}

bool ServingMask::full() const {
  for (const auto v : mask_) {
    if (v == 0) return false;
  }
  return true;
}

namespace {

// Moore-Penrose pseudo-inverse of a full-row-rank (or full-column-rank) matrix
// A, via SVD; throws if the rank test fails.
Eigen::MatrixXcd checked_pinv(const Eigen::MatrixXcd& a, std::size_t l, std::size_t k) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double s_max = s.size() > 0 ? s(0) : 0.0;
  const double s_min = s.size() > 0 ? s(s.size() - 1) : 0.0;
  if (!(s_max > 0.0) || s_min < kRankThreshold * s_max) {
    throw RankDeficientError(l, k, s_max > 0.0 ? s_min / s_max : 0.0);
  }
  const Eigen::VectorXd inv = s.cwiseInverse();
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

std::vector<std::size_t> served_list(const ServingMask& serving, std::size_t l) {
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d < serving.D(); ++d) {
    if (serving.serves(l, d)) out.push_back(d);
  }
  return out;
}

}  // namespace

Beamformers zf_beamformers(const ChannelSet& channels, const NetworkConfig& config) {
  return zf_beamformers(channels, config, ServingMask(channels.L(), channels.D(), true));
}

Beamformers zf_beamformers(const ChannelSet& channels, const NetworkConfig& config,
                           const ServingMask& serving) {
  const std::size_t L = channels.L(), D = channels.D(), N = channels.N();
  const std::size_t M = channels.M(), Mbar = channels.Mbar();
  if (serving.L() != L || serving.D() != D) {
    throw ConfigError("serving mask shape does not match the channel set");
  }
  if (serving.full() && config.N < config.D) {
    throw ConfigError("zero-forcing requires N >= D (N=" + std::to_string(config.N) +
                      ", D=" + std::to_string(config.D) + ")");
  }
  Beamformers bf;
  bf.L = L;
  bf.D = D;
  bf.N = N;
  bf.M = M;
  bf.Mbar = Mbar;
  bf.serving = serving;
  bf.dl.assign(L * M, Eigen::MatrixXcd::Zero(N, D));
  bf.dl_unnormalized.assign(L * M, Eigen::MatrixXcd::Zero(N, D));
  bf.ul.assign(L * Mbar, Eigen::MatrixXcd::Zero(N, D));

  for (std::size_t l = 0; l < L; ++l) {
    const auto served = served_list(serving, l);
    if (served.empty()) continue;
    if (served.size() > N) {
      throw ConfigError("AP " + std::to_string(l) + " serves " +
                        std::to_string(served.size()) + " MSs with only " +
                        std::to_string(N) + " antennas");
    }
    const auto S = static_cast<Eigen::Index>(served.size());
    for (std::size_t m = 0; m < M; ++m) {
      // Rows are h_ld^H[m] for the served MSs.
      Eigen::MatrixXcd H(S, static_cast<Eigen::Index>(N));
      for (Eigen::Index r = 0; r < S; ++r) {
        const auto h = channels.h_dl(l, served[static_cast<std::size_t>(r)], m);
        for (std::size_t n = 0; n < N; ++n) H(r, static_cast<Eigen::Index>(n)) = std::conj(h[n]);
      }
      const Eigen::MatrixXcd F = checked_pinv(H, l, m);  // N x S
      for (Eigen::Index c = 0; c < S; ++c) {
        const auto d = static_cast<Eigen::Index>(served[static_cast<std::size_t>(c)]);
        bf.dl_unnormalized[l * M + m].col(d) = F.col(c);
        bf.dl[l * M + m].col(d) = F.col(c) / F.col(c).norm();
      }
    }
    for (std::size_t mb = 0; mb < Mbar; ++mb) {
      Eigen::MatrixXcd H(static_cast<Eigen::Index>(N), S);
      for (Eigen::Index c = 0; c < S; ++c) {
        const auto h = channels.h_ul(l, served[static_cast<std::size_t>(c)], mb);
        for (std::size_t n = 0; n < N; ++n) H(static_cast<Eigen::Index>(n), c) = h[n];
      }
      // W = H (H^H H)^-1 = pinv(H)^H.
      const Eigen::MatrixXcd W = checked_pinv(H, l, M + mb).adjoint();
      for (Eigen::Index c = 0; c < S; ++c) {
        const auto d = static_cast<Eigen::Index>(served[static_cast<std::size_t>(c)]);
        bf.ul[l * Mbar + mb].col(d) = W.col(c);
      }
    }
  }
  return bf;
}

EquivalentGains equivalent_gains(const Beamformers& bf, const ChannelSet& channels) {
  (void)channels;
  EquivalentGains g(bf.L, bf.D, bf.M, bf.Mbar);
  g.serving = bf.serving;
  for (std::size_t l = 0; l < bf.L; ++l) {
    for (std::size_t d = 0; d < bf.D; ++d) {
      if (!bf.serving.serves(l, d)) continue;
      const auto dc = static_cast<Eigen::Index>(d);
      for (std::size_t m = 0; m < bf.M; ++m) {
        g.w(l, d, m) = 1.0 / bf.dl_unnormalized[l * bf.M + m].col(dc).norm();
      }
      for (std::size_t mb = 0; mb < bf.Mbar; ++mb) {
        g.v(l, d, mb) = bf.ul[l * bf.Mbar + mb].col(dc).squaredNorm();
      }
    }
  }
  return g;
}

EquivalentGains single_user_gains(const ChannelSet& channels) {
  EquivalentGains g(channels.L(), channels.D(), channels.M(), channels.Mbar());
  for (std::size_t l = 0; l < channels.L(); ++l) {
    for (std::size_t d = 0; d < channels.D(); ++d) {
      for (std::size_t m = 0; m < channels.M(); ++m) {
        double e = 0.0;
        for (const auto& x : channels.h_dl(l, d, m)) e += std::norm(x);
        g.w(l, d, m) = std::sqrt(e);
      }
      for (std::size_t mb = 0; mb < channels.Mbar(); ++mb) {
        double e = 0.0;
        for (const auto& x : channels.h_ul(l, d, mb)) e += std::norm(x);
        g.v(l, d, mb) = e > 0.0 ? 1.0 / e : 0.0;
      }
    }
  }
  return g;
}

}  // namespace cfmdd
