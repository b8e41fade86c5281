#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "cfmdd/channel.hpp"
#include "cfmdd/config.hpp"

namespace cfmdd {

/// Smallest-to-largest singular value ratio below which a stacked channel
/// matrix is treated as rank-deficient.
inline constexpr double kRankThreshold = 1e-10;

/// AP-MS service pattern. Full service (every AP serves every MS) is the
/// default; user-centric clustering produces sparse patterns.
class ServingMask {
 public:
  ServingMask() = default;
  ServingMask(std::size_t L, std::size_t D, bool value = true)
      : L_(L), D_(D), mask_(L * D, value ? 1 : 0) {}

  std::size_t L() const { return L_; }
  std::size_t D() const { return D_; }
  bool serves(std::size_t l, std::size_t d) const { return mask_[l * D_ + d] != 0; }
  void set(std::size_t l, std::size_t d, bool v) { mask_[l * D_ + d] = v ? 1 : 0; }
  std::size_t aps_serving(std::size_t d) const;
  std::size_t ms_served_by(std::size_t l) const;
  bool full() const;

  bool operator==(const ServingMask&) const = default;

 private:
  std::size_t L_ = 0, D_ = 0;
  std::vector<std::uint8_t> mask_;
};

/// Per-AP, per-subcarrier ZF beamformers stored as N x D matrices; column d
/// is the vector for MS d (zero when AP l does not serve d).
struct Beamformers {
  std::size_t L = 0, D = 0, N = 0, M = 0, Mbar = 0;
  std::vector<Eigen::MatrixXcd> dl;  // [l * M + m]: unit-norm precoders f_ld[m]
  std::vector<Eigen::MatrixXcd> ul;  // [l * Mbar + mbar]: unnormalized combiners w_ld[mbar]
  std::vector<Eigen::MatrixXcd> dl_unnormalized;  // pseudo-inverse columns before normalization
  ServingMask serving;

  const Eigen::MatrixXcd& precoders(std::size_t l, std::size_t m) const { return dl[l * M + m]; }
  const Eigen::MatrixXcd& combiners(std::size_t l, std::size_t mbar) const {
    return ul[l * Mbar + mbar];
  }
};

/// Scalars that fully determine the simplified SINRs:
/// omega_ldm = 1/||f^ZF_ld[m]|| and upsilon_ldmbar = ||w^ZF_ld[mbar]||^2.
/// Entries of unserved pairs are zero.
struct EquivalentGains {
  std::size_t L = 0, D = 0, M = 0, Mbar = 0;
  std::vector<double> omega;    // [(l * D + d) * M + m]
  std::vector<double> upsilon;  // [(l * D + d) * Mbar + mbar]
  ServingMask serving;

  EquivalentGains() = default;
  EquivalentGains(std::size_t L, std::size_t D, std::size_t M, std::size_t Mbar)
      : L(L), D(D), M(M), Mbar(Mbar), omega(L * D * M, 0.0), upsilon(L * D * Mbar, 0.0),
        serving(L, D, true) {}

  double& w(std::size_t l, std::size_t d, std::size_t m) { return omega[(l * D + d) * M + m]; }
  double w(std::size_t l, std::size_t d, std::size_t m) const {
    return omega[(l * D + d) * M + m];
  }
  double& v(std::size_t l, std::size_t d, std::size_t mbar) {
    return upsilon[(l * D + d) * Mbar + mbar];
  }
  double v(std::size_t l, std::size_t d, std::size_t mbar) const {
    return upsilon[(l * D + d) * Mbar + mbar];
  }

  bool operator==(const EquivalentGains&) const = default;
};

/// Full-service ZF: F = H^H (H H^H)^-1 per (AP, DL subcarrier) with columns
/// normalized, W = H (H^H H)^-1 per (AP, UL subcarrier). Requires N >= D;
/// throws RankDeficientError naming (l, subcarrier).
Beamformers zf_beamformers(const ChannelSet& channels, const NetworkConfig& config);

/// ZF restricted to the MSs each AP serves (at most N per AP).
Beamformers zf_beamformers(const ChannelSet& channels, const NetworkConfig& config,
                           const ServingMask& serving);

EquivalentGains equivalent_gains(const Beamformers& beamformers, const ChannelSet& channels);

/// Per-link single-user gains ||h_ld[m]|| (the ZF gain if AP l served MS d
/// alone); used to rank links before clustering.
EquivalentGains single_user_gains(const ChannelSet& channels);

}  // namespace cfmdd
