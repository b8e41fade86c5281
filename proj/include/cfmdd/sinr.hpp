#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "cfmdd/beamforming.hpp"
#include "cfmdd/channel.hpp"
#include "cfmdd/config.hpp"

namespace cfmdd {

/// DL powers p_ldm and UL powers p_dmbar, in watts.
struct PowerAllocation {
  std::size_t L = 0, D = 0, M = 0, Mbar = 0;
  std::vector<double> p_dl;  // [(l * D + d) * M + m]
  std::vector<double> p_ul;  // [d * Mbar + mbar]

  PowerAllocation() = default;
  PowerAllocation(std::size_t L, std::size_t D, std::size_t M, std::size_t Mbar)
      : L(L), D(D), M(M), Mbar(Mbar), p_dl(L * D * M, 0.0), p_ul(D * Mbar, 0.0) {}
  static PowerAllocation zeros_like(const NetworkConfig& c) {
    return PowerAllocation(c.L, c.D, c.M, c.Mbar);
  }

  double& dl(std::size_t l, std::size_t d, std::size_t m) { return p_dl[(l * D + d) * M + m]; }
  double dl(std::size_t l, std::size_t d, std::size_t m) const {
    return p_dl[(l * D + d) * M + m];
  }
  double& ul(std::size_t d, std::size_t mbar) { return p_ul[d * Mbar + mbar]; }
  double ul(std::size_t d, std::size_t mbar) const { return p_ul[d * Mbar + mbar]; }

  double ap_total(std::size_t l) const;
  double ms_total(std::size_t d) const;
  bool nonnegative() const;
  /// Budgets hold with relative slack `rel_tol`.
  bool within_budgets(double P_l, double P_d, double rel_tol = 1e-12) const;

  bool operator==(const PowerAllocation&) const = default;
};

struct QosMargin {
  double dl = 0.0;  // sum_m ln(1 + SINR_dm) - chi_DL
  double ul = 0.0;  // sum_mbar ln(1 + SINR_dmbar) - chi_UL
};

/// Penalty weights kappa_1..kappa_4 of the unsupervised training loss
/// (DL QoS, UL QoS, MS budget, AP budget).
using PenaltyWeights = std::array<double, 4>;

/// Precomputed linear interference structure of one instance. DL SINR of
/// (d, m) is (sum_l sqrt(p_ldm) omega_ldm)^2 / B_d where B_d is affine in the
/// per-MS UL totals; UL SINR of (d, mbar) is p_dmbar L_d^2 / B_dmbar where
/// B_dmbar is affine in the per-AP DL totals.
class SinrModel {
 public:
  SinrModel(const EquivalentGains& gains, const ChannelSet& channels,
            const NetworkConfig& config);

  std::size_t L() const { return L_; }
  std::size_t D() const { return D_; }
  std::size_t M() const { return M_; }
  std::size_t Mbar() const { return Mbar_; }
  std::size_t M_sum() const { return M_ + Mbar_; }
  double sigma2() const { return sigma2_; }
  const EquivalentGains& gains() const { return gains_; }

  /// Coefficient of MS d''s UL total inside the DL denominator of MS d.
  double dl_coupling(std::size_t d, std::size_t dp) const { return dl_coupling_[d * D_ + dp]; }
  /// Coefficient of AP l''s DL total inside the UL denominator of (d, mbar).
  double ul_coupling(std::size_t d, std::size_t mbar, std::size_t l) const {
    return ul_coupling_[(d * Mbar_ + mbar) * L_ + l];
  }
  /// Noise part sigma^2 * sum_{l serving d} upsilon_ldmbar.
  double ul_noise(std::size_t d, std::size_t mbar) const { return ul_noise_[d * Mbar_ + mbar]; }
  /// Number of APs combining MS d's UL signal.
  double serving_count(std::size_t d) const { return serving_count_[d]; }

  double dl_amplitude(const PowerAllocation& pa, std::size_t d, std::size_t m) const;
  double dl_denominator(const PowerAllocation& pa, std::size_t d) const;
  double ul_numerator(const PowerAllocation& pa, std::size_t d, std::size_t mbar) const;
  double ul_denominator(const PowerAllocation& pa, std::size_t d, std::size_t mbar) const;

  double sinr_dl(const PowerAllocation& pa, std::size_t d, std::size_t m) const;
  double sinr_ul(const PowerAllocation& pa, std::size_t d, std::size_t mbar) const;

  /// DL/UL rate sums sum ln(1+SINR) per MS.
  std::vector<double> dl_rates(const PowerAllocation& pa) const;
  std::vector<double> ul_rates(const PowerAllocation& pa) const;

  double spectral_efficiency(const PowerAllocation& pa) const;
  std::vector<QosMargin> qos_margins(const PowerAllocation& pa, double chi_dl,
                                     double chi_ul) const;

  /// -SE plus rectified QoS and budget penalties. When `grad` is non-null it
  /// receives d(loss)/dp; the derivative of sqrt(p) at p = 0 is taken as 0.
  double penalty_loss(const PowerAllocation& pa, const NetworkConfig& config,
                      const PenaltyWeights& kappa, PowerAllocation* grad = nullptr) const;

 private:
  void check(const PowerAllocation& pa) const;

  std::size_t L_, D_, M_, Mbar_;
  double sigma2_;
  EquivalentGains gains_;
  std::vector<double> dl_coupling_;   // D x D
  std::vector<double> ul_coupling_;   // (D * Mbar) x L
  std::vector<double> ul_noise_;      // D * Mbar
  std::vector<double> serving_count_; // D
};

double sinr_dl(const EquivalentGains& gains, const PowerAllocation& pa, const ChannelSet& channels,
               const NetworkConfig& config, std::size_t d, std::size_t m);
double sinr_ul(const EquivalentGains& gains, const PowerAllocation& pa, const ChannelSet& channels,
               const NetworkConfig& config, std::size_t d, std::size_t mbar);
double spectral_efficiency(const EquivalentGains& gains, const PowerAllocation& pa,
                           const ChannelSet& channels, const NetworkConfig& config);
std::vector<QosMargin> qos_margins(const EquivalentGains& gains, const PowerAllocation& pa,
                                   const ChannelSet& channels, const NetworkConfig& config);

}  // namespace cfmdd
