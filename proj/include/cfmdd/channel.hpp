#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "cfmdd/config.hpp"
#include "cfmdd/rng.hpp"

namespace cfmdd {

using cdouble = std::complex<double>;
using Point = std::array<double, 2>;

struct Topology {
  std::vector<Point> ap_positions;
  std::vector<Point> ms_positions;
};

/// Uniform placement of L APs then D MSs over [0, S_D]^2.
Topology generate_topology(const NetworkConfig& config, std::uint64_t seed);

double distance(const Point& a, const Point& b);

/// Links shorter than this are evaluated at this distance.
inline constexpr double kMinLinkDistance = 1.0;

/// Path loss plus shadowing, returned as a linear power gain:
/// 10^((-30.5 - 36.7 log10(d) + sigma_sh * z) / 10). Throws ConfigError for
/// d <= 0.
double large_scale_fading(double distance_m, double shadow_draw, double sigma_sh = 4.0);

/// Frequency response h = F * Psi * g of a CIR, where F is the unitary DFT of
/// size m_sum and Psi places the taps at the first cir.size() delays.
std::vector<cdouble> subcarrier_channels(std::span<const cdouble> cir, std::size_t m_sum);

/// Draws `taps` i.i.d. CN(0, beta / taps) coefficients.
std::vector<cdouble> draw_cir(Rng& rng, double beta, std::size_t taps);

/// Large-scale gains, CIRs, subcarrier responses and SI channels for one
/// network instance. Subcarriers 0..M-1 carry DL, M..M+Mbar-1 carry UL.
class ChannelSet {
 public:
  ChannelSet() = default;
  ChannelSet(std::size_t L, std::size_t D, std::size_t N, std::size_t M, std::size_t Mbar,
             std::size_t U);

  std::size_t L() const { return L_; }
  std::size_t D() const { return D_; }
  std::size_t N() const { return N_; }
  std::size_t M() const { return M_; }
  std::size_t Mbar() const { return Mbar_; }
  std::size_t M_sum() const { return M_ + Mbar_; }
  std::size_t U() const { return U_; }

  double& beta_ld(std::size_t l, std::size_t d) { return beta_ld_[l * D_ + d]; }
  double beta_ld(std::size_t l, std::size_t d) const { return beta_ld_[l * D_ + d]; }
  double& beta_ll(std::size_t l, std::size_t lp) { return beta_ll_[l * L_ + lp]; }
  double beta_ll(std::size_t l, std::size_t lp) const { return beta_ll_[l * L_ + lp]; }
  double& beta_dd(std::size_t d, std::size_t dp) { return beta_dd_[d * D_ + dp]; }
  double beta_dd(std::size_t d, std::size_t dp) const { return beta_dd_[d * D_ + dp]; }

  /// U taps of the link between MS d and antenna n of AP l.
  std::span<cdouble> cir(std::size_t l, std::size_t d, std::size_t n) {
    return {taps_.data() + ((l * D_ + d) * N_ + n) * U_, U_};
  }
  std::span<const cdouble> cir(std::size_t l, std::size_t d, std::size_t n) const {
    return {taps_.data() + ((l * D_ + d) * N_ + n) * U_, U_};
  }

  /// N-vector h_ld[k] on absolute subcarrier k in [0, M_sum).
  std::span<cdouble> h(std::size_t l, std::size_t d, std::size_t k) {
    return {freq_.data() + ((l * D_ + d) * M_sum() + k) * N_, N_};
  }
  std::span<const cdouble> h(std::size_t l, std::size_t d, std::size_t k) const {
    return {freq_.data() + ((l * D_ + d) * M_sum() + k) * N_, N_};
  }
  std::span<const cdouble> h_dl(std::size_t l, std::size_t d, std::size_t m) const {
    return h(l, d, m);
  }
  std::span<const cdouble> h_ul(std::size_t l, std::size_t d, std::size_t mbar) const {
    return h(l, d, M_ + mbar);
  }

  /// Row-major N x N SI channel of AP l.
  std::span<cdouble> si_ap(std::size_t l) { return {si_ap_.data() + l * N_ * N_, N_ * N_}; }
  std::span<const cdouble> si_ap(std::size_t l) const {
    return {si_ap_.data() + l * N_ * N_, N_ * N_};
  }
  cdouble& si_ms(std::size_t d) { return si_ms_[d]; }
  cdouble si_ms(std::size_t d) const { return si_ms_[d]; }

  /// Recomputes every subcarrier response from the stored CIRs.
  void refresh_frequency_response();

  bool operator==(const ChannelSet&) const = default;

 private:
  std::size_t L_ = 0, D_ = 0, N_ = 0, M_ = 0, Mbar_ = 0, U_ = 0;
  std::vector<double> beta_ld_, beta_ll_, beta_dd_;
  std::vector<cdouble> taps_;
  std::vector<cdouble> freq_;
  std::vector<cdouble> si_ap_;
  std::vector<cdouble> si_ms_;
};

/// Large-scale gains for all AP-MS, AP-AP and MS-MS pairs (one shadowing draw
/// per unordered pair), CIR taps with variance beta/U, SI draws with variance
/// xi^SI, and the derived subcarrier responses. Deterministic in `seed`.
ChannelSet draw_channels(const Topology& topology, const NetworkConfig& config,
                         std::uint64_t seed);

}  // namespace cfmdd
