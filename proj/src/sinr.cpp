#include "cfmdd/sinr.hpp"

#include <cmath>

#include "cfmdd/errors.hpp"

namespace cfmdd {

double PowerAllocation::ap_total(std::size_t l) const {
  double s = 0.0;
  for (std::size_t i = l * D * M; i < (l + 1) * D * M; ++i) s += p_dl[i];
  return s;
}

double PowerAllocation::ms_total(std::size_t d) const {
  double s = 0.0;
  for (std::size_t i = d * Mbar; i < (d + 1) * Mbar; ++i) s += p_ul[i];
  return s;
}

bool PowerAllocation::nonnegative() const {
  for (const double p : p_dl) {
    if (!(p >= 0.0)) return false;
  }
  for (const double p : p_ul) {
    if (!(p >= 0.0)) return false;
  }
  return true;
}

bool PowerAllocation::within_budgets(double P_l, double P_d, double rel_tol) const {
  for (std::size_t l = 0; l < L; ++l) {
    if (ap_total(l) > P_l * (1.0 + rel_tol)) return false;
  }
  for (std::size_t d = 0; d < D; ++d) {
    if (ms_total(d) > P_d * (1.0 + rel_tol)) return false;
  }
  return true;
}

SinrModel::SinrModel(const EquivalentGains& gains, const ChannelSet& channels,
                     const NetworkConfig& config)
    : L_(gains.L),
      D_(gains.D),
      M_(gains.M),
      Mbar_(gains.Mbar),
      sigma2_(config.sigma2),
      gains_(gains),
      dl_coupling_(D_ * D_, 0.0),
      ul_coupling_(D_ * Mbar_ * L_, 0.0),
      ul_noise_(D_ * Mbar_, 0.0),
      serving_count_(D_, 0.0) {
  if (channels.L() != L_ || channels.D() != D_) {
    throw InvalidInputError("gains and channel set describe different networks");
  }
  const double m_sum = static_cast<double>(M_ + Mbar_);
  for (std::size_t d = 0; d < D_; ++d) {
    for (std::size_t dp = 0; dp < D_; ++dp) {
      dl_coupling_[d * D_ + dp] =
          dp == d ? config.xi_si_ms : config.xi_imi * channels.beta_dd(d, dp) / m_sum;
    }
  }
  for (std::size_t d = 0; d < D_; ++d) {
    serving_count_[d] = static_cast<double>(gains.serving.aps_serving(d));
    for (std::size_t mb = 0; mb < Mbar_; ++mb) {
      double noise = 0.0;
      double* row = &ul_coupling_[(d * Mbar_ + mb) * L_];
      for (std::size_t l = 0; l < L_; ++l) {
        if (!gains.serving.serves(l, d)) continue;
        const double v = gains.v(l, d, mb);
        noise += v;
        for (std::size_t lp = 0; lp < L_; ++lp) {
          const double c =
              lp == l ? config.xi_si_ap : config.xi_iai * channels.beta_ll(l, lp) / m_sum;
          row[lp] += v * c;
        }
      }
      ul_noise_[d * Mbar_ + mb] = sigma2_ * noise;
    }
  }
}

void SinrModel::check(const PowerAllocation& pa) const {
  if (pa.L != L_ || pa.D != D_ || pa.M != M_ || pa.Mbar != Mbar_) {
    throw InvalidInputError("power allocation shape does not match the network");
  }
  if (!pa.nonnegative()) throw InvalidInputError("power allocation has negative entries");
}

double SinrModel::dl_amplitude(const PowerAllocation& pa, std::size_t d, std::size_t m) const {
  double a = 0.0;
  for (std::size_t l = 0; l < L_; ++l) a += std::sqrt(pa.dl(l, d, m)) * gains_.w(l, d, m);
  return a;
}

double SinrModel::dl_denominator(const PowerAllocation& pa, std::size_t d) const {
  double b = sigma2_;
  for (std::size_t dp = 0; dp < D_; ++dp) b += dl_coupling(d, dp) * pa.ms_total(dp);
  return b;
}

double SinrModel::ul_numerator(const PowerAllocation& pa, std::size_t d, std::size_t mbar) const {
  return pa.ul(d, mbar) * serving_count_[d] * serving_count_[d];
}

double SinrModel::ul_denominator(const PowerAllocation& pa, std::size_t d,
                                 std::size_t mbar) const {
  double b = ul_noise(d, mbar);
  for (std::size_t l = 0; l < L_; ++l) b += ul_coupling(d, mbar, l) * pa.ap_total(l);
  return b;
}

double SinrModel::sinr_dl(const PowerAllocation& pa, std::size_t d, std::size_t m) const {
  check(pa);
  const double a = dl_amplitude(pa, d, m);
  return a * a / dl_denominator(pa, d);
}

double SinrModel::sinr_ul(const PowerAllocation& pa, std::size_t d, std::size_t mbar) const {
  check(pa);
  const double num = ul_numerator(pa, d, mbar);
  if (num == 0.0) return 0.0;
  return num / ul_denominator(pa, d, mbar);
}

std::vector<double> SinrModel::dl_rates(const PowerAllocation& pa) const {
  check(pa);
  std::vector<double> r(D_, 0.0);
  for (std::size_t d = 0; d < D_; ++d) {
    const double b = dl_denominator(pa, d);
    for (std::size_t m = 0; m < M_; ++m) {
      const double a = dl_amplitude(pa, d, m);
      r[d] += std::log1p(a * a / b);
    }
  }
  return r;
}

std::vector<double> SinrModel::ul_rates(const PowerAllocation& pa) const {
  check(pa);
  std::vector<double> totals(L_);
  for (std::size_t l = 0; l < L_; ++l) totals[l] = pa.ap_total(l);
  std::vector<double> r(D_, 0.0);
  for (std::size_t d = 0; d < D_; ++d) {
    for (std::size_t mb = 0; mb < Mbar_; ++mb) {
      const double num = ul_numerator(pa, d, mb);
      if (num == 0.0) continue;
      double b = ul_noise(d, mb);
      for (std::size_t l = 0; l < L_; ++l) b += ul_coupling(d, mb, l) * totals[l];
      r[d] += std::log1p(num / b);
    }
  }
  return r;
}

double SinrModel::spectral_efficiency(const PowerAllocation& pa) const {
  const auto dl = dl_rates(pa);
  const auto ul = ul_rates(pa);
  double s = 0.0;
  for (std::size_t d = 0; d < D_; ++d) s += dl[d] + ul[d];
  return s / static_cast<double>(M_sum());
}

std::vector<QosMargin> SinrModel::qos_margins(const PowerAllocation& pa, double chi_dl,
                                              double chi_ul) const {
  const auto dl = dl_rates(pa);
  const auto ul = ul_rates(pa);
  std::vector<QosMargin> out(D_);
  for (std::size_t d = 0; d < D_; ++d) out[d] = {dl[d] - chi_dl, ul[d] - chi_ul};
  return out;
}

double SinrModel::penalty_loss(const PowerAllocation& pa, const NetworkConfig& config,
                               const PenaltyWeights& kappa, PowerAllocation* grad) const {
  check(pa);
  const double inv_msum = 1.0 / static_cast<double>(M_sum());
  std::vector<double> ap_tot(L_), ms_tot(D_);
  for (std::size_t l = 0; l < L_; ++l) ap_tot[l] = pa.ap_total(l);
  for (std::size_t d = 0; d < D_; ++d) ms_tot[d] = pa.ms_total(d);

  std::vector<double> dl_b(D_), dl_a(D_ * M_), dl_rate(D_, 0.0);
  for (std::size_t d = 0; d < D_; ++d) {
    double b = sigma2_;
    for (std::size_t dp = 0; dp < D_; ++dp) b += dl_coupling(d, dp) * ms_tot[dp];
    dl_b[d] = b;
    for (std::size_t m = 0; m < M_; ++m) {
      const double a = dl_amplitude(pa, d, m);
      dl_a[d * M_ + m] = a;
      dl_rate[d] += std::log1p(a * a / b);
    }
  }
  std::vector<double> ul_b(D_ * Mbar_), ul_rate(D_, 0.0);
  for (std::size_t d = 0; d < D_; ++d) {
    for (std::size_t mb = 0; mb < Mbar_; ++mb) {
      double b = ul_noise(d, mb);
      for (std::size_t l = 0; l < L_; ++l) b += ul_coupling(d, mb, l) * ap_tot[l];
      ul_b[d * Mbar_ + mb] = b;
      ul_rate[d] += std::log1p(ul_numerator(pa, d, mb) / b);
    }
  }

  double loss = 0.0;
  for (std::size_t d = 0; d < D_; ++d) {
    loss -= (dl_rate[d] + ul_rate[d]) * inv_msum;
    loss += kappa[0] * std::max(0.0, config.chi_dl - dl_rate[d]);
    loss += kappa[1] * std::max(0.0, config.chi_ul - ul_rate[d]);
    loss += kappa[2] * std::max(0.0, ms_tot[d] - config.P_d);
  }
  for (std::size_t l = 0; l < L_; ++l) loss += kappa[3] * std::max(0.0, ap_tot[l] - config.P_l);
  if (grad == nullptr) return loss;

  *grad = PowerAllocation(L_, D_, M_, Mbar_);
  // d(loss)/d(rate) per MS.
  std::vector<double> w_dl(D_), w_ul(D_);
  for (std::size_t d = 0; d < D_; ++d) {
    w_dl[d] = -inv_msum - (config.chi_dl - dl_rate[d] > 0.0 ? kappa[0] : 0.0);
    w_ul[d] = -inv_msum - (config.chi_ul - ul_rate[d] > 0.0 ? kappa[1] : 0.0);
  }
  // Gradients w.r.t. per-node totals accumulate interference sensitivities.
  std::vector<double> g_ms_tot(D_, 0.0), g_ap_tot(L_, 0.0);
  for (std::size_t d = 0; d < D_; ++d) {
    const double b = dl_b[d];
    for (std::size_t m = 0; m < M_; ++m) {
      const double a = dl_a[d * M_ + m];
      const double sinr = a * a / b;
      const double g_sinr = w_dl[d] / (1.0 + sinr);
      for (std::size_t l = 0; l < L_; ++l) {
        const double p = pa.dl(l, d, m);
        if (p > 0.0) grad->dl(l, d, m) += g_sinr * a * gains_.w(l, d, m) / (std::sqrt(p) * b);
      }
      const double g_b = -g_sinr * sinr / b;
      for (std::size_t dp = 0; dp < D_; ++dp) g_ms_tot[dp] += g_b * dl_coupling(d, dp);
    }
    for (std::size_t mb = 0; mb < Mbar_; ++mb) {
      const double bu = ul_b[d * Mbar_ + mb];
      const double num = ul_numerator(pa, d, mb);
      const double sinr = num / bu;
      const double g_sinr = w_ul[d] / (1.0 + sinr);
      grad->ul(d, mb) += g_sinr * serving_count_[d] * serving_count_[d] / bu;
      const double g_b = -g_sinr * sinr / bu;
      for (std::size_t l = 0; l < L_; ++l) g_ap_tot[l] += g_b * ul_coupling(d, mb, l);
    }
    if (ms_tot[d] > config.P_d) g_ms_tot[d] += kappa[2];
  }
  for (std::size_t l = 0; l < L_; ++l) {
    if (ap_tot[l] > config.P_l) g_ap_tot[l] += kappa[3];
  }
  for (std::size_t l = 0; l < L_; ++l) {
    for (std::size_t i = l * D_ * M_; i < (l + 1) * D_ * M_; ++i) grad->p_dl[i] += g_ap_tot[l];
  }
  for (std::size_t d = 0; d < D_; ++d) {
    for (std::size_t mb = 0; mb < Mbar_; ++mb) grad->ul(d, mb) += g_ms_tot[d];
  }
  return loss;
}

double sinr_dl(const EquivalentGains& gains, const PowerAllocation& pa, const ChannelSet& channels,
               const NetworkConfig& config, std::size_t d, std::size_t m) {
  return SinrModel(gains, channels, config).sinr_dl(pa, d, m);
}

double sinr_ul(const EquivalentGains& gains, const PowerAllocation& pa, const ChannelSet& channels,
               const NetworkConfig& config, std::size_t d, std::size_t mbar) {
  return SinrModel(gains, channels, config).sinr_ul(pa, d, mbar);
}

double spectral_efficiency(const EquivalentGains& gains, const PowerAllocation& pa,
                           const ChannelSet& channels, const NetworkConfig& config) {
  return SinrModel(gains, channels, config).spectral_efficiency(pa);
}

std::vector<QosMargin> qos_margins(const EquivalentGains& gains, const PowerAllocation& pa,
                                   const ChannelSet& channels, const NetworkConfig& config) {
  return SinrModel(gains, channels, config).qos_margins(pa, config.chi_dl, config.chi_ul);
}

}  // namespace cfmdd
