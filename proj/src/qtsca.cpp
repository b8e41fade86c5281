#include "cfmdd/qtsca.hpp"

#include <algorithm>

#include <cmath>
#include <limits>
#include <utility>

#include "cfmdd/al_solver.hpp"
#include "cfmdd/errors.hpp"

namespace cfmdd {

void SolverOptions::validate() const {
  if (!(outer_tol > 0.0) || !(inner_tol > 0.0) || !(penalty_growth > 1.0) || max_outer < 1 ||
      max_inner < 1) {
    throw ConfigError("solver options must be positive (max_outer >= 1, penalty growth > 1)");
  }
}

namespace {

constexpr double kInfeasibleSlack = -1e-6;

// Every SINR as a^2 / b in noise-normalized units, with a linear and b equal
// to 1 plus a nonnegative combination of squares of q = sqrt(p).
class SlotSystem {
 public:
  struct Slot {
    std::vector<std::pair<std::size_t, double>> a_terms;
    std::vector<std::pair<std::size_t, double>> b_terms;
    double gamma = 0.0;
    double sa = 1.0;  // sqrt(A) = sa * a
    double sb = 1.0;  // B = sb * b
  };

  SlotSystem(const SinrModel& model, const NetworkConfig& config)
      : L_(model.L()), D_(model.D()), M_(model.M()), Mbar_(model.Mbar()) {
    const auto& g = model.gains();
    const double sigma2 = model.sigma2();
    const double sigma = std::sqrt(sigma2);
    const double gamma_dl = std::expm1(config.chi_dl / static_cast<double>(M_));
    const double gamma_ul = std::expm1(config.chi_ul / static_cast<double>(Mbar_));
    nv_ = L_ * D_ * M_ + D_ * Mbar_;
    slots_.resize(D_ * (M_ + Mbar_));
    for (std::size_t d = 0; d < D_; ++d) {
      for (std::size_t m = 0; m < M_; ++m) {
        Slot& s = slots_[d * M_ + m];
        s.gamma = gamma_dl;
        s.sa = sigma;
        s.sb = sigma2;
        for (std::size_t l = 0; l < L_; ++l) {
          if (g.serving.serves(l, d) && g.w(l, d, m) > 0.0) {
            s.a_terms.emplace_back(dl_var(l, d, m), g.w(l, d, m) / sigma);
          }
        }
        for (std::size_t dp = 0; dp < D_; ++dp) {
          const double c = model.dl_coupling(d, dp) / sigma2;
          if (c == 0.0) continue;
          for (std::size_t mb = 0; mb < Mbar_; ++mb) s.b_terms.emplace_back(ul_var(dp, mb), c);
        }
      }
      for (std::size_t mb = 0; mb < Mbar_; ++mb) {
        Slot& s = slots_[D_ * M_ + d * Mbar_ + mb];
        s.gamma = gamma_ul;
        const double upsilon = model.ul_noise(d, mb) / sigma2;
        const double Ld = model.serving_count(d);
        if (!(upsilon > 0.0) || Ld == 0.0) continue;
        s.sa = sigma * std::sqrt(upsilon);
        s.sb = sigma2 * upsilon;
        s.a_terms.emplace_back(ul_var(d, mb), Ld / s.sa);
        for (std::size_t l = 0; l < L_; ++l) {
          const double c = model.ul_coupling(d, mb, l) / s.sb;
          if (c == 0.0) continue;
          for (std::size_t dd = 0; dd < D_; ++dd) {
            for (std::size_t m = 0; m < M_; ++m) s.b_terms.emplace_back(dl_var(l, dd, m), c);
          }
        }
      }
    }
    for (std::size_t l = 0; l < L_; ++l) {
      std::vector<std::size_t> idx;
      for (std::size_t d = 0; d < D_; ++d) {
        for (std::size_t m = 0; m < M_; ++m) {
          if (g.serving.serves(l, d)) {
            idx.push_back(dl_var(l, d, m));
          } else {
            masked_.push_back(dl_var(l, d, m));
          }
        }
      }
      blocks_.emplace_back(std::move(idx), config.P_l);
    }
    for (std::size_t d = 0; d < D_; ++d) {
      std::vector<std::size_t> idx;
      for (std::size_t mb = 0; mb < Mbar_; ++mb) idx.push_back(ul_var(d, mb));
      blocks_.emplace_back(std::move(idx), config.P_d);
    }
  }

  std::size_t num_vars() const { return nv_; }
  std::size_t num_slots() const { return slots_.size(); }
  const Slot& slot(std::size_t i) const { return slots_[i]; }
  double m_sum() const { return static_cast<double>(M_ + Mbar_); }

  std::size_t dl_var(std::size_t l, std::size_t d, std::size_t m) const {
    return (l * D_ + d) * M_ + m;
  }
  std::size_t ul_var(std::size_t d, std::size_t mb) const { return L_ * D_ * M_ + d * Mbar_ + mb; }

  double a(std::size_t i, const std::vector<double>& q) const {
    double v = 0.0;
    for (const auto& [j, c] : slots_[i].a_terms) v += c * q[j];
    return v;
  }
  double b(std::size_t i, const std::vector<double>& q) const {
    double v = 1.0;
    for (const auto& [j, c] : slots_[i].b_terms) v += c * q[j] * q[j];
    return v;
  }

  // u = 2 z a - z^2 b - shift; gradient added with weight w into grad.
  double quad_form(std::size_t i, double z, const std::vector<double>& q) const {
    return 2.0 * z * a(i, q) - z * z * b(i, q);
  }
  void add_quad_grad(std::size_t i, double z, double w, const std::vector<double>& q,
                     double* grad) const {
    for (const auto& [j, c] : slots_[i].a_terms) grad[j] += w * 2.0 * z * c;
    for (const auto& [j, c] : slots_[i].b_terms) grad[j] -= w * z * z * 2.0 * c * q[j];
  }

  void project(std::vector<double>& q, const std::vector<double>& w = {}) const {
    for (const auto j : masked_) q[j] = 0.0;
    for (const auto& [idx, budget] : blocks_) project_ball_orthant(q, idx, budget, w);
  }

  // Diagonal curvature of -qt_value.
  void qt_curvature(const std::vector<double>& zn, const std::vector<double>& q,
                    double* diag) const {
    const double inv = 1.0 / m_sum();
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      const double z = zn[i];
      const double u = 1.0 + quad_form(i, z, q);
      if (!(u > 0.0)) continue;
      for (const auto& [j, c] : slots_[i].a_terms) {
        const double du = 2.0 * z * c;
        diag[j] += inv * du * du / (u * u);
      }
      for (const auto& [j, c] : slots_[i].b_terms) {
        const double du = 2.0 * z * z * c * q[j];
        diag[j] += inv * (du * du / (u * u) + 2.0 * z * z * c / u);
      }
    }
  }

  std::vector<double> to_q(const PowerAllocation& p) const {
    std::vector<double> q(nv_);
    for (std::size_t i = 0; i < p.p_dl.size(); ++i) q[i] = std::sqrt(p.p_dl[i]);
    for (std::size_t i = 0; i < p.p_ul.size(); ++i) q[L_ * D_ * M_ + i] = std::sqrt(p.p_ul[i]);
    return q;
  }
  PowerAllocation to_p(const std::vector<double>& q) const {
    PowerAllocation p(L_, D_, M_, Mbar_);
    for (std::size_t i = 0; i < p.p_dl.size(); ++i) p.p_dl[i] = q[i] * q[i];
    for (std::size_t i = 0; i < p.p_ul.size(); ++i) {
      p.p_ul[i] = q[L_ * D_ * M_ + i] * q[L_ * D_ * M_ + i];
    }
    return p;
  }

  // Normalized z from true-unit z.
  std::vector<double> normalized_z(const QtAux& z) const {
    std::vector<double> zn(slots_.size());
    for (std::size_t d = 0; d < D_; ++d) {
      for (std::size_t m = 0; m < M_; ++m) {
        const std::size_t i = d * M_ + m;
        zn[i] = z.z_dl[i] * slots_[i].sb / slots_[i].sa;
      }
      for (std::size_t mb = 0; mb < Mbar_; ++mb) {
        const std::size_t i = D_ * M_ + d * Mbar_ + mb;
        zn[i] = z.z_ul[d * Mbar_ + mb] * slots_[i].sb / slots_[i].sa;
      }
    }
    return zn;
  }

  double qt_value(const std::vector<double>& zn, const std::vector<double>& q,
                  double* grad) const {
    double total = 0.0;
    const double inv = 1.0 / m_sum();
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      const double u = 1.0 + quad_form(i, zn[i], q);
      if (!(u > 0.0)) return -std::numeric_limits<double>::infinity();
      total += std::log(u);
      if (grad != nullptr) add_quad_grad(i, zn[i], inv / u, q, grad);
    }
    return total * inv;
  }

  // Uniform split of every budget over its unmasked entries.
  std::vector<double> uniform_point() const {
    std::vector<double> q(nv_, 0.0);
    for (const auto& [idx, budget] : blocks_) {
      if (idx.empty()) continue;
      const double v = std::sqrt(budget / static_cast<double>(idx.size()));
      for (const auto j : idx) q[j] = v;
    }
    return q;
  }

 private:
  std::size_t L_, D_, M_, Mbar_, nv_ = 0;
  std::vector<Slot> slots_;
  std::vector<std::pair<std::vector<std::size_t>, double>> blocks_;
  std::vector<std::size_t> masked_;
};

AlOptions al_options(const SolverOptions& o) {
  AlOptions a;
  a.tol = o.inner_tol;
  a.max_iter = o.max_inner;
  a.rho_growth = o.penalty_growth;
  return a;
}

std::vector<std::size_t> active_slots(const SlotSystem& sys) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sys.num_slots(); ++i) {
    if (sys.slot(i).gamma > 0.0) out.push_back(i);
  }
  return out;
}

void fill_state(QtScaState& st, const SinrModel& model, const PowerAllocation& p) {
  const std::size_t D = model.D(), M = model.M(), Mbar = model.Mbar();
  st.varpi_dl.assign(D * M, 0.0);
  st.psi_dl.assign(D * M, 0.0);
  st.varpi_ul.assign(D * Mbar, 0.0);
  st.psi_ul.assign(D * Mbar, 0.0);
  for (std::size_t d = 0; d < D; ++d) {
    const double b = model.dl_denominator(p, d);
    for (std::size_t m = 0; m < M; ++m) {
      st.varpi_dl[d * M + m] = model.dl_amplitude(p, d, m);
      st.psi_dl[d * M + m] = b;
    }
    for (std::size_t mb = 0; mb < Mbar; ++mb) {
      st.varpi_ul[d * Mbar + mb] = model.ul_numerator(p, d, mb);
      st.psi_ul[d * Mbar + mb] = model.ul_denominator(p, d, mb);
    }
  }
}

}  // namespace

FeasibilityResult feasibility_search(const SinrModel& model, const NetworkConfig& config,
                                     const SolverOptions& options) {
  options.validate();
  const SlotSystem sys(model, config);
  const auto active = active_slots(sys);
  const std::size_t nq = sys.num_vars();
  const std::size_t nc = active.size();
  const double shift = 2.0 * options.inner_tol;

  // The (1, 1) expansion is taken in units where every denominator equals 1
  // at the uniform budget split.
  std::vector<double> q = sys.uniform_point();
  std::vector<double> zk(sys.num_slots());
  for (std::size_t i = 0; i < sys.num_slots(); ++i) zk[i] = 1.0 / std::sqrt(sys.b(i, q));
  auto slack = [&](std::size_t i, const std::vector<double>& x) {
    return sys.quad_form(i, zk[i], x) - sys.slot(i).gamma;
  };

  bool holds = true;
  for (const auto i : active) holds = holds && slack(i, q) - shift >= 0.0;

  if (!holds) {
    AlProblem prob;
    prob.num_vars = nq + nc;
    prob.num_constraints = nc;
    prob.objective = [nq, nc](const std::vector<double>& x, std::vector<double>& grad) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double s = 0.0;
      for (std::size_t k = 0; k < nc; ++k) {
        s += x[nq + k];
        grad[nq + k] = 1.0;
      }
      return s;
    };
    prob.constraints = [&](const std::vector<double>& x, std::vector<double>& g,
                           std::vector<double>& jac) {
      std::fill(jac.begin(), jac.end(), 0.0);
      for (std::size_t k = 0; k < nc; ++k) {
        const std::size_t i = active[k];
        g[k] = slack(i, x) - shift - x[nq + k];
        double* row = &jac[k * (nq + nc)];
        sys.add_quad_grad(i, zk[i], 1.0, x, row);
        row[nq + k] = -1.0;
      }
    };
    prob.project = [&](std::vector<double>& x, const std::vector<double>& w) {
      sys.project(x, w);
      for (std::size_t k = 0; k < nc; ++k) x[nq + k] = std::min(x[nq + k], 0.0);
    };
    prob.done = [&](const std::vector<double>& x) {
      for (const auto i : active) {
        if (slack(i, x) - shift < 0.0) return false;
      }
      return true;
    };
    std::vector<double> x0(nq + nc);
    std::copy(q.begin(), q.end(), x0.begin());
    for (std::size_t k = 0; k < nc; ++k) x0[nq + k] = std::min(0.0, slack(active[k], q) - shift);
    const AlResult r = al_maximize(prob, std::move(x0), al_options(options));
    std::copy(r.x.begin(), r.x.begin() + static_cast<std::ptrdiff_t>(nq), q.begin());
    sys.project(q);
  }

  FeasibilityResult out;
  out.p = sys.to_p(q);
  out.slack_dl.assign(model.D() * model.M(), 0.0);
  out.slack_ul.assign(model.D() * model.Mbar(), 0.0);
  const std::size_t n_dl = model.D() * model.M();
  for (const auto i : active) {
    const double a = std::min(0.0, slack(i, q));
    if (i < n_dl) {
      out.slack_dl[i] = a;
    } else {
      out.slack_ul[i - n_dl] = a;
    }
    out.worst_slack = std::min(out.worst_slack, a);
  }
  return out;
}

PowerAllocation init_feasible(const EquivalentGains& gains, const ChannelSet& channels,
                              const NetworkConfig& config, const SolverOptions& options) {
  const SinrModel model(gains, channels, config);
  auto r = feasibility_search(model, config, options);
  if (r.worst_slack < kInfeasibleSlack) throw InfeasibleError(r.worst_slack);
  return std::move(r.p);
}

double qt_z(double A, double B) {
  if (!(B > 0.0) || A < 0.0) throw InvalidInputError("QT ratio needs A >= 0 and B > 0");
  return std::sqrt(A) / B;
}

QtAux qt_update_z(const SinrModel& model, const PowerAllocation& p) {
  const std::size_t D = model.D(), M = model.M(), Mbar = model.Mbar();
  QtAux z;
  z.z_dl.resize(D * M);
  z.z_ul.resize(D * Mbar);
  for (std::size_t d = 0; d < D; ++d) {
    const double b = model.dl_denominator(p, d);
    for (std::size_t m = 0; m < M; ++m) {
      const double a = model.dl_amplitude(p, d, m);
      z.z_dl[d * M + m] = qt_z(a * a, b);
    }
    for (std::size_t mb = 0; mb < Mbar; ++mb) {
      z.z_ul[d * Mbar + mb] = qt_z(model.ul_numerator(p, d, mb), model.ul_denominator(p, d, mb));
    }
  }
  return z;
}

QtAux qt_update_z(const EquivalentGains& gains, const ChannelSet& channels,
                  const NetworkConfig& config, const PowerAllocation& p) {
  return qt_update_z(SinrModel(gains, channels, config), p);
}

double qt_objective(const SinrModel& model, const PowerAllocation& p, const QtAux& z) {
  const std::size_t D = model.D(), M = model.M(), Mbar = model.Mbar();
  double total = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    const double b = model.dl_denominator(p, d);
    for (std::size_t m = 0; m < M; ++m) {
      const double zz = z.z_dl[d * M + m];
      const double u = 1.0 + 2.0 * zz * model.dl_amplitude(p, d, m) - zz * zz * b;
      if (!(u > 0.0)) return -std::numeric_limits<double>::infinity();
      total += std::log(u);
    }
    for (std::size_t mb = 0; mb < Mbar; ++mb) {
      const double zz = z.z_ul[d * Mbar + mb];
      const double u = 1.0 + 2.0 * zz * std::sqrt(model.ul_numerator(p, d, mb)) -
                       zz * zz * model.ul_denominator(p, d, mb);
      if (!(u > 0.0)) return -std::numeric_limits<double>::infinity();
      total += std::log(u);
    }
  }
  return total / static_cast<double>(model.M_sum());
}

double sca_surrogate(double varpi_t, double psi_t, double varpi, double psi) {
  if (!(varpi_t > 0.0) || !(psi_t > 0.0)) {
    throw InvalidInputError("SCA expansion point must be strictly positive");
  }
  const double r = varpi_t / psi_t;
  return 2.0 * r * varpi - r * r * psi;
}

PowerAllocation sca_subproblem(const SinrModel& model, const NetworkConfig& config,
                               const PowerAllocation& p_t, const QtAux& z,
                               const SolverOptions& options) {
  options.validate();
  const SlotSystem sys(model, config);
  const auto active = active_slots(sys);
  const std::vector<double> zn = sys.normalized_z(z);
  // Without auxiliaries the objective is constant in p.
  if (std::all_of(zn.begin(), zn.end(), [](double v) { return v == 0.0; })) return p_t;
  const std::vector<double> q_t = sys.to_q(p_t);
  const std::size_t n = sys.num_vars();
  const double shift = options.inner_tol;

  // Constraints are divided by their gradient norm at p_t so the penalty
  // curvature is comparable to that of the objective.
  std::vector<double> inv_scale(active.size(), 1.0);
  {
    std::vector<double> row(n);
    for (std::size_t k = 0; k < active.size(); ++k) {
      std::fill(row.begin(), row.end(), 0.0);
      sys.add_quad_grad(active[k], zn[active[k]], 1.0, q_t, row.data());
      double nrm = 0.0;
      for (const double v : row) nrm += v * v;
      nrm = std::sqrt(nrm);
      if (nrm > 1e-12) inv_scale[k] = 1.0 / nrm;
    }
  }

  AlProblem prob;
  prob.num_vars = n;
  prob.num_constraints = active.size();
  prob.objective = [&](const std::vector<double>& q, std::vector<double>& grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return sys.qt_value(zn, q, grad.data());
  };
  prob.constraints = [&](const std::vector<double>& q, std::vector<double>& g,
                         std::vector<double>& jac) {
    std::fill(jac.begin(), jac.end(), 0.0);
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t i = active[k];
      g[k] = (sys.quad_form(i, zn[i], q) - sys.slot(i).gamma) * inv_scale[k] - shift;
      sys.add_quad_grad(i, zn[i], inv_scale[k], q, &jac[k * n]);
    }
  };
  prob.project = [&](std::vector<double>& q, const std::vector<double>& w) { sys.project(q, w); };
  prob.curvature = [&](const std::vector<double>& q, std::vector<double>& diag) {
    sys.qt_curvature(zn, q, diag.data());
  };

  const AlResult r = al_maximize(prob, q_t, al_options(options));
  if (!r.converged && r.max_violation > options.inner_tol) {
    throw InnerNonConvergenceError(r.iterations, r.max_violation);
  }
  // Keep p_t unless the candidate improves the QT objective and satisfies the
  // unshifted surrogates.
  const double base = sys.qt_value(zn, q_t, nullptr);
  const double cand = sys.qt_value(zn, r.x, nullptr);
  bool ok = cand > base;
  for (const auto i : active) {
    ok = ok && sys.quad_form(i, zn[i], r.x) - sys.slot(i).gamma >= 0.0;
  }
  return ok ? sys.to_p(r.x) : p_t;
}

PowerAllocation sca_subproblem(const EquivalentGains& gains, const ChannelSet& channels,
                               const NetworkConfig& config, const PowerAllocation& p_t,
                               const QtAux& z, const SolverOptions& options) {
  return sca_subproblem(SinrModel(gains, channels, config), config, p_t, z, options);
}

QtScaResult qt_sca_solve(const SinrModel& model, const NetworkConfig& config,
                         const SolverOptions& options) {
  options.validate();
  auto init = feasibility_search(model, config, options);
  if (init.worst_slack < kInfeasibleSlack) throw InfeasibleError(init.worst_slack);
  QtScaResult res;
  QtScaState& st = res.state;
  st.p = std::move(init.p);
  double se = model.spectral_efficiency(st.p);
  st.objective_trace.push_back(se);
  for (st.t = 0; st.t < options.max_outer;) {
    st.z = qt_update_z(model, st.p);
    PowerAllocation next = sca_subproblem(model, config, st.p, st.z, options);
    const double se_next = model.spectral_efficiency(next);
    ++st.t;
    const double gain = se_next - se;
    if (gain >= 0.0) {
      st.p = std::move(next);
    }
    const double accepted = std::max(se, se_next);
    st.objective_trace.push_back(accepted);
    if (!(gain > options.outer_tol * std::max(std::abs(se), 1e-12))) break;
    se = accepted;
  }
  st.z = qt_update_z(model, st.p);
  fill_state(st, model, st.p);
  res.p = st.p;
  res.objective_trace = st.objective_trace;
  res.iterations = st.t;
  return res;
}

QtScaResult qt_sca_solve(const EquivalentGains& gains, const ChannelSet& channels,
                         const NetworkConfig& config, const SolverOptions& options) {
  return qt_sca_solve(SinrModel(gains, channels, config), config, options);
}

}  // namespace cfmdd
