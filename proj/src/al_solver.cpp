#include "cfmdd/al_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cfmdd {

void project_ball_orthant(std::vector<double>& x, const std::vector<std::size_t>& idx,
                          double radius2, const std::vector<double>& w) {
  double s = 0.0;
  for (const auto i : idx) {
    if (!(x[i] > 0.0)) x[i] = 0.0;
    s += x[i] * x[i];
  }
  if (s <= radius2) return;
  if (!(radius2 > 0.0)) {
    for (const auto i : idx) x[i] = 0.0;
    return;
  }
  if (!w.empty()) {
    // y_i = w_i x_i / (w_i + mu); Newton on sum y_i^2 = radius2 from mu = 0
    // increases mu monotonically since the residual is convex decreasing.
    double mu = 0.0;
    for (int it = 0; it < 50; ++it) {
      double f = -radius2, df = 0.0;
      for (const auto i : idx) {
        const double r = w[i] / (w[i] + mu);
        const double y = r * x[i];
        f += y * y;
        df -= 2.0 * y * y / (w[i] + mu);
      }
      if (f <= 1e-14 * radius2 || df == 0.0) break;
      mu -= f / df;
    }
    s = 0.0;
    for (const auto i : idx) {
      x[i] *= w[i] / (w[i] + mu);
      s += x[i] * x[i];
    }
    if (s <= radius2) return;
  }
  const double scale = std::sqrt(radius2 / s);
  for (const auto i : idx) x[i] *= scale;
}

namespace {

constexpr std::size_t kMaxRounds = 100;
constexpr std::size_t kNonmonotoneWindow = 10;
constexpr std::size_t kRescaleEvery = 50;

class Merit {
 public:
  explicit Merit(const AlProblem& p)
      : p_(p), g_(p.num_constraints), jac_(p.num_constraints * p.num_vars), fgrad_(p.num_vars) {}

  // Phi(x) = -f(x) + sum_i psi(g_i) for minimization; fills grad.
  double eval(const std::vector<double>& x, const std::vector<double>& lambda, double rho,
              std::vector<double>& grad) {
    const double f = p_.objective(x, fgrad_);
    if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();
    const std::size_t n = p_.num_vars;
    for (std::size_t j = 0; j < n; ++j) grad[j] = -fgrad_[j];
    double phi = -f;
    if (p_.num_constraints > 0) {
      p_.constraints(x, g_, jac_);
      for (std::size_t i = 0; i < p_.num_constraints; ++i) {
        const double gi = g_[i];
        if (gi < lambda[i] / rho) {
          phi += -lambda[i] * gi + 0.5 * rho * gi * gi;
          const double c = -lambda[i] + rho * gi;
          const double* row = &jac_[i * n];
          for (std::size_t j = 0; j < n; ++j) grad[j] += c * row[j];
        } else {
          phi += -lambda[i] * lambda[i] / (2.0 * rho);
        }
      }
    }
    return phi;
  }

  double violation(const std::vector<double>& x) {
    if (p_.num_constraints == 0) return 0.0;
    p_.constraints(x, g_, jac_);
    double v = 0.0;
    for (const double gi : g_) v = std::max(v, -gi);
    return v;
  }

  // Diagonal of the merit curvature: objective estimate plus rho J^T J over
  // the constraints in their penalty region.
  void scaling(const std::vector<double>& x, const std::vector<double>& lambda, double rho,
               std::vector<double>& w) {
    const std::size_t n = p_.num_vars;
    std::fill(w.begin(), w.end(), 0.0);
    p_.curvature(x, w);
    if (p_.num_constraints > 0) {
      p_.constraints(x, g_, jac_);
      for (std::size_t i = 0; i < p_.num_constraints; ++i) {
        if (g_[i] >= lambda[i] / rho) continue;
        const double* row = &jac_[i * n];
        for (std::size_t j = 0; j < n; ++j) w[j] += rho * row[j] * row[j];
      }
    }
    const double top = *std::max_element(w.begin(), w.end());
    const double floor = top > 0.0 ? 1e-8 * top : 1.0;
    for (auto& v : w) v = std::max(v, floor);
  }

  const std::vector<double>& last_g() const { return g_; }

 private:
  const AlProblem& p_;
  std::vector<double> g_, jac_, fgrad_;
};

double inf_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

AlResult al_maximize(const AlProblem& problem, std::vector<double> x0,
                     const AlOptions& options) {
  const std::size_t n = problem.num_vars, m = problem.num_constraints;
  const std::vector<double> unit;
  AlResult res;
  res.x = std::move(x0);
  problem.project(res.x, unit);
  res.multipliers.assign(m, 0.0);
  Merit merit(problem);
  double rho = options.rho0;
  double prev_violation = std::numeric_limits<double>::infinity();
  std::vector<double> grad(n), grad_new(n), trial(n), probe(n), w(n, 1.0);
  const bool scaled = static_cast<bool>(problem.curvature);

  if (problem.done && problem.done(res.x)) {
    res.converged = true;
    res.max_violation = merit.violation(res.x);
    return res;
  }

  for (std::size_t round = 0; round < kMaxRounds && res.iterations < options.max_iter; ++round) {
    const double inner_tol = std::max(
        options.tol, options.first_inner_tol * std::pow(0.1, static_cast<double>(round)));
    if (scaled) merit.scaling(res.x, res.multipliers, rho, w);
    const std::vector<double>& metric = scaled ? w : unit;
    double phi = merit.eval(res.x, res.multipliers, rho, grad);
    double step = 1.0;
    bool stationary = false;
    std::vector<double> recent(kNonmonotoneWindow, phi);
    std::size_t recent_pos = 0;
    std::size_t since_scaling = 0;
    while (res.iterations < options.max_iter) {
      probe = res.x;
      for (std::size_t j = 0; j < n; ++j) probe[j] -= grad[j];
      problem.project(probe, unit);
      if (inf_norm_diff(probe, res.x) <= inner_tol) {
        stationary = true;
        break;
      }
      ++res.iterations;
      if (scaled && ++since_scaling >= kRescaleEvery) {
        merit.scaling(res.x, res.multipliers, rho, w);
        since_scaling = 0;
      }
      bool accepted = false;
      double phi_new = phi;
      const double phi_ref = *std::max_element(recent.begin(), recent.end());
      for (int k = 0; k < 60; ++k) {
        trial = res.x;
        for (std::size_t j = 0; j < n; ++j) trial[j] -= step * grad[j] / w[j];
        problem.project(trial, metric);
        double decrease = 0.0;
        for (std::size_t j = 0; j < n; ++j) decrease += grad[j] * (trial[j] - res.x[j]);
        phi_new = merit.eval(trial, res.multipliers, rho, grad_new);
        if (phi_new <= phi_ref + options.armijo * decrease) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        stationary = true;  // no descent left at machine precision
        break;
      }
      double sws = 0.0, sy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double s = trial[j] - res.x[j];
        sws += s * s * w[j];
        sy += s * (grad_new[j] - grad[j]);
      }
      step = sy > 0.0 ? std::clamp(sws / sy, 1e-12, 1e12) : std::min(step * 2.0, 1e12);
      res.x.swap(trial);
      grad.swap(grad_new);
      phi = phi_new;
      recent[recent_pos++ % kNonmonotoneWindow] = phi;
      if (problem.done && problem.done(res.x)) {
        res.converged = true;
        res.max_violation = merit.violation(res.x);
        return res;
      }
    }

    const double violation = merit.violation(res.x);
    res.max_violation = violation;
    double complementarity = 0.0;
    const auto& g = merit.last_g();
    for (std::size_t i = 0; i < m; ++i) {
      res.multipliers[i] = std::max(0.0, res.multipliers[i] - rho * g[i]);
      complementarity = std::max(complementarity, std::abs(std::min(g[i], res.multipliers[i])));
    }
    if (stationary && inner_tol <= options.tol && violation <= options.tol &&
        complementarity <= options.tol) {
      res.converged = true;
      return res;
    }
    if (violation > 0.25 * prev_violation) rho *= options.rho_growth;
    prev_violation = violation;
  }
  res.max_violation = merit.violation(res.x);
  return res;
}

}  // namespace cfmdd
