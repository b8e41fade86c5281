#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace cfmdd {

/// maximize f(x) subject to g(x) >= 0 and x in a closed convex set given by
/// its projection in a diagonal metric.
struct AlProblem {
  std::size_t num_vars = 0;
  std::size_t num_constraints = 0;
  /// Objective value; writes the gradient. May return -inf outside its domain.
  std::function<double(const std::vector<double>& x, std::vector<double>& grad)> objective;
  /// Constraint values and their row-major Jacobian (num_constraints x num_vars).
  std::function<void(const std::vector<double>& x, std::vector<double>& g,
                     std::vector<double>& jac)>
      constraints;
  /// argmin_y sum_j w_j (y_j - x_j)^2 over the set; `w` empty means w = 1.
  std::function<void(std::vector<double>& x, const std::vector<double>& w)> project;
  /// Optional nonnegative diagonal curvature estimate of -f; enables diagonal
  /// preconditioning.
  std::function<void(const std::vector<double>& x, std::vector<double>& diag)> curvature;
  /// Optional early exit, checked at every accepted iterate.
  std::function<bool(const std::vector<double>& x)> done;
};

struct AlOptions {
  double tol = 1e-6;            // constraint residual and stationarity
  std::size_t max_iter = 5000;  // total projected-gradient iterations
  double rho0 = 10.0;
  double rho_growth = 10.0;
  double armijo = 1e-4;
  double first_inner_tol = 1e-1;  // stationarity target of the first round
};

struct AlResult {
  std::vector<double> x;
  std::vector<double> multipliers;
  std::size_t iterations = 0;
  double max_violation = 0.0;
  bool converged = false;
};

/// Augmented Lagrangian on the inequality constraints; each subproblem is
/// minimized by (diagonally scaled) projected gradient with Barzilai-Borwein
/// steps and Armijo backtracking. Subproblem tolerances tighten by 10x per
/// round down to `tol`. Never throws on non-convergence.
AlResult al_maximize(const AlProblem& problem, std::vector<double> x0, const AlOptions& options);

/// Projection of x restricted to `idx` onto {y >= 0, sum y_i^2 <= radius2} in
/// the metric diag(w) (w empty: Euclidean). The result never exceeds the
/// radius.
void project_ball_orthant(std::vector<double>& x, const std::vector<std::size_t>& idx,
                          double radius2, const std::vector<double>& w = {});

}  // namespace cfmdd
