#pragma once

#include <cstddef>
#include <vector>

#include "cfmdd/beamforming.hpp"
#include "cfmdd/channel.hpp"
#include "cfmdd/config.hpp"
#include "cfmdd/sinr.hpp"

namespace cfmdd {

struct SolverOptions {
  double outer_tol = 1e-4;      // relative SE improvement
  std::size_t max_outer = 30;
  double inner_tol = 1e-6;      // constraint residual / stationarity
  std::size_t max_inner = 5000;
  double penalty_growth = 10.0;

  void validate() const;
};

/// Auxiliary QT variables, one per DL slot [d * M + m] and UL slot
/// [d * Mbar + mbar], in the units of the SINR numerator/denominator.
struct QtAux {
  std::vector<double> z_dl, z_ul;
};

struct QtScaState {
  PowerAllocation p;
  QtAux z;
  // Epigraph values at p: varpi_dm = sum_l sqrt(p_ldm) omega_ldm, psi_dm = B_dm,
  // varpi_dmbar = p_dmbar L_d^2, psi_dmbar = B_dmbar.
  std::vector<double> varpi_dl, psi_dl, varpi_ul, psi_ul;
  std::size_t t = 0;
  std::vector<double> objective_trace;  // spectral efficiency of each iterate
};

struct FeasibilityResult {
  PowerAllocation p;
  std::vector<double> slack_dl, slack_ul;  // alpha per slot, <= 0
  double worst_slack = 0.0;
};

/// Slack maximization with the SCA surrogates expanded at (1, 1), measured in
/// units where each SINR denominator is 1 at the uniform budget split.
/// Never throws Infeasible; see init_feasible.
FeasibilityResult feasibility_search(const SinrModel& model, const NetworkConfig& config,
                                     const SolverOptions& options = {});

/// Feasible starting point; throws InfeasibleError when a slack stays below
/// -1e-6.
PowerAllocation init_feasible(const EquivalentGains& gains, const ChannelSet& channels,
                              const NetworkConfig& config, const SolverOptions& options = {});

/// z = sqrt(A) / B for a single ratio.
double qt_z(double A, double B);

QtAux qt_update_z(const SinrModel& model, const PowerAllocation& p);
QtAux qt_update_z(const EquivalentGains& gains, const ChannelSet& channels,
                  const NetworkConfig& config, const PowerAllocation& p);

/// (1/M_sum) sum ln(1 + 2 z sqrt(A(p)) - z^2 B(p)); -inf when an argument
/// is nonpositive.
double qt_objective(const SinrModel& model, const PowerAllocation& p, const QtAux& z);

/// Linear minorant 2 (varpi_t / psi_t) varpi - (varpi_t / psi_t)^2 psi of
/// varpi^2 / psi, tight at the expansion point.
double sca_surrogate(double varpi_t, double psi_t, double varpi, double psi);

/// One concave subproblem at fixed z with QoS surrogates expanded at p_t.
/// Returns p_t itself when no candidate improves the QT objective.
PowerAllocation sca_subproblem(const SinrModel& model, const NetworkConfig& config,
                               const PowerAllocation& p_t, const QtAux& z,
                               const SolverOptions& options = {});
PowerAllocation sca_subproblem(const EquivalentGains& gains, const ChannelSet& channels,
                               const NetworkConfig& config, const PowerAllocation& p_t,
                               const QtAux& z, const SolverOptions& options = {});

struct QtScaResult {
  PowerAllocation p;
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
  QtScaState state;
};

QtScaResult qt_sca_solve(const SinrModel& model, const NetworkConfig& config,
                         const SolverOptions& options = {});
QtScaResult qt_sca_solve(const EquivalentGains& gains, const ChannelSet& channels,
                         const NetworkConfig& config, const SolverOptions& options = {});

}  // namespace cfmdd
