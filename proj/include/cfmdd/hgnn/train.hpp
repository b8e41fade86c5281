#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "cfmdd/hgnn/graph.hpp"
#include "cfmdd/hgnn/model.hpp"
#include "cfmdd/sinr.hpp"

namespace cfmdd {

/// One training or test instance: the graph plus the exact SINR model used
/// by the loss.
struct HgnnSample {
  HetGraph graph;
  SinrModel model;
};

struct TrainOptions {
  std::uint64_t seed = 1;
  /// Called after every epoch with (epoch, mean loss).
  std::function<void(std::size_t, double)> on_epoch;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;
};

/// Mini-batch Adam on the batch-mean penalty loss, batch norm in train mode.
/// The feature scaler is fitted on `data` first. Deterministic in the seed;
/// throws NumericalError if the loss stops being finite.
TrainResult train(const std::vector<HgnnSample>& data, const HgnnConfig& config,
                  const TrainOptions& options = {});

/// Continues training from `params` for config.epochs epochs.
TrainResult train_from(ModelParams params, const std::vector<HgnnSample>& data,
                       const HgnnConfig& config, const TrainOptions& options = {});

/// Scales each node's powers uniformly down to its budget when exceeded.
PowerAllocation project_to_budgets(const PowerAllocation& pa, const NetworkConfig& config);

struct EvalMetrics {
  std::vector<double> se_raw;        // before budget projection
  std::vector<double> se;            // after budget projection
  std::vector<bool> qos_violated;    // projected allocation, margin < -1e-6
  std::vector<bool> budget_violated; // raw allocation
  std::vector<double> ratio;         // se / reference, empty without a reference
  double mean_se_raw = 0.0;
  double mean_se = 0.0;
  double qos_violation_rate = 0.0;
  double budget_violation_rate = 0.0;
  double mean_ratio = 0.0;
  std::vector<PowerAllocation> allocations;  // projected
};

EvalMetrics evaluate(const ModelParams& params, const std::vector<HgnnSample>& data,
                     const HgnnConfig& config, const std::vector<double>* reference_se = nullptr);

/// Empirical CDF sample points (value, P[X <= value]) of `values`.
std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values);

}  // namespace cfmdd
