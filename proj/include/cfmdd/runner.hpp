#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cfmdd/dataset.hpp"
#include "cfmdd/hgnn/model.hpp"
#include "cfmdd/qtsca.hpp"
#include "cfmdd/sinr.hpp"

namespace cfmdd {

enum class Method { kQtSca, kGreedy, kHgnn };

Method parse_method(const std::string& name);
std::string method_name(Method m);

struct RunOptions {
  SolverOptions solver;
  const ModelParams* model = nullptr;  // required for kHgnn
  HgnnConfig hgnn;
};

/// Outcome of one method on one instance. Solver failures are recorded in
/// `status` ("ok", "infeasible", "inner_nonconvergence", "numerical") with
/// the message in `error`; the allocation is then empty.
struct SolveRecord {
  std::uint64_t seed = 0;
  Method method = Method::kGreedy;
  std::string status = "ok";
  std::string error;
  PowerAllocation p;
  double se = 0.0;
  double min_dl_margin = 0.0, min_ul_margin = 0.0;
  bool qos_ok = false;
  bool budgets_ok = false;
  std::size_t iterations = 0;
  std::vector<double> trace;
  double seconds = 0.0;
};

SolveRecord run_solver(const Instance& instance, const NetworkConfig& config, Method method,
                       const RunOptions& options);

/// Every instance in parallel; records follow instance order and are
/// identical to the serial version except for `seconds`.
std::vector<SolveRecord> solve_all(const std::vector<Instance>& instances,
                                   const NetworkConfig& config, Method method,
                                   const RunOptions& options);
std::vector<SolveRecord> solve_all_serial(const std::vector<Instance>& instances,
                                          const NetworkConfig& config, Method method,
                                          const RunOptions& options);

/// CSV with header; deterministic (no timings).
std::string metrics_csv(const std::vector<SolveRecord>& records);
/// seed,method,seconds
std::string timings_csv(const std::vector<SolveRecord>& records);
/// seed,method,iteration,se
std::string traces_csv(const std::vector<SolveRecord>& records);

struct MethodSummary {
  std::string method;
  double mean_se = 0.0;
  double se_95 = 0.0;  // 5th percentile: SE reached by 95% of instances
  double qos_violation_rate = 0.0;
  double mean_ratio = 0.0;
  double max_abs_gap = 0.0;  // vs reference, nats/s/Hz
  std::size_t failures = 0;
};

struct CompareReport {
  std::string reference;
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::vector<double>> se;     // per method, per instance
  std::map<std::string, std::vector<double>> ratio;  // se / reference se
  std::vector<MethodSummary> summary;

  std::string instances_csv() const;
  std::string cdf_csv() const;
  std::string summary_csv() const;
};

/// Per-instance SE table, ratios against `reference`, CDF points and
/// summary rows. Failed runs count as SE 0. Throws InvalidInputError when the
/// reference method is absent.
CompareReport compare(const std::map<std::string, std::vector<SolveRecord>>& runs,
                      const std::string& reference);

void write_text(const std::string& path, const std::string& text);

}  // namespace cfmdd
