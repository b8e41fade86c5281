#include "cfmdd/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "cfmdd/baselines.hpp"
#include "cfmdd/errors.hpp"
#include "cfmdd/hgnn/train.hpp"

namespace cfmdd {

Method parse_method(const std::string& name) {
  if (name == "qtsca") return Method::kQtSca;
  if (name == "greedy") return Method::kGreedy;
  if (name == "hgnn") return Method::kHgnn;
  throw InvalidInputError("unknown method '" + name + "' (expected qtsca, greedy or hgnn)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kQtSca: return "qtsca";
    case Method::kGreedy: return "greedy";
    case Method::kHgnn: return "hgnn";
  }
  return "?";
}

namespace {

void fill_metrics(SolveRecord& r, const SinrModel& model, const NetworkConfig& config) {
  r.se = model.spectral_efficiency(r.p);
  r.min_dl_margin = std::numeric_limits<double>::infinity();
  r.min_ul_margin = std::numeric_limits<double>::infinity();
  for (const auto& q : model.qos_margins(r.p, config.chi_dl, config.chi_ul)) {
    r.min_dl_margin = std::min(r.min_dl_margin, q.dl);
    r.min_ul_margin = std::min(r.min_ul_margin, q.ul);
  }
  r.qos_ok = r.min_dl_margin >= -1e-6 && r.min_ul_margin >= -1e-6;
  r.budgets_ok = r.p.within_budgets(config.P_l, config.P_d, 1e-9);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

SolveRecord run_solver(const Instance& inst, const NetworkConfig& config, Method method,
                       const RunOptions& options) {
  SolveRecord r;
  r.seed = inst.seed;
  r.method = method;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const SinrModel model(inst.gains, inst.channels, config);
    switch (method) {
      case Method::kGreedy:
        r.p = greedy_unfair(inst.gains, config);
        break;
      case Method::kQtSca: {
        auto res = qt_sca_solve(model, config, options.solver);
        r.p = std::move(res.p);
        r.iterations = res.iterations;
        r.trace = std::move(res.objective_trace);
        break;
      }
      case Method::kHgnn: {
        if (options.model == nullptr) throw InvalidInputError("hgnn needs a model archive");
        const HetGraph g = build_graph(inst.gains, inst.topology, config);
        r.p = project_to_budgets(hgnn_forward(g, *options.model, options.hgnn), config);
        break;
      }
    }
    fill_metrics(r, model, config);
  } catch (const InfeasibleError& e) {
    r.status = "infeasible";
    r.error = e.what();
  } catch (const InnerNonConvergenceError& e) {
    r.status = "inner_nonconvergence";
    r.error = e.what();
  } catch (const InvalidInputError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    r.status = "numerical";
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.status != "ok") r.p = PowerAllocation();
  return r;
}

std::vector<SolveRecord> solve_all(const std::vector<Instance>& instances,
                                   const NetworkConfig& config, Method method,
                                   const RunOptions& options) {
  std::vector<SolveRecord> out(instances.size());
  std::vector<std::string> errors(instances.size());
  const long long n = static_cast<long long>(instances.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = run_solver(instances[k], config, method, options);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k].empty()) {
      throw InvalidInputError("instance seed " + std::to_string(instances[k].seed) + ": " +
                              errors[k]);
    }
  }
  return out;
}

std::vector<SolveRecord> solve_all_serial(const std::vector<Instance>& instances,
                                          const NetworkConfig& config, Method method,
                                          const RunOptions& options) {
  std::vector<SolveRecord> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(run_solver(inst, config, method, options));
  return out;
}

std::string metrics_csv(const std::vector<SolveRecord>& records) {
  std::ostringstream s;
  s << "seed,method,status,se,min_dl_margin,min_ul_margin,qos_ok,budgets_ok,iterations\n";
  for (const auto& r : records) {
    s << r.seed << ',' << method_name(r.method) << ',' << r.status << ',' << fmt(r.se) << ','
      << fmt(r.status == "ok" ? r.min_dl_margin : 0.0) << ','
      << fmt(r.status == "ok" ? r.min_ul_margin : 0.0) << ',' << (r.qos_ok ? 1 : 0) << ','
      << (r.budgets_ok ? 1 : 0) << ',' << r.iterations << '\n';
  }
  return s.str();
}

std::string timings_csv(const std::vector<SolveRecord>& records) {
  std::ostringstream s;
  s << "seed,method,seconds\n";
  for (const auto& r : records) {
    s << r.seed << ',' << method_name(r.method) << ',' << fmt(r.seconds) << '\n';
  }
  return s.str();
}

std::string traces_csv(const std::vector<SolveRecord>& records) {
  std::ostringstream s;
  s << "seed,method,iteration,se\n";
  for (const auto& r : records) {
    for (std::size_t t = 0; t < r.trace.size(); ++t) {
      s << r.seed << ',' << method_name(r.method) << ',' << t << ',' << fmt(r.trace[t]) << '\n';
    }
  }
  return s.str();
}

CompareReport compare(const std::map<std::string, std::vector<SolveRecord>>& runs,
                      const std::string& reference) {
  const auto ref_it = runs.find(reference);
  if (ref_it == runs.end()) {
    throw InvalidInputError("reference method '" + reference + "' is not among the runs");
  }
  CompareReport rep;
  rep.reference = reference;
  const auto& ref = ref_it->second;
  for (const auto& r : ref) rep.seeds.push_back(r.seed);
  const std::size_t n = ref.size();
  for (const auto& [name, recs] : runs) {
    if (recs.size() != n) throw InvalidInputError("method " + name + " covers other instances");
    for (std::size_t i = 0; i < n; ++i) {
      if (recs[i].seed != rep.seeds[i]) {
        throw InvalidInputError("method " + name + " covers other instances");
      }
    }
    rep.methods.push_back(name);
  }
  for (const auto& name : rep.methods) {
    const auto& recs = runs.at(name);
    auto& se = rep.se[name];
    auto& ratio = rep.ratio[name];
    MethodSummary s;
    s.method = name;
    std::size_t viol = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool ok = recs[i].status == "ok";
      const double v = ok ? recs[i].se : 0.0;
      const double rv = ref[i].status == "ok" ? ref[i].se : 0.0;
      se.push_back(v);
      ratio.push_back(rv > 0.0 ? v / rv : (v == rv ? 1.0 : 0.0));
      s.max_abs_gap = std::max(s.max_abs_gap, std::abs(v - rv));
      if (!ok) ++s.failures;
      if (!ok || !recs[i].qos_ok) ++viol;
    }
    if (n > 0) {
      const double dn = static_cast<double>(n);
      s.mean_se = std::accumulate(se.begin(), se.end(), 0.0) / dn;
      s.mean_ratio = std::accumulate(ratio.begin(), ratio.end(), 0.0) / dn;
      s.qos_violation_rate = static_cast<double>(viol) / dn;
      std::vector<double> sorted = se;
      std::sort(sorted.begin(), sorted.end());
      const auto idx = static_cast<std::size_t>(std::floor(0.05 * (dn - 1.0)));
      s.se_95 = sorted[idx];
    }
    rep.summary.push_back(s);
  }
  return rep;
}

std::string CompareReport::instances_csv() const {
  std::ostringstream s;
  s << "seed";
  for (const auto& m : methods) s << ',' << m << "_se";
  for (const auto& m : methods) s << ',' << m << "_ratio";
  s << '\n';
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    s << seeds[i];
    for (const auto& m : methods) s << ',' << fmt(se.at(m)[i]);
    for (const auto& m : methods) s << ',' << fmt(ratio.at(m)[i]);
    s << '\n';
  }
  return s.str();
}

std::string CompareReport::cdf_csv() const {
  std::ostringstream s;
  s << "method,se,cdf\n";
  for (const auto& m : methods) {
    for (const auto& [v, p] : empirical_cdf(se.at(m))) s << m << ',' << fmt(v) << ',' << fmt(p) << '\n';
  }
  return s.str();
}

std::string CompareReport::summary_csv() const {
  std::ostringstream s;
  s << "method,mean_se,se_95,qos_violation_rate,mean_ratio,max_abs_gap,failures\n";
  for (const auto& m : summary) {
    s << m.method << ',' << fmt(m.mean_se) << ',' << fmt(m.se_95) << ','
      << fmt(m.qos_violation_rate) << ',' << fmt(m.mean_ratio) << ',' << fmt(m.max_abs_gap)
      << ',' << m.failures << '\n';
  }
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("write to " + path + " failed");
}

}  // namespace cfmdd
