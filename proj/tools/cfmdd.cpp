// Command-line front end: gen-data, train, solve, compare, cluster.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "cfmdd/archive.hpp"
#include "cfmdd/baselines.hpp"
#include "cfmdd/dataset.hpp"
#include "cfmdd/errors.hpp"
#include "cfmdd/hgnn/train.hpp"
#include "cfmdd/runner.hpp"

namespace {

using namespace cfmdd;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumerical = 4;

struct CommonOpts {
  std::string config_path;
  std::optional<std::size_t> L, D, N, M, Mbar;
  std::optional<double> sd;
  std::uint64_t seed = 1;
  std::string out;

  void add(CLI::App* app, bool network_overrides) {
    app->add_option("--config", config_path, "key=value network configuration file");
    if (network_overrides) {
      app->add_option("--L", L, "number of APs");
      app->add_option("--D", D, "number of MSs");
      app->add_option("--N", N, "antennas per AP");
      app->add_option("--M", M, "DL subcarriers");
      app->add_option("--Mbar", Mbar, "UL subcarriers");
      app->add_option("--sd", sd, "square side in meters");
    }
    app->add_option("--seed", seed, "base seed");
  }

  NetworkConfig network() const {
    NetworkConfig c;
    if (!config_path.empty()) c = load_config_file(config_path, c);
    if (L) c.L = *L;
    if (D) c.D = *D;
    if (N) c.N = *N;
    if (M) c.M = *M;
    if (Mbar) c.Mbar = *Mbar;
    if (sd) c.S_D = *sd;
    return c;
  }
};

std::vector<HgnnSample> samples_of(const Dataset& ds) {
  std::vector<HgnnSample> out;
  out.reserve(ds.instances.size());
  for (const auto& inst : ds.instances) {
    out.push_back({build_graph(inst.gains, inst.topology, ds.config),
                   SinrModel(inst.gains, inst.channels, ds.config)});
  }
  return out;
}

int status_exit(const std::vector<SolveRecord>& recs) {
  bool infeasible = false, numerical = false;
  for (const auto& r : recs) {
    infeasible = infeasible || r.status == "infeasible";
    numerical = numerical || r.status == "numerical" || r.status == "inner_nonconvergence";
  }
  if (numerical) return kExitNumerical;
  return infeasible ? kExitInfeasible : kExitOk;
}

RunOptions run_options(Method method, const std::string& model_path, ModelParams& storage) {
  RunOptions opt;
  if (method == Method::kHgnn) {
    if (model_path.empty()) throw CLI::ValidationError("--model", "hgnn requires a model archive");
    storage = load_model(model_path);
    opt.hgnn = config_from_dims(storage.at("meta.dims"));
    storage = load_model(model_path, opt.hgnn);
    opt.model = &storage;
  }
  return opt;
}

std::string join(const std::filesystem::path& dir, const char* name) {
  return (dir / name).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power allocation for MDD cell-free massive-MIMO networks"};
  app.require_subcommand(1);

  CommonOpts gen_o, train_o, solve_o, cmp_o, cl_o;

  auto* gen = app.add_subcommand("gen-data", "generate a dataset of network instances");
  gen_o.add(gen, true);
  std::size_t gen_n = 100;
  std::string split = "train";
  gen->add_option("--n", gen_n, "number of instances");
  gen->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  gen->add_option("--out", gen_o.out, "output JSONL path")->required();

  auto* tr = app.add_subcommand("train", "train CF-HGNN on a dataset");
  train_o.add(tr, false);
  std::string tr_data, tr_curve;
  std::size_t epochs = 100, batch = 64;
  double lr = 1e-3;
  std::vector<double> kappa;
  tr->add_option("--data", tr_data, "training dataset")->required();
  tr->add_option("--epochs", epochs, "training epochs");
  tr->add_option("--batch", batch, "batch size");
  tr->add_option("--lr", lr, "Adam learning rate");
  tr->add_option("--kappa", kappa, "four penalty weights")->expected(4);
  tr->add_option("--curve", tr_curve, "per-epoch loss CSV");
  tr->add_option("--out", train_o.out, "model archive path")->required();

  auto* so = app.add_subcommand("solve", "run one method on every dataset instance");
  solve_o.add(so, false);
  std::string so_data, so_method = "greedy", so_model, so_timings, so_traces;
  so->add_option("--data", so_data, "dataset")->required();
  so->add_option("--method", so_method, "qtsca, greedy or hgnn")
      ->check(CLI::IsMember({"qtsca", "greedy", "hgnn"}));
  so->add_option("--model", so_model, "model archive (hgnn)");
  so->add_option("--out", solve_o.out, "metrics CSV path")->required();
  so->add_option("--timings", so_timings, "wall-clock CSV path");
  so->add_option("--traces", so_traces, "objective trace CSV path");

  auto* cm = app.add_subcommand("compare", "compare methods against a reference");
  cmp_o.add(cm, false);
  std::string cm_data, cm_model, cm_ref = "qtsca";
  std::vector<std::string> cm_methods{"qtsca", "greedy"};
  cm->add_option("--data", cm_data, "dataset")->required();
  cm->add_option("--method", cm_methods, "methods to run")
      ->check(CLI::IsMember({"qtsca", "greedy", "hgnn"}));
  cm->add_option("--reference", cm_ref, "reference method");
  cm->add_option("--model", cm_model, "model archive (hgnn)");
  cm->add_option("--out", cmp_o.out, "output directory")->required();

  auto* cl = app.add_subcommand("cluster", "user-centric clustering of one instance");
  cl_o.add(cl, true);
  cl->add_option("--out", cl_o.out, "assignment CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      const NetworkConfig c = gen_o.network();
      const std::uint64_t base = mix_seed(gen_o.seed, split == "train" ? 1 : 2);
      gen_dataset(c, base, gen_n, gen_o.out);
      std::cout << "wrote " << gen_n << " instances to " << gen_o.out << "\n";
      return kExitOk;
    }
    if (*tr) {
      const Dataset ds = read_dataset(tr_data);
      HgnnConfig h = HgnnConfig::for_network(ds.config);
      h.epochs = epochs;
      h.batch_size = batch;
      h.lr = lr;
      if (!kappa.empty()) std::copy(kappa.begin(), kappa.end(), h.kappa.begin());
      TrainOptions opt;
      opt.seed = train_o.seed;
      opt.on_epoch = [](std::size_t e, double l) {
        std::cerr << "epoch " << e << " loss " << l << "\n";
      };
      const TrainResult res = train(samples_of(ds), h, opt);
      save_model(res.params, train_o.out);
      if (!tr_curve.empty()) {
        std::string csv = "epoch,loss\n";
        for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, res.epoch_loss[e]);
          csv += buf;
        }
        write_text(tr_curve, csv);
      }
      return kExitOk;
    }
    if (*so) {
      const Dataset ds = read_dataset(so_data);
      const Method m = parse_method(so_method);
      ModelParams storage;
      const RunOptions opt = run_options(m, so_model, storage);
      const auto recs = solve_all(ds.instances, ds.config, m, opt);
      write_text(solve_o.out, metrics_csv(recs));
      if (!so_timings.empty()) write_text(so_timings, timings_csv(recs));
      if (!so_traces.empty()) write_text(so_traces, traces_csv(recs));
      for (const auto& r : recs) {
        if (r.status != "ok") std::cerr << "seed " << r.seed << ": " << r.error << "\n";
      }
      return status_exit(recs);
    }
    if (*cm) {
      const Dataset ds = read_dataset(cm_data);
      const std::filesystem::path dir(cmp_o.out);
      std::filesystem::create_directories(dir);
      std::map<std::string, std::vector<SolveRecord>> runs;
      ModelParams storage;
      std::vector<SolveRecord> all;
      for (const auto& name : cm_methods) {
        const Method m = parse_method(name);
        const RunOptions opt = run_options(m, cm_model, storage);
        auto recs = solve_all(ds.instances, ds.config, m, opt);
        all.insert(all.end(), recs.begin(), recs.end());
        runs[name] = std::move(recs);
      }
      const CompareReport rep = compare(runs, cm_ref);
      write_text(join(dir, "instances.csv"), rep.instances_csv());
      write_text(join(dir, "cdf.csv"), rep.cdf_csv());
      write_text(join(dir, "summary.csv"), rep.summary_csv());
      write_text(join(dir, "timings.csv"), timings_csv(all));
      write_text(join(dir, "traces.csv"), traces_csv(all));
      std::cout << rep.summary_csv();
      return status_exit(all);
    }
    if (*cl) {
      const NetworkConfig c = cl_o.network();
      c.validate(false);
      const Topology topo = generate_topology(c, cl_o.seed);
      const ChannelSet ch = draw_channels(topo, c, cl_o.seed);
      const ClusterAssignment a = user_centric_cluster(single_user_gains(ch), c);
      std::string csv = "ap,ms\n";
      for (std::size_t l = 0; l < a.L(); ++l) {
        for (const auto d : a.ms_of_ap[l]) csv += std::to_string(l) + "," + std::to_string(d) + "\n";
      }
      if (cl_o.out.empty()) {
        std::cout << csv;
      } else {
        write_text(cl_o.out, csv);
      }
      return kExitOk;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InnerNonConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
