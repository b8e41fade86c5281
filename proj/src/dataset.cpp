#include "cfmdd/dataset.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cfmdd/errors.hpp"
#include "cfmdd/rng.hpp"

namespace cfmdd {

using nlohmann::json;

std::uint64_t instance_seed(std::uint64_t base, std::size_t index) {
  return mix_seed(base, 0x1000 + index);
}

Instance make_instance(const NetworkConfig& config, std::uint64_t seed) {
  Instance inst;
  inst.seed = seed;
  inst.topology = generate_topology(config, seed);
  inst.channels = draw_channels(inst.topology, config, seed);
  inst.gains = equivalent_gains(zf_beamformers(inst.channels, config), inst.channels);
  return inst;
}

std::vector<Instance> generate_instances(const NetworkConfig& config,
                                         const std::vector<std::uint64_t>& seeds) {
  config.validate();
  std::vector<Instance> out(seeds.size());
  std::vector<std::string> errors(seeds.size());
  const long long n = static_cast<long long>(seeds.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = make_instance(config, seeds[k]);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k].empty()) {
      throw NumericalError("instance seed " + std::to_string(seeds[k]) + ": " + errors[k]);
    }
  }
  return out;
}

std::vector<Instance> generate_instances_serial(const NetworkConfig& config,
                                                const std::vector<std::uint64_t>& seeds) {
  config.validate();
  std::vector<Instance> out;
  out.reserve(seeds.size());
  for (const auto s : seeds) out.push_back(make_instance(config, s));
  return out;
}

namespace {

json points(const std::vector<Point>& p) {
  json a = json::array();
  for (const auto& x : p) a.push_back({x[0], x[1]});
  return a;
}

std::vector<Point> read_points(const json& a) {
  std::vector<Point> p;
  for (const auto& x : a) p.push_back({x.at(0).get<double>(), x.at(1).get<double>()});
  return p;
}

std::vector<double> read_vec(const json& a, std::size_t expected, const char* what) {
  auto v = a.get<std::vector<double>>();
  if (v.size() != expected) {
    throw InvalidInputError(std::string("dataset field ") + what + " has " +
                            std::to_string(v.size()) + " entries, expected " +
                            std::to_string(expected));
  }
  return v;
}

}  // namespace

std::string dataset_header(const NetworkConfig& config, std::size_t count) {
  json h;
  h["schema"] = "cfmdd.dataset";
  h["version"] = kDatasetVersion;
  h["count"] = count;
  json c;
  for (const auto& [k, v] : config_to_map(config)) c[k] = v;
  h["config"] = c;
  return h.dump();
}

std::string instance_record(const Instance& inst) {
  const auto& ch = inst.channels;
  const std::size_t L = ch.L(), D = ch.D();
  json r;
  r["seed"] = inst.seed;
  r["ap"] = points(inst.topology.ap_positions);
  r["ms"] = points(inst.topology.ms_positions);
  r["omega"] = inst.gains.omega;
  r["upsilon"] = inst.gains.upsilon;
  std::vector<double> bld, bll, bdd;
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t d = 0; d < D; ++d) bld.push_back(ch.beta_ld(l, d));
    for (std::size_t lp = 0; lp < L; ++lp) bll.push_back(ch.beta_ll(l, lp));
  }
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t dp = 0; dp < D; ++dp) bdd.push_back(ch.beta_dd(d, dp));
  }
  r["beta_ld"] = bld;
  r["beta_ll"] = bll;
  r["beta_dd"] = bdd;
  return r.dump();
}

void write_dataset(const std::string& path, const NetworkConfig& config,
                   const std::vector<Instance>& instances) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << dataset_header(config, instances.size()) << '\n';
  for (const auto& inst : instances) out << instance_record(inst) << '\n';
  if (!out) throw IoError("write to " + path + " failed");
}

Dataset parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInputError("dataset is empty");
  Dataset ds;
  std::size_t count = 0;
  try {
    const json h = json::parse(line);
    if (h.at("schema").get<std::string>() != "cfmdd.dataset") {
      throw InvalidInputError("not a dataset file");
    }
    if (h.at("version").get<int>() != kDatasetVersion) {
      throw InvalidInputError("unsupported dataset version");
    }
    for (const auto& [k, v] : h.at("config").items()) {
      std::ostringstream s;
      s.precision(17);
      s << v.get<double>();
      apply_config_key(ds.config, k, s.str());
    }
    count = h.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("malformed dataset header: ") + e.what());
  }
  const auto& c = ds.config;
  const std::size_t L = c.L, D = c.D, M = c.M, Mbar = c.Mbar;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json r = json::parse(line);
      Instance inst;
      inst.seed = r.at("seed").get<std::uint64_t>();
      inst.topology.ap_positions = read_points(r.at("ap"));
      inst.topology.ms_positions = read_points(r.at("ms"));
      inst.gains = EquivalentGains(L, D, M, Mbar);
      inst.gains.omega = read_vec(r.at("omega"), L * D * M, "omega");
      inst.gains.upsilon = read_vec(r.at("upsilon"), L * D * Mbar, "upsilon");
      inst.channels = ChannelSet(L, D, c.N, M, Mbar, c.U);
      const auto bld = read_vec(r.at("beta_ld"), L * D, "beta_ld");
      const auto bll = read_vec(r.at("beta_ll"), L * L, "beta_ll");
      const auto bdd = read_vec(r.at("beta_dd"), D * D, "beta_dd");
      for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t d = 0; d < D; ++d) inst.channels.beta_ld(l, d) = bld[l * D + d];
        for (std::size_t lp = 0; lp < L; ++lp) inst.channels.beta_ll(l, lp) = bll[l * L + lp];
      }
      for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t dp = 0; dp < D; ++dp) inst.channels.beta_dd(d, dp) = bdd[d * D + dp];
      }
      ds.instances.push_back(std::move(inst));
    } catch (const json::exception& e) {
      throw InvalidInputError(std::string("malformed dataset record: ") + e.what());
    }
  }
  if (ds.instances.size() != count) {
    throw InvalidInputError("dataset holds " + std::to_string(ds.instances.size()) +
                            " records but the header announces " + std::to_string(count));
  }
  return ds;
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return parse_dataset(s.str());
}

void gen_dataset(const NetworkConfig& config, std::uint64_t base_seed, std::size_t count,
                 const std::string& path) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < count; ++i) seeds.push_back(instance_seed(base_seed, i));
  write_dataset(path, config, generate_instances(config, seeds));
}

}  // namespace cfmdd
