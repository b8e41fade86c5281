#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <numeric>
#include <unistd.h>

#include "cfmdd/archive.hpp"
#include "cfmdd/dataset.hpp"
#include "cfmdd/errors.hpp"
#include "cfmdd/runner.hpp"
#include "helpers.hpp"

using namespace cfmdd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("cfmdd_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::uint8_t> slurp_bytes(const std::string& path) {
  const std::string s = slurp(path);
  return {s.begin(), s.end()};
}

void spit(const std::string& path, const std::vector<std::uint8_t>& b) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("dataset generation") {
  TempDir dir;
  const NetworkConfig c = test::small_config(4, 2, 2, 2, 1);

  SUBCASE("same seed gives the same bytes") {
    gen_dataset(c, 17, 5, dir.file("a.jsonl"));
    gen_dataset(c, 17, 5, dir.file("b.jsonl"));
    gen_dataset(c, 18, 5, dir.file("c.jsonl"));
    CHECK(slurp(dir.file("a.jsonl")) == slurp(dir.file("b.jsonl")));
    CHECK(slurp(dir.file("a.jsonl")) != slurp(dir.file("c.jsonl")));
  }
  SUBCASE("empty dataset holds only the header") {
    gen_dataset(c, 1, 0, dir.file("e.jsonl"));
    const std::string text = slurp(dir.file("e.jsonl"));
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    const Dataset ds = read_dataset(dir.file("e.jsonl"));
    CHECK(ds.instances.empty());
    CHECK(ds.config.L == 4);
  }
  SUBCASE("round trip is exact") {
    gen_dataset(c, 3, 4, dir.file("r.jsonl"));
    const Dataset ds = read_dataset(dir.file("r.jsonl"));
    REQUIRE(ds.instances.size() == 4);
    CHECK(config_to_map(ds.config) == config_to_map(c));
    for (std::size_t i = 0; i < 4; ++i) {
      const Instance fresh = make_instance(c, instance_seed(3, i));
      const Instance& back = ds.instances[i];
      CHECK(back.seed == fresh.seed);
      CHECK(back.gains.omega == fresh.gains.omega);
      CHECK(back.gains.upsilon == fresh.gains.upsilon);
      CHECK(back.topology.ap_positions == fresh.topology.ap_positions);
      CHECK(back.topology.ms_positions == fresh.topology.ms_positions);
      // the SINR model only needs gains and large-scale terms
      const PowerAllocation p = test::random_allocation(c, i + 1);
      CHECK(SinrModel(back.gains, back.channels, ds.config).spectral_efficiency(p) ==
            SinrModel(fresh.gains, fresh.channels, c).spectral_efficiency(p));
    }
  }
  SUBCASE("instance seeds are distinct") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t base : {1u, 2u}) {
      for (std::size_t i = 0; i < 1000; ++i) seen.insert(instance_seed(base, i));
    }
    CHECK(seen.size() == 2000);
    CHECK(instance_seed(5, 3) == instance_seed(5, 3));
  }
  SUBCASE("parallel generation matches serial") {
    std::vector<std::uint64_t> seeds{4, 9, 1, 7};
    const auto a = generate_instances(c, seeds);
    const auto b = generate_instances_serial(c, seeds);
    for (std::size_t i = 0; i < seeds.size(); ++i) CHECK(instance_record(a[i]) == instance_record(b[i]));
  }
  SUBCASE("malformed files") {
    CHECK_THROWS_AS(read_dataset(dir.file("missing.jsonl")), IoError);
    CHECK_THROWS_AS(parse_dataset(""), InvalidInputError);
    CHECK_THROWS_AS(parse_dataset("{\"schema\":\"other\"}\n"), InvalidInputError);
    const std::string header = dataset_header(c, 2);
    CHECK_THROWS_AS(parse_dataset(header + "\n" + instance_record(make_instance(c, 1)) + "\n"),
                    InvalidInputError);
    CHECK_THROWS_AS(parse_dataset(header + "\n{\"seed\":1}\n{\"seed\":2}\n"), InvalidInputError);
  }
}

TEST_CASE("solver runs") {
  const NetworkConfig c = test::small_config(6, 2, 2, 2, 1);
  const Instance inst = make_instance(c, 2);
  RunOptions opt;

  SUBCASE("greedy") {
    const auto t0 = std::chrono::steady_clock::now();
    const SolveRecord r = run_solver(inst, c, Method::kGreedy, opt);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    CHECK(ms < 10.0);
    CHECK(r.status == "ok");
    for (std::size_t l = 0; l < c.L; ++l) CHECK(r.p.ap_total(l) == doctest::Approx(c.P_l).epsilon(1e-12));
    for (std::size_t d = 0; d < c.D; ++d) CHECK(r.p.ms_total(d) == doctest::Approx(c.P_d).epsilon(1e-12));
    CHECK(r.budgets_ok);
    CHECK(r.se > 0.0);
  }
  SUBCASE("QT-SCA") {
    const SolveRecord r = run_solver(inst, c, Method::kQtSca, opt);
    CHECK(r.status == "ok");
    CHECK(r.qos_ok);
    CHECK(r.budgets_ok);
    CHECK(r.trace.size() == r.iterations + 1);  // initial point first
    CHECK(r.se == doctest::Approx(r.trace.back()).epsilon(1e-9));
  }
  SUBCASE("infeasible instances are recorded and the batch continues") {
    NetworkConfig hard = c;
    hard.chi_dl = 60.0;
    const std::vector<Instance> insts{make_instance(hard, 1), make_instance(hard, 2)};
    const auto recs = solve_all(insts, hard, Method::kQtSca, opt);
    REQUIRE(recs.size() == 2);
    for (const auto& r : recs) {
      CHECK(r.status == "infeasible");
      CHECK_FALSE(r.error.empty());
      CHECK(r.p.p_dl.empty());
    }
    const std::string csv = metrics_csv(recs);
    CHECK(csv.find(",qtsca,infeasible,") != std::string::npos);
  }
  SUBCASE("hgnn without a model") {
    CHECK_THROWS_AS(run_solver(inst, c, Method::kHgnn, opt), InvalidInputError);
    CHECK_THROWS_AS(solve_all({inst}, c, Method::kHgnn, opt), InvalidInputError);
  }
  SUBCASE("hgnn with a model stays within budgets") {
    HgnnConfig h = HgnnConfig::for_network(c);
    h.F_ap_out = h.F_ms_out = h.hidden = 8;
    ModelParams params = init_params(h, 1);
    for (auto& v : params.at("ap.head.2.b").values()) v = 5.0;
    opt.model = &params;
    opt.hgnn = h;
    const SolveRecord r = run_solver(inst, c, Method::kHgnn, opt);
    CHECK(r.status == "ok");
    CHECK(r.budgets_ok);
  }
  SUBCASE("method names") {
    for (const Method m : {Method::kQtSca, Method::kGreedy, Method::kHgnn}) {
      CHECK(parse_method(method_name(m)) == m);
    }
    CHECK_THROWS_AS(parse_method("wmmse"), InvalidInputError);
  }
}

TEST_CASE("parallel and serial runs give identical metrics") {
  const NetworkConfig c = test::small_config(6, 2, 2, 2, 1);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < 6; ++i) seeds.push_back(instance_seed(11, i));
  const auto insts = generate_instances(c, seeds);
  for (const Method m : {Method::kGreedy, Method::kQtSca}) {
    const auto a = solve_all(insts, c, m, {});
    const auto b = solve_all_serial(insts, c, m, {});
    CHECK(metrics_csv(a) == metrics_csv(b));
    CHECK(traces_csv(a) == traces_csv(b));
    const std::string t = timings_csv(a);
    CHECK(t.rfind("seed,method,seconds\n", 0) == 0);
    CHECK(std::count(t.begin(), t.end(), '\n') == 7);
  }
}

TEST_CASE("comparison report") {
  const NetworkConfig c = test::small_config(6, 2, 2, 2, 1);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < 25; ++i) seeds.push_back(instance_seed(21, i));
  const auto insts = generate_instances(c, seeds);
  std::map<std::string, std::vector<SolveRecord>> runs;
  runs["qtsca"] = solve_all(insts, c, Method::kQtSca, {});

  SUBCASE("reference against itself") {
    const CompareReport rep = compare(runs, "qtsca");
    for (const double r : rep.ratio.at("qtsca")) CHECK(r == 1.0);
    REQUIRE(rep.summary.size() == 1);
    CHECK(rep.summary[0].mean_ratio == 1.0);
    CHECK(rep.summary[0].max_abs_gap == 0.0);
  }
  SUBCASE("missing reference") { CHECK_THROWS_AS(compare(runs, "hgnn"), InvalidInputError); }
  SUBCASE("mismatched instance lists") {
    runs["greedy"] = solve_all({insts[0]}, c, Method::kGreedy, {});
    CHECK_THROWS_AS(compare(runs, "qtsca"), InvalidInputError);
  }
  SUBCASE("summary and CDF") {
    runs["greedy"] = solve_all(insts, c, Method::kGreedy, {});
    const CompareReport rep = compare(runs, "qtsca");
    const auto& g = rep.se.at("greedy");
    const auto& q = rep.se.at("qtsca");
    std::size_t infeasible = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (runs["qtsca"][i].status != "ok") {
        ++infeasible;
        CHECK(q[i] == 0.0);
        CHECK(rep.ratio.at("greedy")[i] == 0.0);
        continue;
      }
      CHECK(rep.ratio.at("greedy")[i] == doctest::Approx(g[i] / q[i]).epsilon(1e-15));
    }
    const auto& sq = rep.summary[0].method == "qtsca" ? rep.summary[0] : rep.summary[1];
    CHECK(sq.failures == infeasible);
    std::vector<double> sorted = g;
    std::sort(sorted.begin(), sorted.end());
    const auto& sg = rep.summary[0].method == "greedy" ? rep.summary[0] : rep.summary[1];
    CHECK(sg.se_95 == sorted[1]);  // floor(0.05 * 24) = 1
    CHECK(sg.mean_se == doctest::Approx(std::accumulate(g.begin(), g.end(), 0.0) / 25.0));

    std::istringstream cdf(rep.cdf_csv());
    std::string line;
    std::getline(cdf, line);
    CHECK(line == "method,se,cdf");
    std::map<std::string, std::pair<double, double>> last;
    while (std::getline(cdf, line)) {
      const auto a = line.find(','), b = line.rfind(',');
      const std::string m = line.substr(0, a);
      const double v = std::stod(line.substr(a + 1, b - a - 1)), p = std::stod(line.substr(b + 1));
      if (last.count(m) != 0) {
        CHECK(v > last[m].first);
        CHECK(p > last[m].second);
      }
      last[m] = {v, p};
    }
    for (const auto& [m, vp] : last) CHECK(vp.second == 1.0);
    const std::string inst_csv = rep.instances_csv();
    CHECK(inst_csv.rfind("seed,greedy_se,qtsca_se,greedy_ratio,qtsca_ratio\n", 0) == 0);
    CHECK(std::count(inst_csv.begin(), inst_csv.end(), '\n') == 26);
  }
  SUBCASE("failed runs count as zero") {
    auto failed = runs["qtsca"];
    std::size_t first_ok = 0;
    while (runs["qtsca"][first_ok].status != "ok") ++first_ok;
    const std::size_t before = static_cast<std::size_t>(
        std::count_if(failed.begin(), failed.end(), [](const SolveRecord& r) { return r.status != "ok"; }));
    failed[first_ok].status = "infeasible";
    runs["broken"] = failed;
    const CompareReport rep = compare(runs, "qtsca");
    CHECK(rep.se.at("broken")[first_ok] == 0.0);
    CHECK(rep.ratio.at("broken")[first_ok] == 0.0);
    for (const auto& s : rep.summary) {
      if (s.method == "broken") {
        CHECK(s.failures == before + 1);
        CHECK(s.qos_violation_rate == doctest::Approx(static_cast<double>(before + 1) / 25.0));
      }
    }
  }
}

TEST_CASE("model archive") {
  TempDir dir;
  const NetworkConfig c = test::small_config(4, 2, 2, 2, 1);
  HgnnConfig h = HgnnConfig::for_network(c);
  h.F_ap_out = h.F_ms_out = h.hidden = 8;
  ModelParams params = init_params(h, 3);
  params.at("ap.embed.bn.var")[2] = 0.1 + 1e-17;
  params.at("ms.feat.mean")[0] = -1.0 / 3.0;
  const std::string path = dir.file("m.cfhg");
  save_model(params, path);

  SUBCASE("round trip is bitwise") {
    const ModelParams back = load_model(path, h);
    CHECK(back == params);
    CHECK(load_model(path) == params);
    CHECK(decode_archive(encode_archive(params)) == params);
    const auto bytes = slurp_bytes(path);
    CHECK(std::equal(bytes.begin(), bytes.begin() + 4, "CFHG"));
    CHECK(bytes == encode_archive(params));
  }
  SUBCASE("truncation fails the checksum") {
    auto bytes = slurp_bytes(path);
    for (const std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{20}, std::size_t{10}}) {
      std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
      spit(dir.file("t.cfhg"), t);
      CHECK_THROWS_AS(load_model(dir.file("t.cfhg"), h), ChecksumError);
    }
  }
  SUBCASE("flipped payload byte") {
    auto bytes = slurp_bytes(path);
    bytes[bytes.size() / 2] ^= 0x10;
    CHECK_THROWS_AS(decode_archive(bytes), ChecksumError);
  }
  SUBCASE("bad magic") {
    auto bytes = slurp_bytes(path);
    bytes[0] = 'X';
    CHECK_THROWS_AS(decode_archive(bytes), ArchiveError);
    try {
      decode_archive(bytes);
    } catch (const ChecksumError&) {
      FAIL("bad magic reported as checksum failure");
    } catch (const ArchiveError&) {
    }
  }
  SUBCASE("configuration mismatch names the tensor") {
    HgnnConfig other = h;
    other.hidden = 16;
    try {
      load_model(path, other);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("xi1.0.W") != std::string::npos);
    }
    HgnnConfig deeper = h;
    deeper.K = 3;
    try {
      load_model(path, deeper);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("k2") != std::string::npos);
    }
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_model(dir.file("nope.cfhg"), h), IoError); }
  SUBCASE("metadata restores the configuration") {
    const HgnnConfig r = config_from_dims(load_model(path).at("meta.dims"));
    CHECK(config_dims(r) == config_dims(h));
  }
}
