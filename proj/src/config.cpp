#include "cfmdd/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "cfmdd/errors.hpp"

namespace cfmdd {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
  }
  if (used != value.size()) {
    throw ConfigError("config key '" + key + "': trailing characters in '" + value + "'");
  }
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  if (v < 0 || v != std::floor(v)) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" +
                      value + "'");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

void NetworkConfig::validate(bool require_zf) const {
  if (L < 1 || D < 1 || N < 1 || M < 1 || Mbar < 1 || U < 1) {
    throw ConfigError("all counts (L, D, N, M, Mbar, U) must be >= 1");
  }
  if (require_zf && N < D) {
    throw ConfigError("zero-forcing requires N >= D (N=" + std::to_string(N) +
                      ", D=" + std::to_string(D) + ")");
  }
  if (U > M_sum()) {
    throw ConfigError("tap count U exceeds the subcarrier count M + Mbar");
  }
  if (!(S_D >= 0.0)) throw ConfigError("S_D must be non-negative");
  if (!(P_l >= 0.0) || !(P_d >= 0.0)) throw ConfigError("power budgets must be non-negative");
  if (!(sigma2 > 0.0)) throw ConfigError("noise power sigma2 must be positive");
  for (const double xi : {xi_si_ap, xi_si_ms, xi_iai, xi_imi}) {
    if (!(xi > 0.0 && xi <= 1.0)) {
      throw ConfigError("residual interference ratios must lie in (0, 1]");
    }
  }
  if (!(chi_dl >= 0.0) || !(chi_ul >= 0.0)) throw ConfigError("QoS thresholds must be >= 0");
  if (!(sigma_sh >= 0.0)) throw ConfigError("shadowing std must be >= 0");
}

void apply_config_key(NetworkConfig& c, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"L", [&](const std::string& v) { c.L = parse_count(key, v); }},
      {"D", [&](const std::string& v) { c.D = parse_count(key, v); }},
      {"N", [&](const std::string& v) { c.N = parse_count(key, v); }},
      {"M", [&](const std::string& v) { c.M = parse_count(key, v); }},
      {"Mbar", [&](const std::string& v) { c.Mbar = parse_count(key, v); }},
      {"U", [&](const std::string& v) { c.U = parse_count(key, v); }},
      {"S_D", [&](const std::string& v) { c.S_D = parse_double(key, v); }},
      {"P_l", [&](const std::string& v) { c.P_l = parse_double(key, v); }},
      {"P_d", [&](const std::string& v) { c.P_d = parse_double(key, v); }},
      {"P_l_dbm", [&](const std::string& v) { c.P_l = dbm_to_watts(parse_double(key, v)); }},
      {"P_d_dbm", [&](const std::string& v) { c.P_d = dbm_to_watts(parse_double(key, v)); }},
      {"chi_dl", [&](const std::string& v) { c.chi_dl = parse_double(key, v); }},
      {"chi_ul", [&](const std::string& v) { c.chi_ul = parse_double(key, v); }},
      {"sigma2", [&](const std::string& v) { c.sigma2 = parse_double(key, v); }},
      {"sigma2_dbm", [&](const std::string& v) { c.sigma2 = dbm_to_watts(parse_double(key, v)); }},
      {"xi_si_ap", [&](const std::string& v) { c.xi_si_ap = parse_double(key, v); }},
      {"xi_si_ms", [&](const std::string& v) { c.xi_si_ms = parse_double(key, v); }},
      {"xi_iai", [&](const std::string& v) { c.xi_iai = parse_double(key, v); }},
      {"xi_imi", [&](const std::string& v) { c.xi_imi = parse_double(key, v); }},
      {"xi_si_ap_db", [&](const std::string& v) { c.xi_si_ap = db_to_linear(parse_double(key, v)); }},
      {"xi_si_ms_db", [&](const std::string& v) { c.xi_si_ms = db_to_linear(parse_double(key, v)); }},
      {"xi_iai_db", [&](const std::string& v) { c.xi_iai = db_to_linear(parse_double(key, v)); }},
      {"xi_imi_db", [&](const std::string& v) { c.xi_imi = db_to_linear(parse_double(key, v)); }},
      {"sigma_sh", [&](const std::string& v) { c.sigma_sh = parse_double(key, v); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(value);
}

NetworkConfig parse_config_text(const std::string& text, NetworkConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    apply_config_key(base, line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

NetworkConfig load_config_file(const std::string& path, NetworkConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), base);
}

std::map<std::string, double> config_to_map(const NetworkConfig& c) {
  return {
      {"L", static_cast<double>(c.L)},       {"D", static_cast<double>(c.D)},
      {"N", static_cast<double>(c.N)},       {"M", static_cast<double>(c.M)},
      {"Mbar", static_cast<double>(c.Mbar)}, {"U", static_cast<double>(c.U)},
      {"S_D", c.S_D},                        {"P_l", c.P_l},
      {"P_d", c.P_d},                        {"chi_dl", c.chi_dl},
      {"chi_ul", c.chi_ul},                  {"sigma2", c.sigma2},
      {"xi_si_ap", c.xi_si_ap},              {"xi_si_ms", c.xi_si_ms},
      {"xi_iai", c.xi_iai},                  {"xi_imi", c.xi_imi},
      {"sigma_sh", c.sigma_sh},
  };
}

}  // namespace cfmdd
