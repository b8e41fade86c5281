#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>

namespace cfmdd {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

/// Scalar system parameters of an MDD cell-free network. Powers are in watts,
/// interference levels are linear power ratios, QoS thresholds in nats/s/Hz.
struct NetworkConfig {
  std::size_t L = 24;     // APs
  std::size_t D = 6;      // MSs
  std::size_t N = 8;      // antennas per AP
  std::size_t M = 4;      // DL subcarriers
  std::size_t Mbar = 2;   // UL subcarriers
  double S_D = 400.0;     // square side, meters
  double P_l = dbm_to_watts(40.0);
  double P_d = dbm_to_watts(30.0);
  double chi_dl = 0.5;
  double chi_ul = 0.1;
  double sigma2 = dbm_to_watts(-94.0);
  std::size_t U = 4;
  double xi_si_ap = db_to_linear(-120.0);
  double xi_si_ms = db_to_linear(-110.0);
  double xi_iai = db_to_linear(-72.0);
  double xi_imi = db_to_linear(-42.0);
  double sigma_sh = 4.0;  // dB

  std::size_t M_sum() const { return M + Mbar; }

  /// Throws ConfigError on any violated invariant. `require_zf` additionally
  /// enforces N >= D.
  void validate(bool require_zf = true) const;
};

/// Parses a plain-text `key=value` file (blank lines and `#` comments
/// ignored) on top of the defaults. Power and interference keys are given in
/// dBm/dB (`P_l_dbm`, `xi_iai_db`, ...).
NetworkConfig parse_config_text(const std::string& text, NetworkConfig base = {});
NetworkConfig load_config_file(const std::string& path, NetworkConfig base = {});

/// Applies a single `key=value` assignment; unknown keys throw ConfigError.
void apply_config_key(NetworkConfig& config, const std::string& key, const std::string& value);

std::map<std::string, double> config_to_map(const NetworkConfig& config);

}  // namespace cfmdd
