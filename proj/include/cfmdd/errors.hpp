#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cfmdd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed call arguments (negative powers, out-of-range indices, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A per-subcarrier channel matrix whose smallest singular value falls below
/// the rank threshold.
class RankDeficientError : public Error {
 public:
  RankDeficientError(std::size_t ap, std::size_t subcarrier, double cond_ratio)
      : Error("rank-deficient channel matrix at AP " + std::to_string(ap) +
              ", subcarrier " + std::to_string(subcarrier) +
              " (sigma_min/sigma_max = " + std::to_string(cond_ratio) + ")"),
        ap_(ap),
        subcarrier_(subcarrier) {}
  std::size_t ap() const { return ap_; }
  std::size_t subcarrier() const { return subcarrier_; }

 private:
  std::size_t ap_;
  std::size_t subcarrier_;
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(double worst_slack)
      : Error("QoS constraints cannot be met under the power budgets (worst slack " +
              std::to_string(worst_slack) + ")"),
        worst_slack_(worst_slack) {}
  double worst_slack() const { return worst_slack_; }

 private:
  double worst_slack_;
};

class InnerNonConvergenceError : public Error {
 public:
  InnerNonConvergenceError(std::size_t iterations, double residual)
      : Error("inner solver did not converge after " + std::to_string(iterations) +
              " iterations (constraint residual " + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}
  std::size_t iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

/// NaN/Inf produced where finite values are required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Bad magic, unsupported version or malformed structure in a model archive.
class ArchiveError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public ArchiveError {
 public:
  using ArchiveError::ArchiveError;
};

}  // namespace cfmdd
