#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace irlobs {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN or Inf.
class NumericOverflow : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (e.g. the
/// condition number of a zero matrix).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A lookup reached further back than a signal's retention window.
class WindowUnderflow : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  RankDeficient(const std::string& what, std::size_t rank)
      : Error(what + " (numerical rank " + std::to_string(rank) + ")"), rank_(rank) {}
  std::size_t rank() const noexcept { return rank_; }

 private:
  std::size_t rank_;
};

/// Iterative solver did not reach its tolerance.
class SolverFailure : public Error {
 public:
  SolverFailure(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Invalid or inconsistent configuration. The message names the field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& why)
      : Error(field + ": " + why), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace irlobs
