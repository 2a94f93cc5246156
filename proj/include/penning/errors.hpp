#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "penning/vec3.hpp"

namespace penning {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Evaluation on (or inside) an electrode where the field model is singular.
class SingularPoint : public Error {
 public:
  using Error::Error;
};

/// Point outside the region a field source is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

class GeometryConflict : public Error {
 public:
  using Error::Error;
};

class MarginError : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double last_residual, long sweeps)
      : Error(what), last_residual_(last_residual), sweeps_(sweeps) {}
  double last_residual() const noexcept { return last_residual_; }
  long sweeps() const noexcept { return sweeps_; }

 private:
  double last_residual_;
  long sweeps_;
};

class UnstableTrap : public Error {
 public:
  using Error::Error;
};

class NoAxialConfinement : public Error {
 public:
  using Error::Error;
};

class FlatField : public Error {
 public:
  using Error::Error;
};

class TooShort : public Error {
 public:
  using Error::Error;
};

/// A search that brackets nothing. Carries the scanned (parameter, value) table.
class NotFound : public Error {
 public:
  NotFound(const std::string& what, std::vector<std::pair<double, double>> table)
      : Error(what), table_(std::move(table)) {}
  const std::vector<std::pair<double, double>>& table() const noexcept { return table_; }

 private:
  std::vector<std::pair<double, double>> table_;
};

/// A hop plan cannot meet its constraints; `point` is the worst location.
class PlanInfeasible : public Error {
 public:
  PlanInfeasible(const std::string& what, Vec3 point) : Error(what), point_(point) {}
  const Vec3& point() const noexcept { return point_; }

 private:
  Vec3 point_;
};

/// Malformed trap specification or command-line configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace penning
