#pragma once

// Shared scalar types, error hierarchy and the Laplace parameter.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bfe {

using Complex = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;
using CMat3 = Eigen::Matrix3cd;
using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, int line, int column)
      : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
        message_(what), line_(line), column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string& message() const noexcept { return message_; }

private:
  std::string message_;
  int line_;
  int column_;
};

class DimensionError : public Error {
public:
  using Error::Error;
};
class OrientationError : public Error {
public:
  using Error::Error;
};
class WatertightError : public Error {
public:
  using Error::Error;
};
class ConfigError : public Error {
public:
  using Error::Error;
};
class ConstraintError : public ConfigError {
public:
  using ConfigError::ConfigError;
};
class SingularityError : public Error {
public:
  using Error::Error;
};
class SolverError : public Error {
public:
  using Error::Error;
};
class IoError : public Error {
public:
  using Error::Error;
};

/// A point of the open right half plane together with sigma = Re s and
/// sigma_under = min(1, sigma).
class LaplaceParameter {
public:
  explicit LaplaceParameter(Complex s) : s_(s) {
    if (!(s.real() > 0.0) || !std::isfinite(s.real()) || !std::isfinite(s.imag()))
      throw DimensionError("Laplace parameter must lie in the open right half plane, got s = (" +
                           std::to_string(s.real()) + ", " + std::to_string(s.imag()) + ")");
  }
  LaplaceParameter(double re, double im) : LaplaceParameter(Complex(re, im)) {}

  Complex s() const noexcept { return s_; }
  double sigma() const noexcept { return s_.real(); }
  double sigma_under() const noexcept { return std::min(1.0, s_.real()); }
  double abs() const noexcept { return std::abs(s_); }

private:
  Complex s_;
};

}  // namespace bfe
