#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace kerrloss {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr cplx kI{0.0, 1.0};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input or inconsistent arguments.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A rising-factorial denominator vanished: the parameters belong to another case.
class CaseError : public Error {
 public:
  using Error::Error;
};

class DegeneracyError : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Numerical gates: truncation, grids, integrator stalls.
class GateError : public Error {
 public:
  using Error::Error;
};

class TruncationError : public GateError {
 public:
  using GateError::GateError;
};

class StiffnessError : public GateError {
 public:
  using GateError::GateError;
};

class GridError : public GateError {
 public:
  using GateError::GateError;
};

namespace detail {

inline double log_factorial(int n) {
  if (n < 0) throw ValidationError("log_factorial: negative argument");
  if (n <= 20) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return std::log(f);
  }
  return std::lgamma(n + 1.0);
}

inline double factorial(int n) {
  if (n < 0) throw ValidationError("factorial: negative argument");
  if (n <= 20) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  }
  return std::exp(std::lgamma(n + 1.0));
}

// sqrt(num! / den!)
inline double sqrt_factorial_ratio(int num, int den) {
  if (num <= 20 && den <= 20) {
    double r = 1.0;
    if (num >= den)
      for (int i = den + 1; i <= num; ++i) r *= i;
    else
      for (int i = num + 1; i <= den; ++i) r /= i;
    return std::sqrt(r);
  }
  return std::exp(0.5 * (log_factorial(num) - log_factorial(den)));
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  if (n <= 20) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
  }
  return std::exp(log_factorial(n) - log_factorial(k) - log_factorial(n - k));
}

// sqrt(binom(n1,k1) * binom(n2,k2)), evaluated in log space for large arguments
inline double sqrt_binomial_product(int n1, int k1, int n2, int k2) {
  if (k1 < 0 || k1 > n1 || k2 < 0 || k2 > n2) return 0.0;
  if (n1 <= 20 && n2 <= 20) return std::sqrt(binomial(n1, k1) * binomial(n2, k2));
  double l = log_factorial(n1) - log_factorial(k1) - log_factorial(n1 - k1) + log_factorial(n2) -
             log_factorial(k2) - log_factorial(n2 - k2);
  return std::exp(0.5 * l);
}

inline double max_abs(const CMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double max_abs(const CVector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& e) {
  return e.size() == 0 ? 0.0 : static_cast<double>(e.cwiseAbs().maxCoeff());
}

}  // namespace detail
}  // namespace kerrloss
