#pragma once

#include <vector>

#include "core.hpp"

namespace kerrloss {

inline constexpr double kDenominatorFloor = 1e-9;

inline cplx rising(cplx z, int n) {
  if (n < 0) throw ValidationError("rising: negative order");
  cplx r = 1.0;
  for (int j = 0; j < n; ++j) r *= z + static_cast<double>(j);
  return r;
}

class RisingFactorialTable {
 public:
  RisingFactorialTable(cplx base, int max_order) : base_(base), values_(max_order + 1) {
    values_[0] = 1.0;
    for (int j = 0; j < max_order; ++j) values_[j + 1] = values_[j] * (base + static_cast<double>(j));
  }

  cplx base() const { return base_; }
  int max_order() const { return static_cast<int>(values_.size()) - 1; }
  cplx operator[](int j) const { return values_.at(j); }

 private:
  cplx base_;
  std::vector<cplx> values_;
};

namespace detail {

inline void check_denominator(cplx d, int j, const char* where) {
  if (std::abs(d) < kDenominatorFloor)
    throw CaseError(std::string(where) + ": vanishing rising factorial at order " + std::to_string(j) +
                    " (parameters belong to a different case)");
}

}  // namespace detail

// Coefficients (a)_j / ((b)_j j!) for j < count.
inline std::vector<cplx> hyp1f1_truncated(cplx a, cplx b, int count) {
  std::vector<cplx> c(std::max(count, 0));
  cplx ra = 1.0, rb = 1.0;
  double jf = 1.0;
  for (int j = 0; j < count; ++j) {
    if (j > 0) {
      ra *= a + static_cast<double>(j - 1);
      rb *= b + static_cast<double>(j - 1);
      jf *= j;
    }
    detail::check_denominator(rb, j, "hyp1f1_truncated");
    c[j] = ra / (rb * jf);
  }
  return c;
}

enum class SumOrder { Forward, Reverse };

namespace detail {

template <class C>
C hyp2f1_terminating_t(int n, C b, C c, C z) {
  using R = typename C::value_type;
  C term = R(1), s = R(1), rc = R(1);
  for (int j = 0; j < n; ++j) {
    rc *= c + static_cast<R>(j);
    check_denominator(cplx(static_cast<double>(rc.real()), static_cast<double>(rc.imag())), j + 1, "hyp2f1_terminating");
    term *= static_cast<R>(j - n) * (b + static_cast<R>(j)) / ((c + static_cast<R>(j)) * static_cast<R>(j + 1)) * z;
    s += term;
  }
  return s;
}

}  // namespace detail

// 2F1(-n, b; c; z) as its exact (n+1)-term polynomial.
inline cplx hyp2f1_terminating(int n, cplx b, cplx c, cplx z, SumOrder order = SumOrder::Forward) {
  if (n < 0) throw ValidationError("hyp2f1_terminating: negative n");
  std::vector<cplx> terms(n + 1);
  terms[0] = 1.0;
  for (int j = 0; j < n; ++j) {
    cplx cj = c + static_cast<double>(j);
    detail::check_denominator(rising(c, j + 1), j + 1, "hyp2f1_terminating");
    terms[j + 1] = terms[j] * (static_cast<double>(j - n)) * (b + static_cast<double>(j)) / (cj * (j + 1.0)) * z;
  }
  cplx s = 0.0;
  if (order == SumOrder::Forward)
    for (int j = 0; j <= n; ++j) s += terms[j];
  else
    for (int j = n; j >= 0; --j) s += terms[j];
  return s;
}

inline double double_factorial(int n) {
  if (n < -1) throw ValidationError("double_factorial: argument below -1");
  double r = 1.0;
  for (int k = n; k > 1; k -= 2) r *= k;
  return r;
}

// Non-terminating 1F1(a; b; z), summed until terms drop below tol relative to the sum.
inline cplx hyp1f1_series(cplx a, cplx b, cplx z, double tol = 1e-17, int max_terms = 2000) {
  cplx term = 1.0, sum = 1.0;
  for (int j = 0; j < max_terms; ++j) {
    cplx bj = b + static_cast<double>(j);
    detail::check_denominator(bj, j + 1, "hyp1f1_series");
    term *= (a + static_cast<double>(j)) / (bj * (j + 1.0)) * z;
    sum += term;
    if (std::abs(term) <= tol * std::abs(sum) && j > std::abs(z)) return sum;
  }
  throw ConsistencyError("hyp1f1_series did not converge");
}

struct SeriesResult {
  cplx value;
  double tail_bound;
  int terms;
};

// 0F1(; c; z) with a geometric bound on the discarded tail.
inline SeriesResult hyp0f1(cplx c, cplx z, double tail_target = 1e-16, int max_terms = 500) {
  cplx term = 1.0, sum = 1.0;
  for (int j = 0; j < max_terms; ++j) {
    cplx cj = c + static_cast<double>(j);
    detail::check_denominator(cj, j + 1, "hyp0f1");
    term *= z / (cj * (j + 1.0));
    sum += term;
    // ratio of successive later terms is bounded by q once j+2 exceeds the pole distance
    double q = std::abs(z) / (std::abs(c + static_cast<double>(j + 1)) * (j + 2.0));
    if (q < 0.5) {
      double bound = std::abs(term) * q / (1.0 - q);
      if (bound <= tail_target * std::max(1.0, std::abs(sum))) return {sum, bound, j + 2};
    }
  }
  throw ConsistencyError("hyp0f1 did not converge");
}

}  // namespace kerrloss
