#pragma once

#include <limits>
#include <map>
#include <ostream>
#include <vector>

#include "spectral.hpp"

namespace kerrloss {

struct GValue {
  cplx value;
  bool cancellation_limited = false;
};

namespace detail {

// sqrt(binom(|m|+k+r, |m|+k) binom(k+r, k))
inline double propagator_weight(int m, int k, int r) {
  int am = std::abs(m);
  return sqrt_binomial_product(am + k + r, am + k, k + r, k);
}

}  // namespace detail

inline GValue g_coefficient_detailed(const ModelParams& p, int m, int k, int r, double t) {
  if (p.kappa2 == 0.0) throw CaseError("g_coefficient requires kappa2 > 0; use spectral_propagate");
  if (r < 0 || k < 0) throw ValidationError("g_coefficient: negative index");
  using L = detail::lcplx;
  const long double e = eta(p);
  const long double tt = t;
  L sum = 0.0L;
  long double largest = 0.0L;
  for (int j = 0; j <= r; ++j) {
    const int l = k + j;
    const L lam = eigenvalue_ld(p, m, l);
    L term;
    if (is_degenerate_pair(p, m, l)) {
      if (l != k || r % 2 != 0) continue;
      term = std::exp(lam * tt) / static_cast<long double>(detail::binomial(k + r, k));
    } else {
      const L x((2.0L * l + std::abs(m)) / 2.0L, static_cast<long double>(p.U) * m / (2.0L * p.kappa2));
      term = static_cast<long double>((j % 2) ? -1.0 : 1.0) * static_cast<long double>(detail::binomial(r, j)) *
             std::exp(lam * tt) * detail::hyp2f1_terminating_t<L>(j, 1.0L - x, 2.0L - 2.0L * x - e, L(2.0L)) *
             detail::hyp2f1_terminating_t<L>(r - j, x, 2.0L * x + e, L(2.0L));
    }
    largest = std::max(largest, std::abs(term));
    sum += term;
  }
  const cplx out(static_cast<double>(sum.real()), static_cast<double>(sum.imag()));
  bool flag = largest > 0.0L && std::abs(out) < 1e3 * std::numeric_limits<double>::epsilon() * static_cast<double>(largest);
  return {out, flag};
}
inline cplx g_coefficient(const ModelParams& p, int m, int k, int r, double t) {
  return g_coefficient_detailed(p, m, k, r, t).value;
}

// Lazily filled G_{r,k}^(m)(t_i), stored per block.
class PropagatorCoefficients {
 public:
  PropagatorCoefficients(const ModelParams& p, const Truncation& t, std::vector<double> times)
      : params_(p), trunc_(t), times_(std::move(times)), cache_(t.block_count()) {
    if (p.kappa2 == 0.0) throw CaseError("PropagatorCoefficients requires kappa2 > 0");
  }

  const std::vector<double>& times() const { return times_; }

  GValue value(int m, int k, int r, std::size_t ti) {
    trunc_.check_index(m, k);
    trunc_.check_index(m, k + r);
    auto& slot = cache_[m + trunc_.n_max()];
    auto key = std::make_tuple(k, r, ti);
    auto it = slot.find(key);
    if (it != slot.end()) return it->second;
    GValue g = g_coefficient_detailed(params_, m, k, r, times_.at(ti));
    slot.emplace(key, g);
    return g;
  }

  cplx G(int m, int k, int r, std::size_t ti) { return value(m, k, r, ti).value; }

  // P[k][k+r] = sqrt-binomial weight times G_{r,k}
  CMatrix block_propagator(int m, std::size_t ti) {
    const int size = trunc_.block_size(m);
    CMatrix P = CMatrix::Zero(size, size);
    for (int k = 0; k < size; ++k)
      for (int r = 0; k + r < size; ++r) P(k, k + r) = detail::propagator_weight(m, k, r) * G(m, k, r, ti);
    return P;
  }

  std::size_t cancellation_count() const {
    std::size_t n = 0;
    for (const auto& slot : cache_)
      for (const auto& [key, g] : slot) n += g.cancellation_limited;
    return n;
  }

 private:
  ModelParams params_;
  Truncation trunc_;
  std::vector<double> times_;
  std::vector<std::map<std::tuple<int, int, std::size_t>, GValue>> cache_;
};

inline CMatrix spectral_block_propagator(const SpectralDecomposition& d, int m, double t) {
  const BlockSpectrum& b = d.block(m);
  CVector ex = (b.eigenvalues * t).array().exp();
  return b.right * ex.asDiagonal() * b.left;
}

inline FockState spectral_propagate(const SpectralDecomposition& d, const FockState& initial, double t) {
  if (!(initial.truncation() == d.truncation())) throw ValidationError("spectral_propagate: truncation mismatch");
  if (t < 0.0) throw ValidationError("spectral_propagate: negative time");
  BlockSet blocks = to_blocks(initial);
  for (auto& b : blocks) b.coeffs = spectral_block_propagator(d, b.m, t) * b.coeffs;
  return from_blocks(blocks);
}

inline FockState propagate_phi(const ModelParams& p, const FockState& initial, double t) {
  if (t < 0.0) throw ValidationError("propagate_phi: negative time");
  if (p.kappa2 == 0.0) return spectral_propagate(decompose(p, initial.truncation()), initial, t);
  PropagatorCoefficients pc(p, initial.truncation(), {t});
  BlockSet blocks = to_blocks(initial);
  for (auto& b : blocks) b.coeffs = pc.block_propagator(b.m, 0) * b.coeffs;
  return from_blocks(blocks);
}

// <<phi_k^(m)|O^H(t)>> = sum_{q<=k} weight G_{k-q,q}^(-m)(t) <<phi_q^(m)|O>>
inline FockState heisenberg_phi(const ModelParams& p, const FockState& observable, double t) {
  if (t < 0.0) throw ValidationError("heisenberg_phi: negative time");
  const Truncation& tr = observable.truncation();
  BlockSet blocks = to_blocks(observable);
  if (p.kappa2 == 0.0) {
    SpectralDecomposition d = decompose(p, tr);
    for (auto& b : blocks) b.coeffs = spectral_block_propagator(d, -b.m, t).transpose() * b.coeffs;
  } else {
    PropagatorCoefficients pc(p, tr, {t});
    for (auto& b : blocks) b.coeffs = pc.block_propagator(-b.m, 0).transpose() * b.coeffs;
  }
  return from_blocks(blocks);
}

// Row factor of a^H(t): sum_q binom(k,q) G_{k-q,q}^(1)(t)
inline cplx annihilation_factor(const ModelParams& p, int k, double t) {
  cplx s = 0.0;
  for (int q = 0; q <= k; ++q) s += detail::binomial(k, q) * g_coefficient(p, 1, q, k - q, t);
  return s;
}

// Pure two-body loss: exponents coincide with the block eigenvalues.
inline double pure_loss_mu(int m, int k, double kappa2) {
  return -kappa2 * (k * (k + m - 1.0) + m * (m - 1.0) / 2.0);
}

inline cplx pure_loss_g(int m, int k, int r, double t, double kappa2) {
  if (m < 0) throw ValidationError("pure_loss_g is defined for m >= 0");
  double sum = 0.0;
  for (int j = 0; j <= r; ++j) {
    const double y = k + 2.0 * j + m / 2.0;
    // (y - 1/2) / (y - j - 1/2)_{r+1}, with the vanishing-at-i=j factor cancelled
    double den = 1.0;
    for (int i = 0; i <= r; ++i)
      if (i != j) den *= y - j - 0.5 + i;
    sum += ((j % 2) ? -1.0 : 1.0) * detail::binomial(r, j) * std::exp(pure_loss_mu(m, k + 2 * j, kappa2) * t) / den;
  }
  return double_factorial(2 * r - 1) / std::pow(2.0, r) * sum;
}

// b_k^(m) for a coherent initial state in closed form
inline cplx coherent_expansion_coefficient(const ModelParams& p, cplx alpha, int m, int k) {
  const int am = std::abs(m);
  const double r = std::abs(alpha);
  const double phase = std::arg(alpha);
  const cplx x = x_parameter(p, m, k);
  double lf = 0.5 * (detail::log_factorial(k) + detail::log_factorial(am + k));
  return std::pow(r, am + 2 * k) * std::exp(kI * static_cast<double>(m) * phase) / std::exp(lf) *
         hyp1f1_series(x, 2.0 * x + eta(p), -2.0 * r * r);
}

inline void write_evolution_csv(std::ostream& os, const std::vector<double>& times, const std::vector<FockState>& states) {
  os << "t,n1,n2,re,im\n";
  os.precision(17);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const CMatrix& x = states[i].matrix();
    for (int n1 = 0; n1 < x.rows(); ++n1)
      for (int n2 = 0; n2 < x.cols(); ++n2)
        if (x(n1, n2) != cplx(0.0))
          os << times[i] << ',' << n1 << ',' << n2 << ',' << x(n1, n2).real() << ',' << x(n1, n2).imag() << '\n';
  }
}

struct Expectation {
  double t;
  std::string obs;
  cplx value;
};

inline std::vector<Expectation> standard_expectations(double t, const FockState& s) {
  const int d = s.truncation().dim();
  const CMatrix& rho = s.matrix();
  return {{t, "N", (number_op(d) * rho).trace()},
          {t, "a", (annihilation(d) * rho).trace()},
          {t, "parity", ((2.0 * parity_projector(d) - CMatrix::Identity(d, d)) * rho).trace()}};
}

inline void write_expectations_csv(std::ostream& os, const std::vector<Expectation>& ex) {
  os << "t,obs,re,im\n";
  os.precision(17);
  for (const auto& e : ex) os << e.t << ',' << e.obs << ',' << e.value.real() << ',' << e.value.imag() << '\n';
}

}  // namespace kerrloss
