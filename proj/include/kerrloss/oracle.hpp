#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include <json.hpp>

#include "superops.hpp"

namespace kerrloss {

struct IntegratorConfig {
  enum class Method { AdaptiveDP45, FixedRK4 };

  double rtol = 1e-10;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double fixed_step = 1e-3;
  Method method = Method::AdaptiveDP45;
  long max_steps = 20'000'000;

  void validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw ValidationError("integrator tolerances must be positive");
    if (!(max_step > 0.0)) throw ValidationError("integrator max_step must be positive");
    if (method == Method::FixedRK4 && !(fixed_step > 0.0)) throw ValidationError("fixed_step must be positive");
  }
};

using LinearAction = std::function<void(const CMatrix&, CMatrix&)>;

// ---- triangular eigensystems ----

struct TriangularEigensystem {
  CVector eigenvalues;
  CMatrix right;  // columns
  CMatrix left;   // rows
  std::vector<std::pair<int, int>> degenerate_pairs;
};

inline TriangularEigensystem triangular_eigendecomp(const BlockMatrix& lb) {
  const CMatrix& L = lb.entries;
  const int n = static_cast<int>(L.rows());
  if (lb.lower_bandwidth() != 0) throw ValidationError("triangular_eigendecomp: matrix is not upper triangular");
  const double scale = std::max(1.0, detail::max_abs(L));
  const double pivot_tol = 1e-10 * scale;
  TriangularEigensystem es{L.diagonal(), CMatrix::Zero(n, n), CMatrix::Zero(n, n), {}};

  auto note = [&](int a, int b) {
    auto key = std::make_pair(std::min(a, b), std::max(a, b));
    for (const auto& d : es.degenerate_pairs)
      if (d == key) return;
    es.degenerate_pairs.push_back(key);
  };

  for (int k = 0; k < n; ++k) {
    const cplx lam = L(k, k);
    es.right(k, k) = 1.0;
    for (int p = k - 1; p >= 0; --p) {
      cplx num = 0.0;
      for (int q = p + 1; q <= k; ++q) num += L(p, q) * es.right(q, k);
      cplx piv = L(p, p) - lam;
      if (std::abs(piv) < pivot_tol) {
        if (std::abs(num) > pivot_tol) throw DegeneracyError("triangular_eigendecomp: defective eigenvalue");
        note(p, k);
        es.right(p, k) = 0.0;  // null-space basis choice
      } else {
        es.right(p, k) = -num / piv;
      }
    }
    es.left(k, k) = 1.0;
    for (int q = k + 1; q < n; ++q) {
      cplx num = 0.0;
      for (int p = k; p < q; ++p) num += es.left(k, p) * L(p, q);
      cplx piv = lam - L(q, q);
      if (std::abs(piv) < pivot_tol) {
        if (std::abs(num) > pivot_tol) throw DegeneracyError("triangular_eigendecomp: defective eigenvalue");
        note(k, q);
        es.left(k, q) = 0.0;
      } else {
        es.left(k, q) = num / piv;
      }
    }
  }
  return es;
}

// ---- dense matrix exponential ----

// Scaling and squaring with a degree-18 Taylor polynomial (Paterson-Stockmeyer).
inline CMatrix matrix_exponential(const CMatrix& M, double t = 1.0) {
  const int n = static_cast<int>(M.rows());
  if (M.rows() != M.cols()) throw DimensionError("matrix_exponential: matrix must be square");
  if (n > 2500) throw DimensionError("matrix_exponential: dimension above 2500");
  CMatrix A = M * t;
  double nrm = n == 0 ? 0.0 : A.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  A /= std::ldexp(1.0, s);

  constexpr int kDeg = 18;
  double c[kDeg + 1];
  c[0] = 1.0;
  for (int i = 1; i <= kDeg; ++i) c[i] = c[i - 1] / i;
  CMatrix I = CMatrix::Identity(n, n);
  CMatrix P[5] = {I, A, A * A, CMatrix(), CMatrix()};
  P[3] = P[2] * A;
  P[4] = P[2] * P[2];
  auto chunk = [&](int j) {
    CMatrix B = CMatrix::Zero(n, n);
    for (int i = 0; i < 4 && 4 * j + i <= kDeg; ++i) B += c[4 * j + i] * P[i];
    return B;
  };
  CMatrix E = chunk(4);
  for (int j = 3; j >= 0; --j) E = E * P[4] + chunk(j);
  for (int i = 0; i < s; ++i) E = E * E;
  return E;
}

// e^{t L} X by substepped Taylor series; L given matrix-free with a 1-norm bound.
inline CMatrix taylor_propagate(const LinearAction& action, const CMatrix& x0, double t, double norm_bound,
                                double tol = 1e-16, double theta = 2.0) {
  if (t < 0.0) throw ValidationError("taylor_propagate: negative time");
  if (t == 0.0 || norm_bound == 0.0) return x0;
  const long nsteps = std::max(1L, static_cast<long>(std::ceil(norm_bound * t / theta)));
  const double h = t / nsteps;
  CMatrix x = x0, term, next;
  for (long s = 0; s < nsteps; ++s) {
    const double ref = std::max(detail::max_abs(x), std::numeric_limits<double>::min());
    term = x;
    int small = 0;
    for (int j = 1; j <= 80; ++j) {
      action(term, next);
      next *= h / j;
      x += next;
      term.swap(next);
      small = detail::max_abs(term) <= tol * ref ? small + 1 : 0;
      if (small >= 2) break;
    }
  }
  return x;
}

// ---- ODE integration ----

inline CMatrix ode_propagate(const LinearAction& action, const CMatrix& y0, double t, const IntegratorConfig& cfg = {}) {
  cfg.validate();
  if (t < 0.0) throw ValidationError("ode_propagate: negative time");
  CMatrix y = y0;
  if (t == 0.0) return y;
  const int r = static_cast<int>(y0.rows()), c = static_cast<int>(y0.cols());

  if (cfg.method == IntegratorConfig::Method::FixedRK4) {
    const long n = std::max(1L, static_cast<long>(std::ceil(t / cfg.fixed_step)));
    const double h = t / n;
    CMatrix k1(r, c), k2(r, c), k3(r, c), k4(r, c);
    for (long i = 0; i < n; ++i) {
      action(y, k1);
      action(CMatrix(y + 0.5 * h * k1), k2);
      action(CMatrix(y + 0.5 * h * k2), k3);
      action(CMatrix(y + h * k3), k4);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
  }

  static constexpr double a21 = 1.0 / 5, a31 = 3.0 / 40, a32 = 9.0 / 40, a41 = 44.0 / 45, a42 = -56.0 / 15,
                          a43 = 32.0 / 9, a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729, a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656, b1 = 35.0 / 384, b3 = 500.0 / 1113,
                          b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84, e1 = 71.0 / 57600,
                          e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                          e7 = -1.0 / 40;

  CMatrix k1(r, c), k2(r, c), k3(r, c), k4(r, c), k5(r, c), k6(r, c), k7(r, c), ynew, err;
  action(y, k1);
  double h;
  {
    double fy = detail::max_abs(k1), yy = detail::max_abs(y);
    h = (fy > 0.0) ? 0.01 * std::max(yy, cfg.atol) / fy : t;
    h = std::min({h, t, cfg.max_step});
  }
  double tt = 0.0;
  long steps = 0;
  while (tt < t) {
    if (++steps > cfg.max_steps) throw StiffnessError("ode_propagate: step budget exhausted at t=" + std::to_string(tt));
    if (h < 1e-14 * std::max(1.0, t)) throw StiffnessError("ode_propagate: step size underflow at t=" + std::to_string(tt));
    bool last = false;
    if (tt + h >= t) {
      h = t - tt;
      last = true;
    }
    action(CMatrix(y + h * a21 * k1), k2);
    action(CMatrix(y + h * (a31 * k1 + a32 * k2)), k3);
    action(CMatrix(y + h * (a41 * k1 + a42 * k2 + a43 * k3)), k4);
    action(CMatrix(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)), k5);
    action(CMatrix(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)), k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    action(ynew, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double en = 0.0;
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) {
        double sc = cfg.atol + cfg.rtol * std::max(std::abs(y(i, j)), std::abs(ynew(i, j)));
        en = std::max(en, std::abs(err(i, j)) / sc);
      }
    if (en <= 1.0) {
      tt = last ? t : tt + h;
      y.swap(ynew);
      k1.swap(k7);
    }
    double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    if (en > 1.0) fac = std::min(fac, 1.0);
    h = std::min(h * fac, cfg.max_step);
  }
  return y;
}

inline FockState ode_propagate(const Generator& g, const FockState& initial, double t, const IntegratorConfig& cfg = {}) {
  LinearAction act = [&g](const CMatrix& x, CMatrix& out) { g.apply(x, out); };
  return FockState(initial.truncation(), ode_propagate(act, initial.matrix(), t, cfg), false);
}

// ---- block-wise exact propagation from the operator-built blocks ----

class BlockExponentialCache {
 public:
  BlockExponentialCache(const ModelParams& p, const Truncation& t) : params_(p), trunc_(t) {
    for (int m = -t.n_max(); m <= t.n_max(); ++m) blocks_.push_back(liouvillian_block(p, m, t).entries);
  }

  const CMatrix& exponential(int m, double tau) {
    auto& slot = cache_[tau];
    if (slot.empty()) {
      slot.reserve(blocks_.size());
      for (const auto& b : blocks_) slot.push_back(matrix_exponential(b, tau));
    }
    return slot[m + trunc_.n_max()];
  }

  CMatrix propagate(const CMatrix& x, double tau) {
    CMatrix out = CMatrix::Zero(x.rows(), x.cols());
    for (int m = -trunc_.n_max(); m <= trunc_.n_max(); ++m) {
      BlockVector b = block_of(x, trunc_, m);
      b.coeffs = exponential(m, tau) * b.coeffs;
      scatter_block(b, out);
    }
    return out;
  }

 private:
  ModelParams params_;
  Truncation trunc_;
  std::vector<CMatrix> blocks_;
  std::map<double, std::vector<CMatrix>> cache_;
};

struct CorrelatorFactor {
  Superscript superscript;
  double time;
};

// tr[ V^{p1}(t1) ... V^{pn}(tn) rho ], t1 >= ... >= tn >= 0, interaction picture w.r.t. L
inline cplx multi_time_correlator(const ModelParams& p, const std::vector<CorrelatorFactor>& factors,
                                  const FockState& initial, bool explicit_leading = false,
                                  BlockExponentialCache* cache = nullptr) {
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (factors[i].time < 0.0) throw ValidationError("multi_time_correlator: negative time");
    if (i + 1 < factors.size() && factors[i].time < factors[i + 1].time)
      throw ValidationError("multi_time_correlator: times must be non-increasing");
  }
  std::optional<BlockExponentialCache> local;
  if (!cache) {
    local.emplace(p, initial.truncation());
    cache = &*local;
  }
  CMatrix x = initial.matrix();
  double prev = 0.0;
  for (auto it = factors.rbegin(); it != factors.rend(); ++it) {
    x = cache->propagate(x, it->time - prev);
    x = apply_source(it->superscript, x);
    prev = it->time;
  }
  if (explicit_leading && !factors.empty()) x = cache->propagate(x, -factors.front().time);
  return x.trace();
}

// ---- verify reports ----

struct VerifyCheck {
  std::string check;
  double max_dev = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline VerifyCheck make_check(std::string name, double dev, double tol) {
  return {std::move(name), dev, tol, std::isfinite(dev) && dev < tol};
}

inline nlohmann::json to_json(const std::vector<VerifyCheck>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks)
    arr.push_back({{"check", c.check}, {"max_dev", c.max_dev}, {"tolerance", c.tolerance}, {"pass", c.pass}});
  return arr;
}

}  // namespace kerrloss
