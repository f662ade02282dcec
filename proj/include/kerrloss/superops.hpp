#pragma once

#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "core.hpp"
#include "fock_basis.hpp"

namespace kerrloss {

struct ModelParams {
  double omega = 0.0;
  double U = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;

  void validate() const {
    for (double v : {omega, U, kappa1, kappa2})
      if (!std::isfinite(v)) throw ValidationError("model parameters must be finite");
    if (kappa1 < 0.0) throw ValidationError("kappa1 must be non-negative");
    if (kappa2 < 0.0) throw ValidationError("kappa2 must be non-negative");
  }

  bool hamiltonian_only() const { return kappa1 == 0.0 && kappa2 == 0.0; }
};

struct BlockMatrix {
  int m = 0;
  CMatrix entries;

  int upper_bandwidth() const {
    int bw = 0;
    for (int c = 0; c < entries.cols(); ++c)
      for (int r = 0; r < c; ++r)
        if (entries(r, c) != cplx(0.0)) bw = std::max(bw, c - r);
    return bw;
  }

  int lower_bandwidth() const {
    int bw = 0;
    for (int c = 0; c < entries.cols(); ++c)
      for (int r = c + 1; r < entries.rows(); ++r)
        if (entries(r, c) != cplx(0.0)) bw = std::max(bw, r - c);
    return bw;
  }
};

// Diagonal of the block Liouvillian in closed form.
inline cplx eigenvalue(const ModelParams& p, int m, int k) {
  double am = std::abs(m);
  return -kI * (p.omega - p.U / 2.0) * static_cast<double>(m) - (p.kappa1 + kI * p.U * static_cast<double>(m)) * (k + am / 2.0) -
         p.kappa2 * ((k + am) * (k - 1.0) + am * (am + 1.0) / 2.0);
}

// ---- A superoperator: X -> a X a^dagger ----

inline BlockVector apply_A(const BlockVector& v, int power) {
  if (power < 0) throw ValidationError("apply_A: negative power");
  int n = static_cast<int>(v.coeffs.size());
  int am = std::abs(v.m);
  BlockVector out{v.m, CVector::Zero(n)};
  for (int p = 0; p + power < n; ++p) {
    int k = p + power;
    double c = detail::sqrt_factorial_ratio(k, p) * detail::sqrt_factorial_ratio(k + am, p + am);
    out.coeffs(p) = c * v.coeffs(k);
  }
  return out;
}

inline BlockVector apply_exp_A(const BlockVector& v, cplx scale) {
  BlockVector acc = v;
  BlockVector w = v;
  for (int j = 1; j < v.coeffs.size(); ++j) {
    w = apply_A(w, 1);
    w.coeffs *= scale / static_cast<double>(j);
    acc.coeffs += w.coeffs;
  }
  return acc;
}

namespace detail {

using lcplx = std::complex<long double>;
using LMatrix = Eigen::Matrix<lcplx, Eigen::Dynamic, Eigen::Dynamic>;
using LVector = Eigen::Matrix<lcplx, Eigen::Dynamic, 1>;

inline long double sqrt_factorial_ratio_ld(int num, int den) {
  long double r = 1.0L;
  if (num >= den)
    for (int i = den + 1; i <= num; ++i) r *= i;
  else
    for (int i = num + 1; i <= den; ++i) r /= i;
  return std::sqrt(r);
}

inline LMatrix exp_A_block_ld(int m, int size, lcplx scale) {
  LMatrix e = LMatrix::Zero(size, size);
  const int am = std::abs(m);
  for (int q = 0; q < size; ++q) {
    long double fact = 1.0L;
    lcplx pw = 1.0L;
    for (int p = q; p >= 0; --p) {
      e(p, q) = pw / fact * sqrt_factorial_ratio_ld(q, p) * sqrt_factorial_ratio_ld(q + am, p + am);
      pw *= scale;
      fact *= (q - p + 1);
    }
  }
  return e;
}

inline CVector to_double(const LVector& v) {
  CVector out(v.size());
  for (int i = 0; i < v.size(); ++i) out(i) = cplx(static_cast<double>(v(i).real()), static_cast<double>(v(i).imag()));
  return out;
}

inline lcplx to_ld(cplx z) { return {z.real(), z.imag()}; }

inline LMatrix to_ld(const CMatrix& x) { return x.cast<lcplx>(); }

inline CMatrix to_double(const LMatrix& x) {
  CMatrix out(x.rows(), x.cols());
  for (int j = 0; j < x.cols(); ++j)
    for (int i = 0; i < x.rows(); ++i) out(i, j) = cplx(static_cast<double>(x(i, j).real()), static_cast<double>(x(i, j).imag()));
  return out;
}

inline double max_abs_ld(const LMatrix& x) {
  long double m = 0.0L;
  for (int j = 0; j < x.cols(); ++j)
    for (int i = 0; i < x.rows(); ++i) m = std::max(m, std::abs(x(i, j)));
  return static_cast<double>(m);
}

}  // namespace detail

inline detail::lcplx eigenvalue_ld(const ModelParams& p, int m, int k) {
  using L = detail::lcplx;
  const long double am = std::abs(m), mm = m, kk = k;
  const long double om = p.omega, u = p.U, k1 = p.kappa1, k2 = p.kappa2;
  return L(0.0L, -(om - u / 2.0L) * mm) - L(k1, u * mm) * (kk + am / 2.0L) - k2 * ((kk + am) * (kk - 1.0L) + am * (am + 1.0L) / 2.0L);
}

inline CMatrix A_block(int m, int size) {
  CMatrix a = CMatrix::Zero(size, size);
  int am = std::abs(m);
  for (int k = 1; k < size; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k) * (k + am));
  return a;
}

// (e^{scale A})_{p,q} = scale^{q-p}/(q-p)! sqrt(q!(q+|m|)!/(p!(p+|m|)!))
inline CMatrix exp_A_block(int m, int size, cplx scale) {
  CMatrix e = CMatrix::Zero(size, size);
  int am = std::abs(m);
  for (int q = 0; q < size; ++q)
    for (int p = 0; p <= q; ++p) {
      double mag = detail::sqrt_factorial_ratio(q, p) * detail::sqrt_factorial_ratio(q + am, p + am) / detail::factorial(q - p);
      e(p, q) = (q == p ? cplx(1.0) : std::pow(scale, q - p)) * mag;
    }
  return e;
}

// ---- Fock-space operators ----

inline CMatrix annihilation(int dim) {
  CMatrix a = CMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

inline CMatrix number_op(int dim) {
  CMatrix n = CMatrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) n(i, i) = static_cast<double>(i);
  return n;
}

inline CMatrix parity_projector(int dim) {
  CMatrix p = CMatrix::Zero(dim, dim);
  for (int i = 0; i < dim; i += 2) p(i, i) = 1.0;
  return p;
}

// Lindblad action built from explicit operator products.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> lindbladian_operator_action_t(
    const ModelParams& p, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x) {
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using R = typename Scalar::value_type;
  const int d = static_cast<int>(x.rows());
  M a = M::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<R>(n));
  M ad = a.adjoint();
  M a2 = a * a;
  M a2d = a2.adjoint();
  M n = ad * a;
  M n2 = a2d * a2;
  const Scalar i(0, 1), half(static_cast<R>(0.5));
  M h = Scalar(static_cast<R>(p.omega)) * n + Scalar(static_cast<R>(p.U) / 2) * n2;
  M out = -i * (h * x - x * h);
  if (p.kappa1 != 0.0) out += Scalar(static_cast<R>(p.kappa1)) * (a * x * ad - half * (n * x + x * n));
  if (p.kappa2 != 0.0) out += Scalar(static_cast<R>(p.kappa2)) * (a2 * x * a2d - half * (n2 * x + x * n2));
  return out;
}

inline CMatrix lindbladian_operator_action(const ModelParams& p, const CMatrix& x) {
  return lindbladian_operator_action_t<cplx>(p, x);
}

enum class Superscript { Anti, Comm, Plus, Minus };

inline std::string to_string(Superscript s) {
  switch (s) {
    case Superscript::Anti: return "anti";
    case Superscript::Comm: return "comm";
    case Superscript::Plus: return "plus";
    case Superscript::Minus: return "minus";
  }
  return "?";
}

namespace detail {

inline const std::vector<double>& sqrt_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(4096);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::sqrt(static_cast<double>(i));
    return t;
  }();
  return table;
}

// (V X) with V = a + a^dagger, tridiagonal
inline void left_V(const CMatrix& x, CMatrix& out, cplx s) {
  const int d = static_cast<int>(x.rows());
  const double* sq = sqrt_table().data();
  for (int j = 0; j < d; ++j) {
    const cplx* xc = x.col(j).data();
    cplx* oc = out.col(j).data();
    for (int i = 0; i < d; ++i) {
      cplx v = 0.0;
      if (i + 1 < d) v += sq[i + 1] * xc[i + 1];
      if (i > 0) v += sq[i] * xc[i - 1];
      oc[i] += s * v;
    }
  }
}

// (X V)
inline void right_V(const CMatrix& x, CMatrix& out, cplx s) {
  const int d = static_cast<int>(x.rows());
  const double* sq = sqrt_table().data();
  for (int j = 0; j < d; ++j) {
    cplx* oc = out.col(j).data();
    if (j > 0) {
      const cplx* xl = x.col(j - 1).data();
      const cplx f = s * sq[j];
      for (int i = 0; i < d; ++i) oc[i] += f * xl[i];
    }
    if (j + 1 < d) {
      const cplx* xr = x.col(j + 1).data();
      const cplx f = s * sq[j + 1];
      for (int i = 0; i < d; ++i) oc[i] += f * xr[i];
    }
  }
}

}  // namespace detail

inline CMatrix apply_source(Superscript s, const CMatrix& x) {
  CMatrix out = CMatrix::Zero(x.rows(), x.cols());
  switch (s) {
    case Superscript::Anti:
      detail::left_V(x, out, 1.0);
      detail::right_V(x, out, 1.0);
      break;
    case Superscript::Comm:
      detail::left_V(x, out, 1.0);
      detail::right_V(x, out, -1.0);
      break;
    case Superscript::Plus: detail::left_V(x, out, 1.0); break;
    case Superscript::Minus: detail::right_V(x, out, 1.0); break;
  }
  return out;
}

// X -> L X + drive (V X + X V), matrix-free.
class Generator {
 public:
  explicit Generator(const ModelParams& p, cplx drive = 0.0) : p_(p), drive_(drive) { p_.validate(); }

  const ModelParams& params() const { return p_; }
  cplx drive() const { return drive_; }

  void apply(const CMatrix& x, CMatrix& out) const {
    const int d = static_cast<int>(x.rows());
    if (d > 4000) throw DimensionError("generator dimension too large");
    out.resize(d, d);
    const double* sq = detail::sqrt_table().data();
    const double k1 = p_.kappa1, k2 = p_.kappa2;
    for (int j = 0; j < d; ++j) {
      const double jd = j;
      const cplx* xc = x.col(j).data();
      const cplx* x1 = j + 1 < d ? x.col(j + 1).data() : nullptr;
      const cplx* x2 = j + 2 < d ? x.col(j + 2).data() : nullptr;
      cplx* oc = out.col(j).data();
      for (int i = 0; i < d; ++i) {
        const double id = i;
        cplx diag(-0.5 * k1 * (id + jd) - 0.5 * k2 * (id * (id - 1.0) + jd * (jd - 1.0)),
                  -(p_.omega * (id - jd) + 0.5 * p_.U * (id * (id - 1.0) - jd * (jd - 1.0))));
        cplx v = diag * xc[i];
        if (x1 && i + 1 < d) v += k1 * sq[i + 1] * sq[j + 1] * x1[i + 1];
        if (x2 && i + 2 < d) v += k2 * sq[i + 1] * sq[i + 2] * sq[j + 1] * sq[j + 2] * x2[i + 2];
        oc[i] = v;
      }
    }
    if (drive_ != cplx(0.0)) {
      detail::left_V(x, out, drive_);
      detail::right_V(x, out, drive_);
    }
  }

  CMatrix operator()(const CMatrix& x) const {
    CMatrix out;
    apply(x, out);
    return out;
  }

  FockState operator()(const FockState& s) const {
    return FockState(s.truncation(), (*this)(s.matrix()), false);
  }

  // Upper bound on the induced 1-norm of the vectorized action.
  double norm_bound(int n_max) const {
    const int d = n_max + 1;
    double best = 0.0;
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        const double id = i, jd = j;
        cplx diag = -kI * (p_.omega * (id - jd) + 0.5 * p_.U * (id * (id - 1.0) - jd * (jd - 1.0))) -
                    0.5 * p_.kappa1 * (id + jd) - 0.5 * p_.kappa2 * (id * (id - 1.0) + jd * (jd - 1.0));
        double col = std::abs(diag);
        if (i >= 1 && j >= 1) col += p_.kappa1 * std::sqrt(id * jd);
        if (i >= 2 && j >= 2) col += p_.kappa2 * std::sqrt(id * (id - 1.0) * jd * (jd - 1.0));
        double dv = std::abs(drive_);
        col += dv * (std::sqrt(id) + std::sqrt(id + 1.0) + std::sqrt(jd) + std::sqrt(jd + 1.0));
        best = std::max(best, col);
      }
    return best;
  }

  // Vectorized (column-major) matrix of the action.
  CMatrix dense(const Truncation& t) const {
    const int d = t.dim();
    const int n = d * d;
    if (n > 2500) throw DimensionError("dense generator limited to dimension 2500");
    CMatrix out(n, n);
    CMatrix basis = CMatrix::Zero(d, d), image;
    for (int c = 0; c < n; ++c) {
      basis(c % d, c / d) = 1.0;
      apply(basis, image);
      out.col(c) = Eigen::Map<const CVector>(image.data(), n);
      basis(c % d, c / d) = 0.0;
    }
    return out;
  }

 private:
  ModelParams p_;
  cplx drive_;
};

inline Generator full_generator(const ModelParams& p, cplx drive = 0.0) { return Generator(p, drive); }

// Block matrix of an arbitrary linear map on D x D matrices restricted to block m.
inline CMatrix superop_block(const std::function<CMatrix(const CMatrix&)>& f, int m, const Truncation& t) {
  const int size = t.block_size(m);
  CMatrix out = CMatrix::Zero(size, size);
  CMatrix x = CMatrix::Zero(t.dim(), t.dim());
  for (int k = 0; k < size; ++k) {
    auto [r, c] = phi_index(m, k);
    x(r, c) = 1.0;
    CMatrix y = f(x);
    out.col(k) = block_of(y, t, m).coeffs;
    x(r, c) = 0.0;
  }
  return out;
}

inline BlockMatrix liouvillian_block(const ModelParams& p, int m, const Truncation& t) {
  p.validate();
  t.check_block(m);
  return {m, superop_block([&](const CMatrix& x) { return lindbladian_operator_action(p, x); }, m, t)};
}

enum class SuperdiagForm {
  Absolute,  // kappa2 (2(k-1) + |m|)
  Signed,    // kappa2 (2(k-1) + m), as printed
  Flipped,   // negated Absolute; fault injection only
};

inline cplx superdiagonal_coefficient(const ModelParams& p, int m, int k, SuperdiagForm form = SuperdiagForm::Absolute) {
  double am = std::abs(m);
  double mm = form == SuperdiagForm::Signed ? static_cast<double>(m) : am;
  cplx c = -std::sqrt(k * (k + am)) * (p.kappa2 * (2.0 * (k - 1) + mm) + kI * p.U * static_cast<double>(m));
  return form == SuperdiagForm::Flipped ? -c : c;
}

enum class TransformRoute { Conjugation, ClosedForm };

inline BlockMatrix transformed_block(const ModelParams& p, int m, const Truncation& t,
                                     TransformRoute route = TransformRoute::Conjugation,
                                     SuperdiagForm form = SuperdiagForm::Absolute) {
  const int size = t.block_size(m);
  if (route == TransformRoute::Conjugation) {
    detail::LMatrix lb = detail::LMatrix::Zero(size, size);
    detail::LMatrix x = detail::LMatrix::Zero(t.dim(), t.dim());
    for (int k = 0; k < size; ++k) {
      auto [r, c] = phi_index(m, k);
      x(r, c) = 1.0L;
      detail::LMatrix y = lindbladian_operator_action_t<detail::lcplx>(p, x);
      for (int q = 0; q < size; ++q) {
        auto [rq, cq] = phi_index(m, q);
        lb(q, k) = y(rq, cq);
      }
      x(r, c) = 0.0L;
    }
    return {m, detail::to_double(detail::LMatrix(detail::exp_A_block_ld(m, size, 1.0L) * lb * detail::exp_A_block_ld(m, size, -1.0L)))};
  }
  CMatrix b = CMatrix::Zero(size, size);
  for (int k = 0; k < size; ++k) {
    b(k, k) = eigenvalue(p, m, k);
    if (k > 0) b(k - 1, k) = superdiagonal_coefficient(p, m, k, form);
  }
  return {m, b};
}

inline double transformed_block_discrepancy(const ModelParams& p, int m, const Truncation& t,
                                            SuperdiagForm form = SuperdiagForm::Absolute) {
  CMatrix a = transformed_block(p, m, t, TransformRoute::Conjugation).entries;
  CMatrix b = transformed_block(p, m, t, TransformRoute::ClosedForm, form).entries;
  return detail::max_abs(CMatrix(a - b));
}

struct IdentityCheck {
  std::string name;
  double max_dev = 0.0;
};

struct SimilarityReport {
  int m = 0;
  std::vector<IdentityCheck> checks;

  bool passed(double tol = 1e-12) const {
    for (const auto& c : checks)
      if (!(c.max_dev < tol)) return false;
    return true;
  }
};

inline SimilarityReport similarity_identity_suite(const ModelParams& p, int m, const Truncation& t) {
  using detail::LMatrix;
  const int d = t.dim();
  const int size = t.block_size(m);
  LMatrix a = LMatrix::Zero(d, d);
  for (int k = 1; k < d; ++k) a(k - 1, k) = std::sqrt(static_cast<long double>(k));
  LMatrix ad = a.adjoint(), n = ad * a;
  LMatrix nn = n * n - n;
  const detail::lcplx half(0.5L), two(2.0L);
  auto blk = [&](const std::function<LMatrix(const LMatrix&)>& f) {
    LMatrix out = LMatrix::Zero(size, size), x = LMatrix::Zero(d, d);
    for (int k = 0; k < size; ++k) {
      auto [r, c] = phi_index(m, k);
      x(r, c) = 1.0L;
      LMatrix y = f(x);
      for (int q = 0; q < size; ++q) {
        auto [rq, cq] = phi_index(m, q);
        out(q, k) = y(rq, cq);
      }
      x(r, c) = 0.0L;
    }
    return out;
  };

  LMatrix Ab = blk([&](const LMatrix& x) { return LMatrix(a * x * ad); });
  LMatrix Nx = blk([&](const LMatrix& x) { return LMatrix(n * x - x * n); });
  LMatrix No = blk([&](const LMatrix& x) { return LMatrix(n * x + x * n); });
  LMatrix NNo = blk([&](const LMatrix& x) { return LMatrix(nn * x + x * nn); });
  LMatrix Da = blk([&](const LMatrix& x) { return LMatrix(a * x * ad - half * (n * x + x * n)); });
  LMatrix Da2 = blk([&](const LMatrix& x) { return LMatrix(a * a * x * ad * ad - half * (nn * x + x * nn)); });

  // e^{+-A} from the operator-built block by its finite power series
  LMatrix E = LMatrix::Identity(size, size), Einv = LMatrix::Identity(size, size);
  LMatrix pw = LMatrix::Identity(size, size);
  long double fact = 1.0L;
  for (int j = 1; j < size; ++j) {
    pw = pw * Ab;
    fact *= j;
    E += pw / detail::lcplx(fact);
    Einv += pw * detail::lcplx((j % 2 ? -1.0L : 1.0L) / fact);
  }
  LMatrix Id = LMatrix::Identity(size, size);
  auto dev = [](const LMatrix& x) { return detail::max_abs_ld(x); };

  SimilarityReport rep{m, {}};
  rep.checks.push_back({"A_commutes_Nx", dev(Ab * Nx - Nx * Ab)});
  rep.checks.push_back({"conj_Nx", dev(E * Nx * Einv - Nx)});
  rep.checks.push_back({"conj_No", dev(E * No * Einv - (No + two * Ab))});
  rep.checks.push_back({"conj_Da", dev(E * Da * Einv - (-half * No))});
  rep.checks.push_back({"conj_Da2", dev(E * Da2 * Einv - (Ab * (two * Id - No) - half * NNo))});
  rep.checks.push_back({"transformed_bidiagonal", transformed_block_discrepancy(p, m, t)});
  return rep;
}

// max |(L N^x - N^x L) E_ij| over all basis matrices
inline double weak_symmetry_deviation(const ModelParams& p, const Truncation& t) {
  Generator g(p);
  const int d = t.dim();
  CMatrix x = CMatrix::Zero(d, d), y;
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      x(i, j) = 1.0;
      g.apply(x, y);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) worst = std::max(worst, std::abs(y(r, c) * static_cast<double>((i - j) - (r - c))));
      x(i, j) = 0.0;
    }
  return worst;
}

inline void write_block_csv(std::ostream& os, const std::vector<BlockMatrix>& blocks) {
  os << "m,row,col,re,im\n";
  os.precision(17);
  for (const auto& b : blocks)
    for (int c = 0; c < b.entries.cols(); ++c)
      for (int r = 0; r < b.entries.rows(); ++r)
        if (b.entries(r, c) != cplx(0.0))
          os << b.m << ',' << r << ',' << c << ',' << b.entries(r, c).real() << ',' << b.entries(r, c).imag() << '\n';
}

}  // namespace kerrloss
