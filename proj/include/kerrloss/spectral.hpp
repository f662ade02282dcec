#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "specfun.hpp"
#include "superops.hpp"

namespace kerrloss {

enum class CaseTag { GenericRatio, IntegerRatio, ZeroKappa1, ZeroKappa2, HamiltonianOnly };

inline std::string to_string(CaseTag t) {
  switch (t) {
    case CaseTag::GenericRatio: return "GenericRatio";
    case CaseTag::IntegerRatio: return "IntegerRatio";
    case CaseTag::ZeroKappa1: return "ZeroKappa1";
    case CaseTag::ZeroKappa2: return "ZeroKappa2";
    case CaseTag::HamiltonianOnly: return "HamiltonianOnly";
  }
  return "?";
}

inline constexpr double kIntegralityTol = 1e-9;
inline constexpr double kIntegralityWarn = 1e-6;

struct Classification {
  CaseTag tag = CaseTag::GenericRatio;
  double ratio = 0.0;  // kappa1 / kappa2 when both positive
  bool near_integer_warning = false;
};

inline Classification classify_detailed(const ModelParams& p) {
  p.validate();
  if (p.kappa1 == 0.0 && p.kappa2 == 0.0) return {CaseTag::HamiltonianOnly};
  if (p.kappa2 == 0.0) return {CaseTag::ZeroKappa2};
  if (p.kappa1 == 0.0) return {CaseTag::ZeroKappa1};
  double r = p.kappa1 / p.kappa2;
  double dist = std::abs(r - std::round(r));
  if (dist < kIntegralityTol) return {CaseTag::IntegerRatio, r, false};
  return {CaseTag::GenericRatio, r, dist < kIntegralityWarn};
}

inline CaseTag classify(const ModelParams& p) { return classify_detailed(p).tag; }

inline double eta(const ModelParams& p) { return p.kappa2 > 0.0 ? p.kappa1 / p.kappa2 : 0.0; }

inline cplx x_parameter(const ModelParams& p, int m, int k) {
  if (p.kappa2 == 0.0) throw CaseError("x_parameter requires kappa2 > 0");
  return (2.0 * k + std::abs(m)) / 2.0 + kI * p.U * static_cast<double>(m) / (2.0 * p.kappa2);
}

inline bool is_degenerate_pair(const ModelParams& p, int m, int k) {
  return p.kappa1 == 0.0 && p.kappa2 > 0.0 && m == 0 && (k == 0 || k == 1);
}

struct SpectralOptions {
  // Fault injection: use the transformed block with c_k -> -c_k for right-side constructions.
  bool flip_superdiag_sign = false;
};

namespace detail {

inline BlockVector unit_block(int m, int size, int k) {
  BlockVector v{m, CVector::Zero(size)};
  v.coeffs(k) = 1.0;
  return v;
}

inline cplx zero_kappa2_scale(const ModelParams& p, int m) {
  return 1.0 / (1.0 + kI * static_cast<double>(m) * p.U / p.kappa1);
}

// (A^j)_{k, k+j}
inline long double A_power_element_ld(int m, int k, int j) {
  const int am = std::abs(m);
  return sqrt_factorial_ratio_ld(k + j, k) * sqrt_factorial_ratio_ld(k + j + am, k + am);
}

}  // namespace detail

inline BlockVector right_eigenvector(const ModelParams& p, int m, int k, const Truncation& t,
                                     const SpectralOptions& opt = {}) {
  t.check_index(m, k);
  const int size = t.block_size(m);
  CaseTag tag = classify(p);
  BlockVector phi = detail::unit_block(m, size, k);
  if (tag == CaseTag::HamiltonianOnly) return phi;
  if (tag == CaseTag::ZeroKappa2) {
    cplx s = -detail::zero_kappa2_scale(p, m);
    return apply_exp_A(phi, opt.flip_superdiag_sign ? -s : s);
  }
  if (is_degenerate_pair(p, m, k)) return phi;

  const detail::lcplx x = detail::to_ld(x_parameter(p, m, k));
  const long double e = eta(p);
  const long double sgn = opt.flip_superdiag_sign ? -2.0L : 2.0L;
  detail::LVector acc = detail::LVector::Zero(size);
  detail::lcplx num = 1.0L, den = 1.0L;
  long double pw = 1.0L, fact = 1.0L;
  acc(k) = 1.0L;
  for (int j = 1; j <= k; ++j) {
    num *= 1.0L - x + static_cast<long double>(j - 1);
    den *= 2.0L - 2.0L * x - e + static_cast<long double>(j - 1);
    detail::check_denominator(cplx(static_cast<double>(den.real()), static_cast<double>(den.imag())), j, "right_eigenvector");
    pw *= sgn;
    fact *= j;
    acc(k - j) = num / den * pw / fact * detail::A_power_element_ld(m, k - j, j);
  }
  return {m, detail::to_double(detail::LVector(detail::exp_A_block_ld(m, size, -1.0L) * acc))};
}

inline BlockVector right_eigenvector_productform(const ModelParams& p, int m, int k, const Truncation& t,
                                                 const SpectralOptions& opt = {}) {
  t.check_index(m, k);
  const int size = t.block_size(m);
  SuperdiagForm form = opt.flip_superdiag_sign ? SuperdiagForm::Flipped : SuperdiagForm::Absolute;
  BlockVector v{m, CVector::Zero(size)};
  v.coeffs(k) = 1.0;
  const cplx lk = eigenvalue(p, m, k);
  for (int q = k - 1; q >= 0; --q) {
    cplx gap = lk - eigenvalue(p, m, q);
    if (gap == cplx(0.0)) throw DegeneracyError("product-form eigenvector: coincident eigenvalues");
    v.coeffs(q) = v.coeffs(q + 1) * superdiagonal_coefficient(p, m, q + 1, form) / gap;
  }
  return apply_exp_A(v, -1.0);
}

// Components <<bar rho_k | phi_q>> for q in the block.
inline BlockVector left_eigenvector(const ModelParams& p, int m, int k, const Truncation& t) {
  t.check_index(m, k);
  const int size = t.block_size(m);
  CaseTag tag = classify(p);
  BlockVector out{m, CVector::Zero(size)};
  if (tag == CaseTag::HamiltonianOnly) {
    out.coeffs(k) = 1.0;
    return out;
  }
  if (tag == CaseTag::ZeroKappa2) {
    CMatrix e = exp_A_block(m, size, detail::zero_kappa2_scale(p, m));
    out.coeffs = e.row(k).transpose();
    return out;
  }
  if (is_degenerate_pair(p, m, k)) {
    for (int q = 0; q < size; ++q) out.coeffs(q) = (q % 2 == k) ? 1.0 : 0.0;
    return out;
  }
  const detail::lcplx x = detail::to_ld(x_parameter(p, m, k));
  const detail::lcplx b = 2.0L * x + static_cast<long double>(eta(p));
  Eigen::Matrix<detail::lcplx, 1, Eigen::Dynamic> u = Eigen::Matrix<detail::lcplx, 1, Eigen::Dynamic>::Zero(size);
  detail::lcplx ra = 1.0L, rb = 1.0L;
  long double pw = 1.0L, fact = 1.0L;
  for (int j = 0; k + j < size; ++j) {
    if (j > 0) {
      ra *= x + static_cast<long double>(j - 1);
      rb *= b + static_cast<long double>(j - 1);
      fact *= j;
      pw *= -2.0L;
    }
    detail::check_denominator(cplx(static_cast<double>(rb.real()), static_cast<double>(rb.imag())), j, "left_eigenvector");
    u(k + j) = ra / (rb * fact) * pw * detail::A_power_element_ld(m, k, j);
  }
  detail::LVector w = (u * detail::exp_A_block_ld(m, size, 1.0L)).transpose();
  out.coeffs = detail::to_double(w);
  return out;
}

enum class FDirection { Forward, Inverse };

// Forward: sum_j D_j (-2A)^j / j! with D_j = (x)_j/(2x+eta)_j on the left.
// Inverse: sum_j (2A)^j / j! D'_j with D'_j = (1-x)_j/(2-2x-eta)_j on the right.
inline BlockVector F_apply(const ModelParams& p, const BlockVector& v, FDirection dir, const SpectralOptions& opt = {});

namespace detail {

// Entries: forward (q, q+j) = (x_q)_j/(2x_q+eta)_j (-2)^j/j! (A^j)_{q,q+j};
// inverse (q-j, q) = (2)^j/j! (A^j)_{q-j,q} (1-x_q)_j/(2-2x_q-eta)_j.
inline LMatrix F_matrix_ld(const ModelParams& p, int m, int size, FDirection dir, const SpectralOptions& opt = {}) {
  if (p.kappa2 == 0.0) throw CaseError("F_matrix requires kappa2 > 0");
  const long double e = eta(p);
  LMatrix f = LMatrix::Zero(size, size);
  for (int q = 0; q < size; ++q) {
    const lcplx x = to_ld(x_parameter(p, m, q));
    lcplx ra = 1.0L, rb = 1.0L;
    long double pw = 1.0L, fact = 1.0L;
    if (dir == FDirection::Forward) {
      for (int j = 0; q + j < size; ++j) {
        if (j > 0) {
          ra *= x + static_cast<long double>(j - 1);
          rb *= 2.0L * x + e + static_cast<long double>(j - 1);
          pw *= -2.0L;
          fact *= j;
        }
        check_denominator(cplx(static_cast<double>(rb.real()), static_cast<double>(rb.imag())), j, "F_matrix forward");
        f(q, q + j) = ra / rb * (pw / fact * A_power_element_ld(m, q, j));
      }
    } else {
      const long double sgn = opt.flip_superdiag_sign ? -2.0L : 2.0L;
      for (int j = 0; j <= q; ++j) {
        if (j > 0) {
          ra *= 1.0L - x + static_cast<long double>(j - 1);
          rb *= 2.0L - 2.0L * x - e + static_cast<long double>(j - 1);
          pw *= sgn;
          fact *= j;
        }
        check_denominator(cplx(static_cast<double>(rb.real()), static_cast<double>(rb.imag())), j, "F_matrix inverse");
        f(q - j, q) = ra / rb * (pw / fact * A_power_element_ld(m, q - j, j));
      }
    }
  }
  return f;
}

}  // namespace detail

inline BlockVector F_apply(const ModelParams& p, const BlockVector& v, FDirection dir, const SpectralOptions& opt) {
  const int size = static_cast<int>(v.coeffs.size());
  detail::LVector x = v.coeffs.cast<detail::lcplx>();
  return {v.m, detail::to_double(detail::LVector(detail::F_matrix_ld(p, v.m, size, dir, opt) * x))};
}

inline CMatrix F_matrix(const ModelParams& p, int m, const Truncation& t, FDirection dir, const SpectralOptions& opt = {}) {
  return detail::to_double(detail::F_matrix_ld(p, m, t.block_size(m), dir, opt));
}

// max |(F F^-1 - I)|, |(F^-1 F - I)| for one block
inline double F_inverse_deviation(const ModelParams& p, int m, const Truncation& t, const SpectralOptions& opt = {}) {
  const int size = t.block_size(m);
  detail::LMatrix f = detail::F_matrix_ld(p, m, size, FDirection::Forward, opt);
  detail::LMatrix g = detail::F_matrix_ld(p, m, size, FDirection::Inverse, opt);
  detail::LMatrix id = detail::LMatrix::Identity(size, size);
  return std::max(detail::max_abs_ld(f * g - id), detail::max_abs_ld(g * f - id));
}

// Off-diagonal sup-norm of (F e^A) L (F e^A)^-1 on block m, with L the operator-built block.
inline double diagonalization_deviation(const ModelParams& p, int m, const Truncation& t, const SpectralOptions& opt = {}) {
  const int size = t.block_size(m);
  detail::LMatrix lb = detail::to_ld(liouvillian_block(p, m, t).entries);
  detail::LMatrix c = detail::F_matrix_ld(p, m, size, FDirection::Forward, opt) * detail::exp_A_block_ld(m, size, 1.0L) * lb *
                      detail::exp_A_block_ld(m, size, -1.0L) * detail::F_matrix_ld(p, m, size, FDirection::Inverse, opt);
  c.diagonal().setZero();
  return detail::max_abs_ld(c);
}

inline double right_residual(const CMatrix& lb, cplx lambda, const CVector& v) {
  CVector r = lb * v - lambda * v;
  return detail::max_abs(r) / detail::max_abs(v);
}

inline double left_residual(const CMatrix& lb, cplx lambda, const CVector& w) {
  Eigen::RowVectorXcd wr = w.transpose();
  Eigen::RowVectorXcd r = wr * lb - lambda * wr;
  return r.cwiseAbs().maxCoeff() / w.cwiseAbs().maxCoeff();
}

struct BlockSpectrum {
  int m = 0;
  CVector eigenvalues;
  CMatrix right;  // column k = rho_k
  CMatrix left;   // row k = bar rho_k
};

struct Degeneracy {
  int m;
  int k;
  int q;
};

class SpectralDecomposition {
 public:
  SpectralDecomposition(const ModelParams& p, const Truncation& t, CaseTag tag, std::vector<BlockSpectrum> blocks,
                        std::vector<Degeneracy> deg, bool near_integer_warning)
      : params_(p), trunc_(t), tag_(tag), blocks_(std::move(blocks)), degeneracies_(std::move(deg)),
        near_integer_warning_(near_integer_warning) {}

  const ModelParams& params() const { return params_; }
  const Truncation& truncation() const { return trunc_; }
  CaseTag tag() const { return tag_; }
  bool near_integer_warning() const { return near_integer_warning_; }
  const std::vector<Degeneracy>& degeneracies() const { return degeneracies_; }
  const std::vector<BlockSpectrum>& blocks() const { return blocks_; }
  const BlockSpectrum& block(int m) const {
    trunc_.check_block(m);
    return blocks_[m + trunc_.n_max()];
  }

  // b_k^(m) = <<bar rho_k | rho>>
  BlockSet coefficients(const FockState& s) const {
    BlockSet b = to_blocks(s);
    for (auto& v : b) v.coeffs = block(v.m).left * v.coeffs;
    return b;
  }

 private:
  ModelParams params_;
  Truncation trunc_;
  CaseTag tag_;
  std::vector<BlockSpectrum> blocks_;
  std::vector<Degeneracy> degeneracies_;
  bool near_integer_warning_;
};

// Exhaustive scan for coincident eigenvalues inside each block.
inline std::vector<Degeneracy> degeneracy_scan(const ModelParams& p, const Truncation& t) {
  std::vector<Degeneracy> out;
  if (p.hamiltonian_only()) return out;
  for (int m = -t.n_max(); m <= t.n_max(); ++m) {
    const int size = t.block_size(m);
    for (int k = 0; k < size; ++k)
      for (int q = k + 1; q < size; ++q) {
        cplx a = eigenvalue(p, m, k), b = eigenvalue(p, m, q);
        if (std::abs(a - b) <= 1e-12 * (1.0 + std::max(std::abs(a), std::abs(b)))) out.push_back({m, k, q});
      }
  }
  bool expected = p.kappa1 == 0.0 && p.kappa2 > 0.0;
  for (const auto& d : out)
    if (!(expected && d.m == 0 && d.k == 0 && d.q == 1))
      throw DegeneracyError("unexpected eigenvalue degeneracy at m=" + std::to_string(d.m) + " k=" +
                            std::to_string(d.k) + " q=" + std::to_string(d.q));
  if (expected && out.size() != 1) throw DegeneracyError("expected degenerate pair (0,0),(0,1) not found");
  return out;
}

inline SpectralDecomposition decompose(const ModelParams& p, const Truncation& t, const SpectralOptions& opt = {}) {
  Classification cls = classify_detailed(p);
  auto deg = degeneracy_scan(p, t);
  std::vector<BlockSpectrum> blocks;
  blocks.reserve(t.block_count());
  for (int m = -t.n_max(); m <= t.n_max(); ++m) {
    const int size = t.block_size(m);
    BlockSpectrum b{m, CVector(size), CMatrix(size, size), CMatrix(size, size)};
    for (int k = 0; k < size; ++k) {
      b.eigenvalues(k) = eigenvalue(p, m, k);
      b.right.col(k) = right_eigenvector(p, m, k, t, opt).coeffs;
      b.left.row(k) = left_eigenvector(p, m, k, t).coeffs.transpose();
    }
    blocks.push_back(std::move(b));
  }
  return SpectralDecomposition(p, t, cls.tag, std::move(blocks), std::move(deg), cls.near_integer_warning);
}

inline void write_spectrum_csv(std::ostream& os, const SpectralDecomposition& d) {
  os << "m,k,re_lambda,im_lambda\n";
  os.precision(17);
  for (const auto& b : d.blocks())
    for (int k = 0; k < b.eigenvalues.size(); ++k)
      os << b.m << ',' << k << ',' << b.eigenvalues(k).real() << ',' << b.eigenvalues(k).imag() << '\n';
}

inline void write_eigvecs_csv(std::ostream& os, const SpectralDecomposition& d) {
  os << "m,k,p,re,im,side\n";
  os.precision(17);
  for (const auto& b : d.blocks()) {
    const int size = static_cast<int>(b.eigenvalues.size());
    for (int k = 0; k < size; ++k)
      for (int q = 0; q < size; ++q) {
        cplx r = b.right(q, k);
        if (r != cplx(0.0)) os << b.m << ',' << k << ',' << q << ',' << r.real() << ',' << r.imag() << ",right\n";
      }
    for (int k = 0; k < size; ++k)
      for (int q = 0; q < size; ++q) {
        cplx l = b.left(k, q);
        if (l != cplx(0.0)) os << b.m << ',' << k << ',' << q << ',' << l.real() << ',' << l.imag() << ",left\n";
      }
  }
}

}  // namespace kerrloss
