#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"

namespace kerrloss {

class Truncation {
 public:
  explicit Truncation(int n_max) : n_max_(n_max) {
    if (n_max < 2) throw ValidationError("truncation requires n_max >= 2, got " + std::to_string(n_max));
  }

  int n_max() const { return n_max_; }
  int dim() const { return n_max_ + 1; }
  int block_count() const { return 2 * n_max_ + 1; }
  bool has_block(int m) const { return std::abs(m) <= n_max_; }

  int block_max_k(int m) const {
    check_block(m);
    return n_max_ - std::abs(m);
  }
  int block_size(int m) const { return block_max_k(m) + 1; }

  void check_block(int m) const {
    if (!has_block(m))
      throw DimensionError("block m=" + std::to_string(m) + " outside truncation n_max=" + std::to_string(n_max_));
  }
  void check_index(int m, int k) const {
    check_block(m);
    if (k < 0 || k > n_max_ - std::abs(m))
      throw DimensionError("index (m=" + std::to_string(m) + ", k=" + std::to_string(k) + ") outside truncation");
  }

  bool operator==(const Truncation&) const = default;

 private:
  int n_max_;
};

struct FockIndex {
  int row;
  int col;
};

// phi_k^(m) = |k+m><k| for m >= 0, |k><k-m| for m < 0
inline FockIndex phi_index(int m, int k) {
  if (m >= 0) return {k + m, k};
  return {k, k - m};
}

class FockState {
 public:
  FockState(const Truncation& trunc, CMatrix entries, bool hermitian = false)
      : trunc_(trunc), entries_(std::move(entries)), hermitian_(hermitian) {
    if (entries_.rows() != trunc_.dim() || entries_.cols() != trunc_.dim())
      throw DimensionError("FockState entries must be " + std::to_string(trunc_.dim()) + "x" +
                           std::to_string(trunc_.dim()));
    if (hermitian_ && hermiticity_deviation() > 1e-12)
      throw ValidationError("FockState marked hermitian but deviates by " + std::to_string(hermiticity_deviation()));
  }

  static FockState zero(const Truncation& t) { return FockState(t, CMatrix::Zero(t.dim(), t.dim()), true); }

  static FockState ketbra(const Truncation& t, int n1, int n2) {
    if (n1 < 0 || n2 < 0 || n1 > t.n_max() || n2 > t.n_max()) throw DimensionError("ketbra index outside truncation");
    CMatrix e = CMatrix::Zero(t.dim(), t.dim());
    e(n1, n2) = 1.0;
    return FockState(t, std::move(e), n1 == n2);
  }

  static FockState fock(const Truncation& t, int n) { return ketbra(t, n, n); }
  static FockState vacuum(const Truncation& t) { return fock(t, 0); }

  // |alpha><alpha| restricted to the truncated space (not renormalized)
  static FockState coherent(const Truncation& t, cplx alpha) {
    CMatrix e(t.dim(), t.dim());
    double w = std::exp(-std::norm(alpha));
    for (int n1 = 0; n1 <= t.n_max(); ++n1)
      for (int n2 = 0; n2 <= t.n_max(); ++n2) {
        double lf = 0.5 * (detail::log_factorial(n1) + detail::log_factorial(n2));
        e(n1, n2) = w * std::pow(alpha, n1) * std::pow(std::conj(alpha), n2) / std::exp(lf);
      }
    return FockState(t, std::move(e), true);
  }

  const Truncation& truncation() const { return trunc_; }
  const CMatrix& matrix() const { return entries_; }
  bool hermitian() const { return hermitian_; }

  cplx entry(int n1, int n2) const { return entries_(n1, n2); }
  cplx trace() const { return entries_.trace(); }

  FockState dagger() const { return FockState(trunc_, entries_.adjoint(), hermitian_); }

  double hermiticity_deviation() const { return detail::max_abs(CMatrix(entries_ - entries_.adjoint())); }

 private:
  Truncation trunc_;
  CMatrix entries_;
  bool hermitian_;
};

struct BlockVector {
  int m = 0;
  CVector coeffs;
};

class BlockSet {
 public:
  explicit BlockSet(const Truncation& t) : trunc_(t) {
    blocks_.reserve(t.block_count());
    for (int m = -t.n_max(); m <= t.n_max(); ++m) blocks_.push_back({m, CVector::Zero(t.block_size(m))});
  }

  const Truncation& truncation() const { return trunc_; }

  BlockVector& block(int m) {
    trunc_.check_block(m);
    return blocks_[m + trunc_.n_max()];
  }
  const BlockVector& block(int m) const {
    trunc_.check_block(m);
    return blocks_[m + trunc_.n_max()];
  }

  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }
  auto begin() { return blocks_.begin(); }
  auto end() { return blocks_.end(); }

 private:
  Truncation trunc_;
  std::vector<BlockVector> blocks_;
};

inline BlockVector block_of(const CMatrix& x, const Truncation& t, int m) {
  t.check_block(m);
  BlockVector b{m, CVector(t.block_size(m))};
  for (int k = 0; k < b.coeffs.size(); ++k) {
    auto [r, c] = phi_index(m, k);
    b.coeffs(k) = x(r, c);
  }
  return b;
}

inline void scatter_block(const BlockVector& b, CMatrix& x) {
  for (int k = 0; k < b.coeffs.size(); ++k) {
    auto [r, c] = phi_index(b.m, k);
    x(r, c) = b.coeffs(k);
  }
}

inline BlockSet to_blocks(const CMatrix& x, const Truncation& t) {
  if (x.rows() != t.dim() || x.cols() != t.dim()) throw DimensionError("to_blocks: matrix does not match truncation");
  BlockSet out(t);
  for (auto& b : out) b = block_of(x, t, b.m);
  return out;
}

inline BlockSet to_blocks(const FockState& s) { return to_blocks(s.matrix(), s.truncation()); }

inline FockState from_blocks(const BlockSet& blocks, bool hermitian = false) {
  const Truncation& t = blocks.truncation();
  CMatrix x = CMatrix::Zero(t.dim(), t.dim());
  for (const auto& b : blocks) scatter_block(b, x);
  return FockState(t, std::move(x), hermitian);
}

// Reassembles a state from loose blocks; every block must fit the same n_max.
inline FockState from_blocks(std::span<const BlockVector> blocks) {
  if (blocks.empty()) throw ValidationError("from_blocks: no blocks");
  int n_max = -1;
  for (const auto& b : blocks) {
    int implied = static_cast<int>(b.coeffs.size()) - 1 + std::abs(b.m);
    if (b.coeffs.size() == 0) throw ValidationError("from_blocks: empty block");
    if (n_max < 0) n_max = implied;
    if (implied != n_max) throw ValidationError("from_blocks: blocks imply inconsistent truncations");
  }
  Truncation t(n_max);
  BlockSet set(t);
  std::vector<bool> seen(t.block_count(), false);
  for (const auto& b : blocks) {
    if (seen[b.m + n_max]) throw ValidationError("from_blocks: duplicate block m=" + std::to_string(b.m));
    seen[b.m + n_max] = true;
    set.block(b.m) = b;
  }
  return from_blocks(set);
}

inline cplx coherent_phi_component(cplx alpha, int m, int k, const Truncation& t) {
  t.check_index(m, k);
  auto [n1, n2] = phi_index(m, k);
  double lf = 0.5 * (detail::log_factorial(n1) + detail::log_factorial(n2));
  return std::exp(-std::norm(alpha)) * std::pow(alpha, n1) * std::pow(std::conj(alpha), n2) / std::exp(lf);
}

inline nlohmann::json to_json(const FockState& s) {
  nlohmann::json entries = nlohmann::json::array();
  const CMatrix& x = s.matrix();
  for (int n1 = 0; n1 < x.rows(); ++n1)
    for (int n2 = 0; n2 < x.cols(); ++n2)
      if (x(n1, n2) != cplx(0.0))
        entries.push_back({n1, n2, x(n1, n2).real(), x(n1, n2).imag()});
  return {{"n_max", s.truncation().n_max()}, {"hermitian", s.hermitian()}, {"entries", entries}};
}

inline FockState fock_state_from_json(const nlohmann::json& j) {
  try {
    Truncation t(j.at("n_max").get<int>());
    bool herm = j.value("hermitian", false);
    CMatrix x = CMatrix::Zero(t.dim(), t.dim());
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 4) throw ValidationError("FockState entry must be [n1, n2, re, im]");
      int n1 = e[0].get<int>(), n2 = e[1].get<int>();
      if (n1 < 0 || n2 < 0 || n1 > t.n_max() || n2 > t.n_max()) throw DimensionError("FockState entry outside n_max");
      x(n1, n2) = cplx(e[2].get<double>(), e[3].get<double>());
    }
    return FockState(t, std::move(x), herm);
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed FockState JSON: ") + ex.what());
  }
}

}  // namespace kerrloss
