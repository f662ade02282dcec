#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "evolution.hpp"
#include "noise.hpp"
#include "oracle.hpp"
#include "spectral.hpp"

namespace kerrloss {

// ---- metrics shared by the verify command and the test suites ----

inline double eigenvalue_exactness_deviation(const ModelParams& p, const Truncation& t) {
  double worst = 0.0;
  for (int m = -t.n_max(); m <= t.n_max(); ++m) {
    CMatrix lb = liouvillian_block(p, m, t).entries;
    for (int k = 0; k < lb.rows(); ++k) worst = std::max(worst, std::abs(lb(k, k) - eigenvalue(p, m, k)));
  }
  return worst;
}

struct ResidualReport {
  double right = 0.0;
  double left = 0.0;
};

inline ResidualReport eigenvector_residuals(const ModelParams& p, const Truncation& t, const SpectralOptions& opt = {}) {
  ResidualReport r;
  for (int m = -t.n_max(); m <= t.n_max(); ++m) {
    CMatrix lb = liouvillian_block(p, m, t).entries;
    for (int k = 0; k < lb.rows(); ++k) {
      const cplx lam = eigenvalue(p, m, k);
      r.right = std::max(r.right, right_residual(lb, lam, right_eigenvector(p, m, k, t, opt).coeffs));
      r.left = std::max(r.left, left_residual(lb, lam, left_eigenvector(p, m, k, t).coeffs));
    }
  }
  return r;
}

struct BiorthoReport {
  double biorthonormality = 0.0;
  double completeness = 0.0;
};

// Restricted to truncation-safe indices k <= K(m) - 2.
inline BiorthoReport biorthonormality(const SpectralDecomposition& d) {
  BiorthoReport r;
  for (const auto& b : d.blocks()) {
    const int safe = static_cast<int>(b.eigenvalues.size()) - 2;
    if (safe <= 0) continue;
    const int s = static_cast<int>(b.eigenvalues.size());
    CMatrix id = CMatrix::Identity(s, s);
    CMatrix lr = b.left * b.right - id;
    CMatrix rl = b.right * b.left - id;
    r.biorthonormality = std::max(r.biorthonormality, detail::max_abs(CMatrix(lr.topLeftCorner(safe, safe))));
    r.completeness = std::max(r.completeness, detail::max_abs(CMatrix(rl.topLeftCorner(safe, safe))));
  }
  return r;
}

struct FReport {
  double inverse = 0.0;
  double off_diagonal = 0.0;
};

inline FReport F_transform_report(const ModelParams& p, const Truncation& t, const SpectralOptions& opt = {}) {
  FReport r;
  for (int m = -t.n_max(); m <= t.n_max(); ++m) {
    r.inverse = std::max(r.inverse, F_inverse_deviation(p, m, t, opt));
    r.off_diagonal = std::max(r.off_diagonal, diagonalization_deviation(p, m, t, opt));
  }
  return r;
}

inline double relative_sup(const FockState& a, const FockState& b) {
  double den = detail::max_abs(b.matrix());
  return detail::max_abs(CMatrix(a.matrix() - b.matrix())) / (den > 0.0 ? den : 1.0);
}

// Natural time unit: 1/kappa2, else 1/kappa1, else 1/max(omega, |U|, 1).
inline double time_unit(const ModelParams& p) {
  if (p.kappa2 > 0.0) return 1.0 / p.kappa2;
  if (p.kappa1 > 0.0) return 1.0 / p.kappa1;
  return 1.0 / std::max({std::abs(p.omega), std::abs(p.U), 1.0});
}

struct PropagationReport {
  double closed_form = 0.0;  // propagate_phi vs ODE
  double spectral = 0.0;     // spectral_propagate vs ODE
};

inline PropagationReport propagation_equivalence(const ModelParams& p, const FockState& initial,
                                                 const std::vector<double>& scaled_times, const SpectralOptions& opt = {},
                                                 const IntegratorConfig& ode = {}) {
  PropagationReport r;
  SpectralDecomposition d = decompose(p, initial.truncation(), opt);
  Generator g(p);
  for (double s : scaled_times) {
    const double t = s * time_unit(p);
    FockState ref = ode_propagate(g, initial, t, ode);
    r.closed_form = std::max(r.closed_form, relative_sup(propagate_phi(p, initial, t), ref));
    r.spectral = std::max(r.spectral, relative_sup(spectral_propagate(d, initial, t), ref));
  }
  return r;
}

struct PureLossReport {
  double odd = 0.0;
  double even = 0.0;
};

inline PureLossReport pure_loss_consistency(int r_max = 6, int k_max = 6, int m_max = 4,
                                       const std::vector<double>& times = {0.1, 0.5, 2.0}) {
  const ModelParams p{0.0, 0.0, 0.0, 1.0};
  PureLossReport rep;
  for (double t : times)
    for (int m = 0; m <= m_max; ++m)
      for (int k = 0; k <= k_max; ++k)
        for (int r = 0; r <= r_max; ++r) {
          rep.even = std::max(rep.even, std::abs(g_coefficient(p, m, k, 2 * r, t) - pure_loss_g(m, k, r, t, 1.0)));
          rep.odd = std::max(rep.odd, std::abs(g_coefficient(p, m, k, 2 * r + 1, t)));
        }
  return rep;
}

inline double similarity_suite_max(const ModelParams& p, int n_max = 10, const std::vector<int>& ms = {0, 1, -1, 3}) {
  Truncation t(n_max);
  double worst = 0.0;
  for (int m : ms)
    for (const auto& c : similarity_identity_suite(p, m, t).checks) worst = std::max(worst, c.max_dev);
  return worst;
}

// ---- seeded parameter draws ----

inline ModelParams draw_params(CaseTag tag, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> omega(0.2, 2.0), U(0.1, 2.0), k2(0.3, 2.0), ratio(0.1, 3.0);
  ModelParams p{omega(rng), U(rng), 0.0, 0.0};
  switch (tag) {
    case CaseTag::GenericRatio: {
      p.kappa2 = k2(rng);
      double r;
      do r = ratio(rng);
      while (std::abs(r - std::round(r)) < 0.05);
      p.kappa1 = r * p.kappa2;
      break;
    }
    case CaseTag::IntegerRatio: {
      p.kappa2 = k2(rng);
      p.kappa1 = static_cast<double>(1 + static_cast<int>(rng() % 3)) * p.kappa2;
      break;
    }
    case CaseTag::ZeroKappa1:
      p.kappa2 = k2(rng);
      break;
    case CaseTag::ZeroKappa2:
      p.kappa1 = k2(rng);
      break;
    case CaseTag::HamiltonianOnly:
      break;
  }
  return p;
}

inline const std::vector<CaseTag>& all_case_tags() {
  static const std::vector<CaseTag> tags{CaseTag::GenericRatio, CaseTag::IntegerRatio, CaseTag::ZeroKappa1,
                                         CaseTag::ZeroKappa2, CaseTag::HamiltonianOnly};
  return tags;
}

struct VerifyOptions {
  int n_max = 12;
  int draws = 5;
  std::uint64_t seed = 20240607;
  SpectralOptions spectral{};
  std::vector<double> scaled_times{0.1, 1.0};
};

// Runs every invariant suite over seeded draws of each CaseTag.
inline std::vector<VerifyCheck> run_verify(const VerifyOptions& o) {
  std::vector<VerifyCheck> out;
  std::mt19937_64 rng(o.seed);
  Truncation t(o.n_max);
  auto fail = [&](const std::string& name, const std::exception& e) {
    out.push_back({name + " (" + e.what() + ")", std::numeric_limits<double>::infinity(), 0.0, false});
  };
  for (CaseTag tag : all_case_tags()) {
    for (int i = 0; i < o.draws; ++i) {
      const ModelParams p = draw_params(tag, rng);
      const std::string pre = to_string(tag) + "[" + std::to_string(i) + "].";
      try {
        out.push_back(make_check(pre + "classification", classify(p) == tag ? 0.0 : 1.0, 0.5));
        out.push_back(make_check(pre + "eigenvalue_exactness", eigenvalue_exactness_deviation(p, t), 1e-12));
        auto res = eigenvector_residuals(p, t, o.spectral);
        out.push_back(make_check(pre + "right_residual", res.right, 1e-9));
        out.push_back(make_check(pre + "left_residual", res.left, 1e-9));
        SpectralDecomposition d = decompose(p, t, o.spectral);
        auto bi = biorthonormality(d);
        out.push_back(make_check(pre + "biorthonormality", bi.biorthonormality, 1e-9));
        out.push_back(make_check(pre + "completeness", bi.completeness, 1e-8));
        if (tag == CaseTag::GenericRatio) {
          auto f = F_transform_report(p, t, o.spectral);
          out.push_back(make_check(pre + "F_inverse", f.inverse, 1e-10));
          out.push_back(make_check(pre + "F_diagonalization", f.off_diagonal, 1e-9));
        }
        auto pr = propagation_equivalence(p, FockState::coherent(t, 0.8), o.scaled_times, o.spectral);
        out.push_back(make_check(pre + "oracle_equivalence", std::max(pr.closed_form, pr.spectral), 1e-6));
        out.push_back(make_check(pre + "similarity_identities", similarity_suite_max(p), 1e-12));
        out.push_back(make_check(pre + "weak_symmetry", weak_symmetry_deviation(p, t), 1e-12));
      } catch (const std::exception& e) {
        fail(pre + "error", e);
      }
    }
  }
  try {
    auto s = pure_loss_consistency();
    out.push_back(make_check("pure_loss.odd_r_vanish", s.odd, 1e-12));
    out.push_back(make_check("pure_loss.even_r_match", s.even, 1e-10));
  } catch (const std::exception& e) {
    fail("pure_loss", e);
  }
  out.push_back(make_check("source_convention", SourceConvention::invariant_deviation(Truncation(8)), 1e-14));
  return out;
}

inline bool all_pass(const std::vector<VerifyCheck>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

}  // namespace kerrloss
