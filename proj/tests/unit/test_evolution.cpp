#include <gtest/gtest.h>

#include <random>

#include <kerrloss/evolution.hpp>
#include <kerrloss/oracle.hpp>

using namespace kerrloss;

namespace {

FockState random_density(const Truncation& t, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  CMatrix x(t.dim(), t.dim());
  for (int i = 0; i < t.dim(); ++i)
    for (int j = 0; j < t.dim(); ++j) x(i, j) = cplx(g(rng), g(rng));
  CMatrix rho = x * x.adjoint();
  rho /= rho.trace();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return FockState(t, rho, true);
}

double rel(const FockState& a, const FockState& b) {
  return detail::max_abs(CMatrix(a.matrix() - b.matrix())) / std::max(1e-300, detail::max_abs(b.matrix()));
}

// G_{r,k}^(m)(t) read off the exponential of the operator-built block
cplx g_from_block_exponential(const ModelParams& p, int m, int k, int r, double t, int n_max) {
  Truncation tr(n_max);
  CMatrix e = matrix_exponential(liouvillian_block(p, m, tr).entries, t);
  return e(k, k + r) / detail::propagator_weight(m, k, r);
}

double dfact(int n) {
  double r = 1.0;
  for (int k = n; k > 1; k -= 2) r *= k;
  return r;
}

}  // namespace

TEST(GCoefficient, ZeroOrderIsExponential) {
  const ModelParams p{1.0, 0.6, 0.4, 1.2};
  for (int m = -2; m <= 2; ++m)
    for (int k = 0; k <= 4; ++k)
      EXPECT_LT(std::abs(g_coefficient(p, m, k, 0, 0.7) - std::exp(eigenvalue(p, m, k) * 0.7)), 1e-13);
}

TEST(GCoefficient, IdentityAtTimeZero) {
  const ModelParams p{1.0, 0.6, 0.4, 1.2};
  for (int m = -2; m <= 2; ++m)
    for (int k = 0; k <= 3; ++k)
      for (int r = 0; r <= 6; ++r) EXPECT_LT(std::abs(g_coefficient(p, m, k, r, 0.0) - (r == 0 ? 1.0 : 0.0)), 1e-10);
}

TEST(GCoefficient, MatchesBlockExponential) {
  for (ModelParams p : {ModelParams{1.0, 0.6, 0.4, 1.2}, ModelParams{0.5, 1.1, 2.0, 1.0}, ModelParams{1.0, 0.3, 0.0, 0.8}})
    for (int m : {-2, 0, 1, 3})
      for (int k = 0; k <= 3; ++k)
        for (int r = 0; r <= 5; ++r) {
          cplx ref = g_from_block_exponential(p, m, k, r, 0.4, 14);
          EXPECT_LT(std::abs(g_coefficient(p, m, k, r, 0.4) - ref), 1e-9 * std::max(1.0, std::abs(ref)))
              << "m=" << m << " k=" << k << " r=" << r;
        }
}

TEST(GCoefficient, OddOrdersVanishForPureTwoBodyLoss) {
  const ModelParams p{0.0, 0.0, 0.0, 1.0};
  for (int m = 0; m <= 3; ++m)
    for (int k = 0; k <= 4; ++k)
      for (int r = 1; r <= 7; r += 2) EXPECT_LT(std::abs(g_coefficient(p, m, k, r, 0.5)), 1e-12);
}

TEST(PureTwoBodyLoss, ExponentsAreBlockEigenvalues) {
  const ModelParams p{0.0, 0.0, 0.0, 1.0};
  EXPECT_EQ(pure_loss_mu(0, 0, 1.0), 0.0);
  EXPECT_EQ(pure_loss_mu(0, 1, 1.0), 0.0);
  for (int m = 0; m <= 4; ++m)
    for (int k = 0; k <= 6; ++k) EXPECT_NEAR(pure_loss_mu(m, k, 1.0), eigenvalue(p, m, k).real(), 1e-12);
}

TEST(PureTwoBodyLoss, DoubleFactorialFormAtTwoOneFour) {
  const ModelParams p{0.0, 0.0, 0.0, 1.0};
  const int m = 2, k = 1, r = 4;
  const double t = 0.3;
  double sum = 0.0;
  for (int j = 0; j <= r; ++j) {
    const double y = k + 2.0 * j + m / 2.0;
    double poch = 1.0;
    for (int i = 0; i <= r; ++i) poch *= y - j - 0.5 + i;
    double binom = std::tgamma(r + 1.0) / (std::tgamma(j + 1.0) * std::tgamma(r - j + 1.0));
    sum += std::pow(-1.0, j) * binom * std::exp(eigenvalue(p, m, k + 2 * j).real() * t) * (y - 0.5) / poch;
  }
  const double g = dfact(2 * r - 1) / std::pow(2.0, r) * sum;
  EXPECT_LT(std::abs(pure_loss_g(m, k, r, t, 1.0) - g), 1e-12);
  EXPECT_LT(std::abs(g_coefficient(p, m, k, 2 * r, t) - g), 1e-10);
  EXPECT_LT(std::abs(g_from_block_exponential(p, m, k, 2 * r, t, 14) - g), 1e-10);
}

TEST(PureTwoBodyLoss, OneTwoThreeMatchesBlockExponential) {
  const ModelParams p{0.0, 0.0, 0.0, 1.0};
  cplx ref = g_from_block_exponential(p, 1, 2, 6, 0.2, 14);
  EXPECT_LT(std::abs(pure_loss_g(1, 2, 3, 0.2, 1.0) - ref), 1e-10);
  EXPECT_LT(std::abs(g_coefficient(p, 1, 2, 6, 0.2) - ref), 1e-10);
  EXPECT_LT(std::abs(pure_loss_g(1, 2, 0, 0.2, 1.0) - std::exp(pure_loss_mu(1, 2, 1.0) * 0.2)), 1e-15);
  EXPECT_THROW(pure_loss_g(-1, 0, 1, 0.1, 1.0), ValidationError);
}

TEST(PropagatePhi, TimeZeroIsIdentity) {
  Truncation t(8);
  FockState rho = random_density(t, 1);
  EXPECT_LT(rel(propagate_phi({1.0, 0.5, 0.3, 1.0}, rho, 0.0), rho), 1e-10);
}

TEST(PropagatePhi, MatchesOdeAndPreservesTrace) {
  Truncation t(10);
  FockState rho = FockState::coherent(t, cplx(0.8, 0.3));
  for (ModelParams p : {ModelParams{1.0, 0.5, 0.3, 1.0}, ModelParams{1.0, 0.5, 0.0, 1.0}, ModelParams{1.0, 0.5, 2.0, 1.0}})
    for (double tt : {0.1, 1.0, 5.0}) {
      FockState a = propagate_phi(p, rho, tt);
      FockState ref = ode_propagate(Generator(p), rho, tt);
      EXPECT_LT(rel(a, ref), 1e-6);
      EXPECT_LT(std::abs(a.trace() - rho.trace()), 1e-9);
      EXPECT_LT(a.hermiticity_deviation(), 1e-12);
      EXPECT_LT(rel(spectral_propagate(decompose(p, t), rho, tt), a), 1e-8);
    }
}

TEST(PropagatePhi, RelaxesToVacuum) {
  Truncation t(8);
  const ModelParams p{1.0, 0.5, 1.0, 0.7};
  FockState out = propagate_phi(p, random_density(t, 3), 50.0);
  EXPECT_LT(detail::max_abs(CMatrix(out.matrix() - FockState::vacuum(t).matrix())), 1e-8);
}

TEST(PropagatePhi, ParityConservedWithoutLinearLoss) {
  Truncation t(8);
  const ModelParams p{1.0, 0.5, 0.0, 0.9};
  CMatrix rho = 0.5 * (FockState::fock(t, 0).matrix() + FockState::fock(t, 2).matrix());
  FockState s(t, rho, true);
  CMatrix P = parity_projector(t.dim());
  for (double tt : {0.1, 1.0, 5.0, 20.0}) {
    cplx even = (P * propagate_phi(p, s, tt).matrix()).trace();
    EXPECT_LT(std::abs(even - 1.0), 1e-9);
  }
}

TEST(PropagatePhi, Semigroup) {
  Truncation t(8);
  const ModelParams p{0.8, 0.7, 0.4, 1.1};
  FockState rho = random_density(t, 4);
  FockState once = propagate_phi(p, rho, 0.9);
  FockState twice = propagate_phi(p, propagate_phi(p, rho, 0.4), 0.5);
  EXPECT_LT(rel(twice, once), 1e-8);
}

TEST(PropagatePhi, PositivityAtSamples) {
  Truncation t(8);
  const ModelParams p{0.8, 0.7, 0.4, 1.1};
  for (unsigned seed : {5u, 6u})
    for (double tt : {0.2, 1.0, 4.0}) {
      Eigen::SelfAdjointEigenSolver<CMatrix> es(propagate_phi(p, random_density(t, seed), tt).matrix());
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
    }
}

TEST(SpectralPropagate, SingleEigenmode) {
  Truncation t(8);
  const ModelParams p{1.0, 0.5, 0.3, 1.0};
  SpectralDecomposition d = decompose(p, t);
  for (auto [m, k] : {std::pair{0, 2}, std::pair{3, 1}, std::pair{-2, 4}}) {
    BlockSet b(t);
    b.block(m) = right_eigenvector(p, m, k, t);
    FockState mode = from_blocks(b);
    const cplx f = std::exp(eigenvalue(p, m, k) * 0.7);
    FockState expect(t, f * mode.matrix());
    EXPECT_LT(rel(spectral_propagate(d, mode, 0.7), expect), 1e-9);
    EXPECT_LT(rel(propagate_phi(p, mode, 0.7), expect), 1e-8);
  }
}

TEST(SpectralPropagate, TraceCoefficientIsOne) {
  Truncation t(8);
  SpectralDecomposition d = decompose({1.0, 0.5, 0.3, 1.0}, t);
  EXPECT_LT(std::abs(d.coefficients(random_density(t, 7)).block(0).coeffs(0) - 1.0), 1e-12);
}

TEST(SpectralPropagate, CoherentExpansionCoefficient) {
  Truncation t(30);
  const ModelParams p{1.0, 0.5, 0.3, 1.0};
  const cplx alpha = std::polar(0.8, 0.4);
  cplx b = decompose(p, t).coefficients(FockState::coherent(t, alpha)).block(1).coeffs(1);
  const cplx x = x_parameter(p, 1, 1);
  cplx expect = std::pow(0.8, 3) * std::exp(kI * 0.4) / std::sqrt(2.0) * hyp1f1_series(x, 2.0 * x + 0.3, -2.0 * 0.64);
  EXPECT_LT(std::abs(b - expect), 1e-10);
  EXPECT_LT(std::abs(coherent_expansion_coefficient(p, alpha, 1, 1) - expect), 1e-13);
}

TEST(Heisenberg, IdentityIsFixed) {
  Truncation t(8);
  FockState id(t, CMatrix::Identity(9, 9), true);
  EXPECT_LT(rel(heisenberg_phi({1.0, 0.5, 0.3, 1.0}, id, 2.0), id), 1e-10);
}

TEST(Heisenberg, DualityWithSchrodingerPicture) {
  Truncation t(8);
  const ModelParams p{1.0, 0.5, 0.3, 1.0};
  FockState rho = random_density(t, 9);
  for (const CMatrix& O : {annihilation(9), number_op(9), CMatrix(annihilation(9) * annihilation(9))}) {
    FockState oh = heisenberg_phi(p, FockState(t, O), 0.8);
    cplx schr = (propagate_phi(p, rho, 0.8).matrix() * O).trace();
    cplx heis = (rho.matrix() * oh.matrix()).trace();
    EXPECT_LT(std::abs(schr - heis), 1e-8);
  }
}

TEST(Heisenberg, AnnihilationKeepsSparsity) {
  Truncation t(8);
  const ModelParams p{1.0, 0.5, 0.3, 1.0};
  CMatrix ah = heisenberg_phi(p, FockState(t, annihilation(9)), 1.3).matrix();
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      if (j != i + 1) EXPECT_EQ(ah(i, j), cplx(0.0));
  for (int k = 0; k < 8; ++k) {
    cplx row_factor = ah(k, k + 1) / std::sqrt(k + 1.0);
    EXPECT_LT(std::abs(row_factor - annihilation_factor(p, k, 1.3)), 1e-10) << k;
  }
}

TEST(Heisenberg, NumberDecaysUnderLinearLoss) {
  Truncation t(8);
  const ModelParams p{1.0, 0.0, 1.0, 0.0};
  FockState rho = random_density(t, 10);
  FockState nh = heisenberg_phi(p, FockState(t, number_op(9)), 1.7);
  cplx n0 = (rho.matrix() * number_op(9)).trace();
  EXPECT_LT(std::abs((rho.matrix() * nh.matrix()).trace() - n0 * std::exp(-1.7)), 1e-8);
}

TEST(PropagatorCoefficients, CachesAndRejectsLinearLimit) {
  Truncation t(6);
  PropagatorCoefficients pc({1.0, 0.5, 0.3, 1.0}, t, {0.2, 0.4});
  EXPECT_EQ(pc.G(1, 1, 2, 0), pc.G(1, 1, 2, 0));
  EXPECT_EQ(pc.cancellation_count(), 0u);
  EXPECT_THROW(PropagatorCoefficients({1.0, 0.5, 0.3, 0.0}, t, {0.2}), CaseError);
  EXPECT_THROW(pc.G(1, 3, 3, 0), DimensionError);
}
