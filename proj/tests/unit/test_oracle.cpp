#include <gtest/gtest.h>

#include <random>

#include <kerrloss/evolution.hpp>
#include <kerrloss/oracle.hpp>

using namespace kerrloss;

namespace {

CMatrix random_matrix(int d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  CMatrix x(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = cplx(g(rng), g(rng));
  return x;
}

Superscript swap_side(Superscript s) {
  if (s == Superscript::Plus) return Superscript::Minus;
  if (s == Superscript::Minus) return Superscript::Plus;
  return s;
}

}  // namespace

TEST(TriangularEigendecomp, DiagonalInput) {
  CMatrix d = CMatrix::Zero(4, 4);
  d.diagonal() << cplx(-1, 0.5), cplx(-2, 0), cplx(-0.3, -1), cplx(-4, 2);
  TriangularEigensystem es = triangular_eigendecomp({0, d});
  EXPECT_EQ(es.eigenvalues, d.diagonal());
  EXPECT_EQ(es.right, CMatrix::Identity(4, 4));
  EXPECT_EQ(es.left, CMatrix::Identity(4, 4));
}

TEST(TriangularEigendecomp, TwoByTwoBidiagonal) {
  const cplx l0(-0.5, 0.2), l1(-1.5, -0.7), c(0.9, 0.4);
  CMatrix m(2, 2);
  m << l0, c, 0.0, l1;
  TriangularEigensystem es = triangular_eigendecomp({0, m});
  EXPECT_LT(std::abs(es.right(0, 0) - 1.0) + std::abs(es.right(1, 0)), 1e-15);
  EXPECT_LT(std::abs(es.right(0, 1) - c / (l1 - l0)) + std::abs(es.right(1, 1) - 1.0), 1e-15);
  EXPECT_LT(detail::max_abs(CMatrix(es.left * es.right - CMatrix::Identity(2, 2))), 1e-15);
}

TEST(TriangularEigendecomp, RejectsLowerEntries) {
  CMatrix m = CMatrix::Identity(3, 3);
  m(2, 0) = 1.0;
  EXPECT_THROW(triangular_eigendecomp({0, m}), ValidationError);
}

TEST(TriangularEigendecomp, ArbitratesClosedFormBlock) {
  const ModelParams p{1.0, 0.7, 0.3, 1.0};
  Truncation t(10);
  BlockMatrix lb = liouvillian_block(p, 0, t);
  TriangularEigensystem es = triangular_eigendecomp(lb);
  SpectralDecomposition d = decompose(p, t);
  for (int k = 0; k < 11; ++k) {
    EXPECT_EQ(es.eigenvalues(k), lb.entries(k, k));
    CVector r = d.block(0).right.col(k);
    EXPECT_LT(detail::max_abs(CVector(es.right.col(k) - r)) / detail::max_abs(r), 1e-9);
    EXPECT_LT(detail::max_abs(CMatrix(es.left.row(k) - d.block(0).left.row(k))), 1e-9 * detail::max_abs(CMatrix(es.left.row(k))));
  }
}

TEST(MatrixExponential, ZeroAndDiagonal) {
  EXPECT_EQ(matrix_exponential(CMatrix::Zero(5, 5)), CMatrix::Identity(5, 5));
  CMatrix d = CMatrix::Zero(3, 3);
  d.diagonal() << cplx(-3.0, 1.0), cplx(0.5, 0.0), cplx(-20.0, -4.0);
  CMatrix e = matrix_exponential(d, 0.7);
  for (int i = 0; i < 3; ++i) EXPECT_LT(std::abs(e(i, i) - std::exp(0.7 * d(i, i))), 1e-13 * std::max(1.0, std::abs(e(i, i))));
  EXPECT_THROW(matrix_exponential(CMatrix::Zero(2, 3)), DimensionError);
}

TEST(MatrixExponential, Semigroup) {
  CMatrix m = 0.3 * random_matrix(12, 2);
  CMatrix a = matrix_exponential(m, 1.7), b = matrix_exponential(m, 0.6) * matrix_exponential(m, 1.1);
  EXPECT_LT(detail::max_abs(CMatrix(a - b)) / detail::max_abs(a), 1e-9);
}

TEST(MatrixExponential, AgreesWithOdeOnBasisStates) {
  const ModelParams p{1.0, 0.7, 0.3, 1.0};
  Truncation t(6);
  Generator g(p);
  CMatrix e = matrix_exponential(g.dense(t), 0.8);
  for (int c : {0, 8, 20, 48}) {
    CMatrix x = CMatrix::Zero(7, 7);
    x(c % 7, c / 7) = 1.0;
    FockState y = ode_propagate(g, FockState(t, x), 0.8);
    CVector ref = e.col(c);
    EXPECT_LT(detail::max_abs(CVector(Eigen::Map<const CVector>(y.matrix().data(), 49) - ref)), 1e-8);
  }
}

TEST(OdePropagate, ZeroActionReturnsInitial) {
  LinearAction zero = [](const CMatrix& x, CMatrix& out) { out = CMatrix::Zero(x.rows(), x.cols()); };
  CMatrix x0 = random_matrix(4, 1);
  EXPECT_EQ(ode_propagate(zero, x0, 3.0), x0);
  EXPECT_THROW(ode_propagate(zero, x0, -1.0), ValidationError);
}

TEST(OdePropagate, NumberDecayUnderLinearLoss) {
  Truncation t(10);
  const ModelParams p{1.0, 0.0, 1.0, 0.0};
  FockState s = FockState::fock(t, 5);
  for (double tt : {0.5, 2.0}) {
    FockState y = ode_propagate(Generator(p), s, tt);
    cplx n = (number_op(11) * y.matrix()).trace();
    EXPECT_LT(std::abs(n - 5.0 * std::exp(-tt)), 1e-8);
    EXPECT_LT(std::abs(y.trace() - 1.0), 1e-9);
  }
}

TEST(OdePropagate, FockFourUnderTwoBodyLoss) {
  Truncation t(6);
  const ModelParams p{0.0, 0.0, 0.0, 1.0};
  FockState s = FockState::fock(t, 4);
  for (double tt : {0.1, 0.5, 2.0}) {
    CMatrix a = ode_propagate(Generator(p), s, tt).matrix(), b = propagate_phi(p, s, tt).matrix();
    for (int n = 0; n < 7; ++n) EXPECT_LT(std::abs(a(n, n) - b(n, n)), 1e-9);
  }
}

TEST(OdePropagate, FixedStepFallback) {
  Truncation t(5);
  const ModelParams p{1.0, 0.5, 0.3, 0.6};
  IntegratorConfig rk4;
  rk4.method = IntegratorConfig::Method::FixedRK4;
  rk4.fixed_step = 1e-3;
  FockState s = FockState::coherent(t, 0.6);
  EXPECT_LT(detail::max_abs(CMatrix(ode_propagate(Generator(p), s, 0.5, rk4).matrix() -
                                    ode_propagate(Generator(p), s, 0.5).matrix())),
            1e-9);
}

TEST(IntegratorConfigValidation, RejectsBadTolerances) {
  IntegratorConfig c;
  c.rtol = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Correlator, SingleSourceOnVacuumVanishes) {
  Truncation t(6);
  const ModelParams p{1.0, 0.5, 0.3, 1.0};
  for (double tt : {0.0, 0.4, 3.0})
    EXPECT_LT(std::abs(multi_time_correlator(p, {{Superscript::Anti, tt}}, FockState::vacuum(t))), 1e-15);
}

TEST(Correlator, EqualTimeSecondOrderOnVacuum) {
  Truncation t(4);
  const ModelParams p{1.0, 0.5, 0.3, 1.0};
  cplx v = multi_time_correlator(p, {{Superscript::Anti, 0.0}, {Superscript::Anti, 0.0}}, FockState::vacuum(t));
  CMatrix V = annihilation(5) + annihilation(5).adjoint();
  CMatrix rho = FockState::vacuum(t).matrix();
  CMatrix once = V * rho + rho * V;
  cplx brute = (V * once + once * V).trace();
  EXPECT_LT(std::abs(v - 4.0), 1e-14);
  EXPECT_LT(std::abs(brute - 4.0), 1e-14);
}

TEST(Correlator, ConjugateSymmetry) {
  Truncation t(7);
  const ModelParams p{1.0, 0.5, 0.3, 1.0};
  FockState rho = FockState::coherent(t, cplx(0.5, 0.3));
  const std::vector<std::vector<Superscript>> seqs{{Superscript::Plus, Superscript::Minus, Superscript::Anti},
                                                   {Superscript::Comm, Superscript::Plus},
                                                   {Superscript::Anti, Superscript::Comm, Superscript::Minus}};
  const std::vector<double> times{1.2, 0.7, 0.1};
  for (const auto& seq : seqs) {
    std::vector<CorrelatorFactor> f, g;
    int comms = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      f.push_back({seq[i], times[i]});
      g.push_back({swap_side(seq[i]), times[i]});
      comms += seq[i] == Superscript::Comm;
    }
    cplx a = multi_time_correlator(p, f, rho), b = multi_time_correlator(p, g, rho);
    EXPECT_LT(std::abs(std::conj(a) - (comms % 2 ? -1.0 : 1.0) * b), 1e-9);
  }
}

TEST(Correlator, TraceInvarianceShortcut) {
  Truncation t(6);
  const ModelParams p{1.0, 0.5, 0.3, 1.0};
  FockState rho = FockState::coherent(t, 0.7);
  std::vector<CorrelatorFactor> f{{Superscript::Anti, 0.9}, {Superscript::Plus, 0.3}};
  EXPECT_LT(std::abs(multi_time_correlator(p, f, rho) - multi_time_correlator(p, f, rho, true)), 1e-9);
}

TEST(Correlator, RejectsUnorderedTimes) {
  Truncation t(4);
  EXPECT_THROW(multi_time_correlator({1.0, 0.0, 1.0, 0.0}, {{Superscript::Anti, 0.1}, {Superscript::Anti, 0.5}},
                                     FockState::vacuum(t)),
               ValidationError);
}

TEST(VerifyReport, JsonShape) {
  std::vector<VerifyCheck> c{make_check("a", 1e-15, 1e-12), make_check("b", 1.0, 1e-12),
                             make_check("c", std::numeric_limits<double>::quiet_NaN(), 1.0)};
  nlohmann::json j = to_json(c);
  ASSERT_TRUE(j.is_array());
  EXPECT_EQ(j.size(), 3u);
  EXPECT_EQ(j[0]["check"], "a");
  EXPECT_TRUE(j[0]["pass"].get<bool>());
  EXPECT_FALSE(j[1]["pass"].get<bool>());
  EXPECT_FALSE(j[2]["pass"].get<bool>());
  for (const auto& e : j) {
    EXPECT_TRUE(e.contains("max_dev"));
    EXPECT_TRUE(e.contains("tolerance"));
  }
}
