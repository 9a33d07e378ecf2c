#include <gtest/gtest.h>

#include "paramlyap/ek.hpp"

using namespace plyap;

namespace {

struct Case {
  ParamLyapProblem p;
  Mat X0, P;
};

Case make_case(Index n, Index k, std::uint64_t seed) {
  Case c;
  c.p.A0 = random_stable(n, seed, 1.0);
  c.p.Bl = random_matrix(n, k, seed + 1) / std::sqrt(double(n));
  c.p.Br = random_matrix(n, k, seed + 2) / std::sqrt(double(n));
  const Mat C = random_matrix(n, 2, seed + 3);
  c.p.Q = C * C.transpose();
  c.X0 = solve_lyap_schur(c.p.A0, c.p.Q);
  c.P.resize(n, 2 * k);
  c.P << c.X0 * c.p.Br, c.p.Bl;
  return c;
}

Mat rhs_of(const Mat& P, const Vec& v) {
  const Index k = v.size();
  Mat ID = Mat::Zero(2 * k, 2 * k);
  ID.topRightCorner(k, k) = v.asDiagonal();
  ID.bottomLeftCorner(k, k) = v.asDiagonal();
  return P * ID * P.transpose();
}

Mat dense_delta(const Case& c, const Vec& v) { return solve_lyap_schur(c.p.A(v), -rhs_of(c.P, v)); }

double arnoldi_residual(const Mat& A0, const EKBasis& b) {
  const Mat V = b.V();
  Mat R = A0 * V - V * b.T();
  if (!b.saturated()) {
    const Index d = b.active_dim();
    R -= b.V_all().middleCols(d, b.dim_total() - d) * b.Tunder();
  }
  return R.norm();
}

EKBasis fresh_basis(const Case& c, LUFactors& lu) {
  lu = LUFactors(c.p.A0);
  EKBasis b = ek_init(c.p.A0, lu, c.P);
  b.set_low_rank(c.p.Bl, c.p.Br);
  return b;
}

}  // namespace

TEST(EkInit, Examples) {
  // A0 = I: [P, P] deflates to rank(P)
  const Mat P = random_matrix(10, 3, 1);
  LUFactors lu(Mat::Identity(10, 10));
  EKBasis b = ek_init(Mat::Identity(10, 10), lu, P);
  EXPECT_EQ(b.dim_total(), 3);

  // e1 is invariant for diag(-1,-2)
  Mat A = Eigen::Vector2d(-1, -2).asDiagonal();
  Mat e1 = Mat::Zero(2, 1);
  e1(0, 0) = 1.0;
  LUFactors lu2(A);
  EKBasis b2 = ek_init(A, lu2, e1);
  EXPECT_EQ(b2.dim_total(), 1);
  EXPECT_THROW(ek_expand(b2), Error);
}

TEST(EkInit, RandomInvariants) {
  const Case c = make_case(80, 2, 3);
  LUFactors lu;
  EKBasis b = fresh_basis(c, lu);
  EXPECT_LE(b.dim_total(), 8);
  EXPECT_LE((b.V_all().transpose() * b.V_all() - Mat::Identity(b.dim_total(), b.dim_total())).norm(), 1e-10);
  const Mat V1 = b.V_all().leftCols(b.G().rows());
  EXPECT_LE((V1 * b.G() - c.P).norm(), 1e-10 * c.P.norm());
}

TEST(EkExpand, OrthonormalityArnoldiAndLowRankFactors) {
  const Case c = make_case(150, 2, 5);
  LUFactors lu;
  EKBasis b = fresh_basis(c, lu);
  for (int step = 0; step < 8; ++step) {
    ek_expand(b);
    const Mat V = b.V_all();
    EXPECT_LE((V.transpose() * V - Mat::Identity(V.cols(), V.cols())).norm(), 1e-10);
    EXPECT_LE(arnoldi_residual(c.p.A0, b), 1e-8 * c.p.A0.norm()) << "m=" << b.m();
    EXPECT_LE((b.T() - b.T_direct()).norm(), 1e-10 * c.p.A0.norm());
    EXPECT_LE((b.V() * b.Blm() - c.p.Bl).norm(), 1e-10 * c.p.Bl.norm());
    EXPECT_LE((b.V() * b.Brm() - b.V() * b.V().transpose() * c.p.Br).norm(), 1e-12);
  }
}

TEST(EkExpand, NestednessOfParametrizedPowers) {
  const Case c = make_case(120, 2, 7);
  LUFactors lu;
  EKBasis b = fresh_basis(c, lu);
  for (int i = 0; i < 5; ++i) ek_expand(b);
  const int m = b.m();
  const Vec v = Eigen::Vector2d(0.7, -1.3);
  const Mat Av = c.p.A(v);
  const Eigen::PartialPivLU<Mat> luv(Av);
  const Mat V = b.V(), Vall = b.V_all();
  Mat Fw = c.P, Bw = c.P;
  for (int j = 1; j <= m; ++j) {
    Fw = Av * Fw;
    Bw = luv.solve(Bw);
    // the first m blocks hold A^j P up to j = m - 1 and A^-j P up to j = m
    if (j <= m - 1) EXPECT_LE((Fw - V * (V.transpose() * Fw)).norm(), 1e-8 * Fw.norm()) << j;
    EXPECT_LE((Bw - V * (V.transpose() * Bw)).norm(), 1e-8 * Bw.norm()) << j;
    EXPECT_LE((Fw - Vall * (Vall.transpose() * Fw)).norm(), 1e-8 * Fw.norm()) << j;
  }
}

TEST(EkExpand, FullDimensionIsExact) {
  const Case c = make_case(40, 1, 9);
  LUFactors lu;
  EKBasis b = fresh_basis(c, lu);
  while (!b.saturated() && b.dim_total() < 40) b.expand();
  while (!b.saturated()) b.expand();
  ASSERT_EQ(b.active_dim(), 40);
  // T is similar to A0
  const Mat V = b.V();
  EXPECT_LE((V * b.T() * V.transpose() - c.p.A0).norm(), 1e-10 * c.p.A0.norm());
  const Vec v = Vec::Constant(1, 0.9);
  const Mat Y = ek_solve_projected(b, v);
  const Mat Xd = dense_delta(c, v);
  EXPECT_LE((V * Y * V.transpose() - Xd).norm(), 1e-8 * Xd.norm());
  const Mat Ys = ek_solve_projected(b, v, ProjectedSolver::Smw);
  EXPECT_LE((V * Ys * V.transpose() - Xd).norm(), 1e-8 * Xd.norm());
  const BackwardErrorCache cache = BackwardErrorCache::from(c.p.A0, c.p.Bl, c.p.Br);
  EXPECT_LE(ek_backward_error(b, Y, v, cache), 1e-12);
}

TEST(EkSolveProjected, RankOneClosedForm) {
  Case c;
  c.p.A0 = Eigen::Vector2d(-1, -2).asDiagonal();
  c.p.Bl = Mat::Zero(2, 1);
  c.p.Bl(0, 0) = 1.0;
  c.p.Br = c.p.Bl;
  c.p.Q = Mat::Identity(2, 2);
  c.X0 = Eigen::Vector2d(0.5, 0.25).asDiagonal();
  c.P.resize(2, 2);
  c.P << c.X0 * c.p.Br, c.p.Bl;
  LUFactors lu;
  EKBasis b = fresh_basis(c, lu);
  b.expand();
  const Mat Y = ek_solve_projected(b, Vec::Ones(1));
  const Mat X = b.V() * Y * b.V().transpose();
  Mat expect = Mat::Zero(2, 2);
  expect(0, 0) = -0.25;
  EXPECT_LE((X - expect).norm(), 1e-14);
}

TEST(EkSolveProjected, SymmetricAndLinearForSmallParameters) {
  const Case c = make_case(60, 2, 11);
  LUFactors lu;
  EKBasis b = fresh_basis(c, lu);
  for (int i = 0; i < 3; ++i) b.expand();
  const Vec v = Vec::Constant(2, 1e-10);
  const Mat Y = ek_solve_projected(b, v);
  EXPECT_LE((Y - Y.transpose()).norm(), 1e-14 * Y.norm());
  const Mat Y2 = ek_solve_projected(b, 2.0 * v);
  EXPECT_NEAR(Y2.norm() / Y.norm(), 2.0, 1e-6);
  EXPECT_LE(Y.norm(), 1e-6);
  // projected residual
  const Mat Am = b.T() - b.Blm() * v.asDiagonal() * b.Brm().transpose();
  const Mat R = Am * Y + Y * Am.transpose() - rhs_of(b.Pm(), v);
  EXPECT_LE(R.norm(), 1e-10 * rhs_of(b.Pm(), v).norm());
}

TEST(EkBackwardError, MatchesDefinitionalRatio) {
  using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const Index n = 60 + 20 * static_cast<Index>(seed % 5), k = 1 + static_cast<Index>(seed % 3);
    const Case c = make_case(n, k, seed);
    LUFactors lu;
    EKBasis b = fresh_basis(c, lu);
    for (int i = 0; i < 1 + int(seed % 2); ++i) b.expand();
    ASSERT_LT(b.dim_total(), n);
    const Vec v = random_matrix(k, 1, seed).col(0) + Vec::Constant(k, 0.1);
    const Mat Y = ek_solve_projected(b, v);
    // definitional ratio in extended precision so that its own rounding stays
    // far below the compared tolerance
    const LMat V = b.V().cast<long double>();
    const LMat X = V * Y.cast<long double>() * V.transpose();
    const LMat Av = c.p.A(v).cast<long double>();
    const LMat rhs = rhs_of(c.P, v).cast<long double>();
    const long double num = (Av * X + X * Av.transpose() - rhs).norm();
    const double def = static_cast<double>(num / (2 * Av.norm() * X.norm() + rhs.norm()));
    const BackwardErrorCache cache = BackwardErrorCache::from(c.p.A0, c.p.Bl, c.p.Br);
    EXPECT_NEAR(ek_backward_error(b, Y, v, cache), def, 1e-10 * def) << seed;
    const Mat Ad = c.p.A(v);
    EXPECT_NEAR(cache.normAv_sq(v), Ad.squaredNorm(), 1e-10 * Ad.squaredNorm());
    EXPECT_EQ(ek_backward_error(b, Mat::Zero(Y.rows(), Y.cols()), v, cache), 0.0);
  }
}

TEST(EkTrace, Identities) {
  const Case c = make_case(50, 1, 31);
  LUFactors lu;
  EKBasis b = fresh_basis(c, lu);
  b.expand();
  b.expand();
  const Index d = b.active_dim();
  EXPECT_DOUBLE_EQ(ek_trace(b, Mat::Identity(d, d)), double(d));
  const Mat Y = ek_solve_projected(b, Vec::Constant(1, 0.5));
  const Mat I = Mat::Identity(50, 50);
  EXPECT_NEAR(ek_trace(b, Y, &I), ek_trace(b, Y), 1e-14 * std::abs(ek_trace(b, Y)) + 1e-300);
  const Mat X = b.V() * Y * b.V().transpose();
  EXPECT_NEAR(X.trace(), Y.trace(), 1e-13 * std::abs(Y.trace()));
  const Mat E = random_matrix(50, 50, 32);
  EXPECT_NEAR(ek_trace(b, Y, &E), (E * X).trace(), 1e-12 * E.norm() * X.norm());
}

TEST(EkSweep, AgreesWithDenseAndIsDeterministic) {
  const Case c = make_case(90, 2, 41);
  const Vec v = Eigen::Vector2d(0.8, 1.1);
  const SweepReport r1 = ek_sweep(c.p, {v}, 1e-10, 60);
  ASSERT_EQ(r1.records.size(), 1u);
  EXPECT_TRUE(r1.records[0].converged);
  const double exact = solve_lyap_schur(c.p.A(v), c.p.Q).trace();
  EXPECT_NEAR(r1.records[0].f_value, exact, 1e-7 * std::abs(exact));

  const SweepReport r2 = ek_sweep(c.p, {v, v}, 1e-10, 60);
  ASSERT_EQ(r2.records.size(), 2u);
  EXPECT_NEAR(r2.records[0].f_value, r2.records[1].f_value, 1e-9 * std::abs(r2.records[0].f_value));
  EXPECT_EQ(r2.records[1].expansions, 0);
  EXPECT_EQ(r2.records[0].basis_dim, r2.records[1].basis_dim);
  for (const auto& rec : r2.records) EXPECT_LE(rec.backward_error, 1e-10);
}

TEST(EkSweep, UnconvergedAfterBudget) {
  const Case c = make_case(200, 2, 43);
  const SweepReport r = ek_sweep(c.p, {Eigen::Vector2d(1.0, 1.0)}, 1e-15, 1);
  EXPECT_EQ(r.unconverged(), 1);
  EXPECT_EQ(r.records[0].status, "unconverged");
}

TEST(EkSolver, GeneralWeightMatrix) {
  const Case c = make_case(70, 2, 45);
  const Mat E = random_spd(70, 46);
  EkOptions o;
  o.eps = 1e-10;
  EkSolver s(c.p.A0, c.p.Bl, c.p.Br, c.P, o, &E);
  const Vec v = Eigen::Vector2d(0.6, 0.4);
  const EkEvaluation ev = s.evaluate(v);
  ASSERT_TRUE(ev.converged);
  const Mat Xd = dense_delta(c, v);
  EXPECT_NEAR(ev.f_delta, (E * Xd).trace(), 1e-7 * E.norm() * Xd.norm());
}
