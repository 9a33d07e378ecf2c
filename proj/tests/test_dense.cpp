#include <gtest/gtest.h>

#include <algorithm>

#include "paramlyap/dense.hpp"

using namespace plyap;

namespace {

std::vector<cplx> sorted(const CVec& v) {
  std::vector<cplx> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end(), [](cplx a, cplx b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
  return out;
}

double eig_residual(const Mat& A, const EigDecomp& e) {
  double worst = 0.0;
  const CMat Ac = A.cast<cplx>();
  for (Index i = 0; i < e.size(); ++i)
    worst = std::max(worst, (Ac * e.Q0.col(i) - e.lambdas(i) * e.Q0.col(i)).norm() / A.norm());
  return worst;
}

}  // namespace

TEST(Eig, DiagonalInput) {
  Mat A = Eigen::Vector2d(-1, -2).asDiagonal();
  const EigDecomp e = eig_general(A);
  const auto l = sorted(e.lambdas);
  EXPECT_NEAR(l[0].real(), -2.0, 1e-14);
  EXPECT_NEAR(l[1].real(), -1.0, 1e-14);
  EXPECT_LE(eig_residual(A, e), 1e-14);
}

TEST(Eig, CompanionMatrix) {
  Mat A(2, 2);
  A << 0, 1, -2, -3;
  const auto l = sorted(eig_general(A).lambdas);
  EXPECT_NEAR(std::abs(l[0] - cplx(-2, 0)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(l[1] - cplx(-1, 0)), 0.0, 1e-12);
}

TEST(Eig, RandomResidualAndInverse) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Mat A = random_matrix(20, 20, seed);
    const EigDecomp e = eig_general(A);
    EXPECT_LE(eig_residual(A, e), 1e-10);
    EXPECT_LE((e.Q0 * e.solve(CMat::Identity(20, 20)) - CMat::Identity(20, 20)).norm(), 1e-10);
  }
}

TEST(Eig, SymmetricInputUsesOrthogonalFactor) {
  const Mat S = random_spd(15, 3);
  const EigDecomp e = eig_general(S);
  EXPECT_TRUE(e.orthogonal);
  EXPECT_LE((e.Q0.adjoint() * e.Q0 - CMat::Identity(15, 15)).norm(), 1e-12);
}

TEST(Cauchy, Examples) {
  CVec l(2);
  l << -1.0, -2.0;
  const CMat L = cauchy_matrix(l);
  EXPECT_EQ(L(0, 0), cplx(-0.5));
  EXPECT_EQ(L(0, 1), cplx(-1.0 / 3.0));
  EXPECT_EQ(L(1, 0), cplx(-1.0 / 3.0));
  EXPECT_EQ(L(1, 1), cplx(-0.25));
  EXPECT_EQ(cauchy_matrix(CVec::Constant(1, -1.0))(0, 0), cplx(-0.5));
  CVec bad(2);
  bad << -1.0, 1.0;
  try {
    cauchy_matrix(bad);
    FAIL() << "expected NearSingularPair";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NearSingularPair);
  }
}

TEST(Cauchy, ReproducesDiagonalizedSolution) {
  const Mat A = random_stable(12, 4);
  const Mat Q = random_spd(12, 5);
  const EigDecomp e = eig_general(A);
  const CMat Qt = e.solve(e.solve(Q.cast<cplx>()).transpose()).transpose();
  const CMat Yt = -cauchy_matrix(e.lambdas).cwiseProduct(Qt);
  const Mat X = (e.Q0 * Yt * e.Q0.transpose()).real();
  EXPECT_LE((X - solve_lyap_schur(A, Q)).norm(), 1e-10 * X.norm());
}

TEST(LyapDense, Examples) {
  const Mat X = solve_lyap_dense(-Mat::Identity(2, 2), Mat::Identity(2, 2));
  EXPECT_LE((X - 0.5 * Mat::Identity(2, 2)).norm(), 1e-15);
  Mat A = Eigen::Vector2d(-1, -2).asDiagonal();
  Mat expect(2, 2);
  expect << 0.5, 1.0 / 3.0, 1.0 / 3.0, 0.25;
  EXPECT_LE((solve_lyap_dense(A, Mat::Ones(2, 2)) - expect).norm(), 1e-15);
  EXPECT_LE((solve_lyap_schur(A, Mat::Ones(2, 2)) - expect).norm(), 1e-15);
}

TEST(LyapDense, RandomResiduals) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Index n = 2 + static_cast<Index>(seed % 49);
    const Mat A = random_stable(n, 100 + seed, 0.3);
    const Mat Q = random_spd(n, 200 + seed);
    const Mat X = solve_lyap_dense(A, Q);
    EXPECT_LE(lyap_residual(A, X, Q), 1e-10 * Q.norm()) << "n=" << n;
    EXPECT_LE((X - X.transpose()).norm(), 1e-14 * X.norm());
    const Mat Xs = solve_lyap_schur(A, Q);
    EXPECT_LE(lyap_residual(A, Xs, Q), 1e-10 * Q.norm()) << "n=" << n;
  }
}

TEST(LyapSchur, NonSymmetricRightHandSide) {
  const Mat A = random_stable(25, 8, 0.5);
  const Mat Q = random_matrix(25, 25, 9);
  EXPECT_LE(lyap_residual(A, solve_lyap_schur(A, Q), Q), 1e-10 * Q.norm());
}

TEST(LyapSchur, SingularPairRejected) {
  Mat A = Eigen::Vector2d(-1, 1).asDiagonal();
  EXPECT_THROW(solve_lyap_schur(A, Mat::Identity(2, 2)), Error);
}

TEST(Modal, Examples) {
  ModalPair p = generalized_modal(Eigen::Vector2d(4, 9).asDiagonal(), Mat::Identity(2, 2));
  EXPECT_NEAR(p.Omega(0), 2.0, 1e-14);
  EXPECT_NEAR(p.Omega(1), 3.0, 1e-14);
  EXPECT_LE((p.Phi - Mat::Identity(2, 2)).norm(), 1e-14);
  p = generalized_modal(Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 4.0));
  EXPECT_NEAR(p.Omega(0), 0.5, 1e-15);
  EXPECT_NEAR(p.Phi(0, 0), 0.5, 1e-15);
}

TEST(Modal, RandomInvariants) {
  const Mat M = random_spd(10, 11), K = random_spd(10, 12);
  const ModalPair p = generalized_modal(K, M);
  EXPECT_LE((p.Phi.transpose() * M * p.Phi - Mat::Identity(10, 10)).norm(), 1e-10);
  const Mat W2 = p.Omega.cwiseAbs2().asDiagonal();
  EXPECT_LE((p.Phi.transpose() * K * p.Phi - W2).norm(), 1e-10 * K.norm());
  for (Index i = 1; i < 10; ++i) EXPECT_LE(p.Omega(i - 1), p.Omega(i));
  EXPECT_THROW(generalized_modal(K, -M), Error);
}

TEST(Tsvd, Examples) {
  const CMat A = Mat(Eigen::Vector3d(3, 2, 1).asDiagonal()).cast<cplx>();
  LowRankFactors f = tsvd(A, 1);
  CMat expect = CMat::Zero(3, 3);
  expect(0, 0) = 3.0;
  EXPECT_LE((f.left * f.right.transpose() - expect).norm(), 1e-14);
  const CMat R2 = (random_matrix(8, 2, 1) * random_matrix(2, 8, 2)).cast<cplx>();
  f = tsvd(R2, 2);
  EXPECT_LE((R2 - f.left * f.right.transpose()).norm(), 1e-12 * R2.norm());
}

TEST(Tsvd, TailNorm) {
  const CMat A = random_matrix(40, 40, 21).cast<cplx>();
  const LowRankFactors f = tsvd(A, 5);
  const Vec s = Eigen::JacobiSVD<CMat>(A).singularValues();
  const double tail = s.tail(35).norm();
  EXPECT_NEAR((A - f.left * f.right.transpose()).norm(), tail, 1e-10 * tail);
}

TEST(LU, Examples) {
  const Mat B = random_matrix(4, 3, 5);
  EXPECT_EQ(lu_solve(lu_factor(Mat::Identity(4, 4)), B), B);
  const Mat X = lu_solve(lu_factor(Eigen::Vector2d(2, 4).asDiagonal()), Mat::Identity(2, 2));
  EXPECT_DOUBLE_EQ(X(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(X(1, 1), 0.25);
  const Mat A = random_matrix(50, 50, 6);
  const Mat R = random_matrix(50, 6, 7);
  const Mat Y = lu_solve(lu_factor(A), R);
  EXPECT_LE((A * Y - R).norm(), 1e-12 * A.norm() * Y.norm());
  EXPECT_THROW(lu_factor(Mat::Zero(3, 3)), Error);
}

TEST(BlockQR, Examples) {
  const Mat O = Eigen::HouseholderQR<Mat>(random_matrix(30, 4, 3)).householderQ() * Mat::Identity(30, 4);
  QRDeflation q = block_qr_deflate(O);
  EXPECT_EQ(q.kept, 4);
  for (Index j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(q.Q.col(j).dot(O.col(j))), 1.0, 1e-12);

  Mat B(30, 2);
  B.col(0) = random_matrix(30, 1, 4);
  B.col(1) = 2.0 * B.col(0);
  EXPECT_EQ(block_qr_deflate(B).kept, 1);

  const Mat C = random_matrix(100, 6, 5);
  q = block_qr_deflate(C);
  EXPECT_EQ(q.kept, 6);
  EXPECT_LE((q.Q.transpose() * q.Q - Mat::Identity(6, 6)).norm(), 1e-12);
  EXPECT_LE((q.Q * q.R - C).norm(), 1e-12 * C.norm());
}
