#include "paramlyap/dense.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace plyap {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NearSingularPair: return "NearSingularPair";
    case ErrorCode::NotSPD: return "NotSPD";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::ZeroParameter: return "ZeroParameter";
    case ErrorCode::SingularPrecondBlock: return "SingularPrecondBlock";
    case ErrorCode::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case ErrorCode::AccuracyLoss: return "AccuracyLoss";
    case ErrorCode::NotDissipative: return "NotDissipative";
    case ErrorCode::BreakdownDetected: return "BreakdownDetected";
    case ErrorCode::DegenerateProjection: return "DegenerateProjection";
    case ErrorCode::SaturatedSpace: return "SaturatedSpace";
    case ErrorCode::SingularProjectedEquation: return "SingularProjectedEquation";
    case ErrorCode::NonPositiveMass: return "NonPositiveMass";
    case ErrorCode::EvaluationBudgetExceeded: return "EvaluationBudgetExceeded";
    case ErrorCode::IndivisibleSize: return "IndivisibleSize";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EvenIndex: return "EvenIndex";
    case ErrorCode::Unstable: return "Unstable";
  }
  return "Unknown";
}

CMat EigDecomp::solve(const CMat& B) const {
  if (orthogonal) return Q0.transpose() * B;
  return Q0lu.solve(B);
}

CMat EigDecomp::inverse() const {
  if (orthogonal) return Q0.transpose();
  return Q0lu.inverse();
}

namespace {

void check_eig_residual(const CMat& A, const EigDecomp& e, double tol) {
  const double nrm = std::max(A.norm(), 1e-300);
  for (Index i = 0; i < e.size(); ++i) {
    const double r = (A * e.Q0.col(i) - e.lambdas(i) * e.Q0.col(i)).norm();
    if (r > tol * nrm * std::max(1.0, e.Q0.col(i).norm())) {
      throw Error(ErrorCode::NonConvergence,
                  "eigenpair " + std::to_string(i) + " residual " + std::to_string(r / nrm));
    }
  }
}

bool is_symmetric(const Mat& A) {
  return (A - A.transpose()).norm() <= 1e-14 * std::max(A.norm(), 1e-300);
}

}  // namespace

EigDecomp eig_general(const Mat& A, double tol_eig) {
  require(A.rows() == A.cols() && A.rows() > 0, ErrorCode::DimensionMismatch, "eig_general needs a square matrix");
  EigDecomp out;
  if (is_symmetric(A)) {
    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::NonConvergence, "symmetric eigensolver failed");
    out.Q0 = es.eigenvectors().cast<cplx>();
    out.lambdas = es.eigenvalues().cast<cplx>();
    out.orthogonal = true;
  } else {
    Eigen::EigenSolver<Mat> es(A, true);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::NonConvergence, "real eigensolver failed");
    out.Q0 = es.eigenvectors();
    out.lambdas = es.eigenvalues();
    out.Q0lu.compute(out.Q0);
  }
  check_eig_residual(A.cast<cplx>(), out, tol_eig);
  return out;
}

EigDecomp eig_general(const CMat& A, double tol_eig) {
  require(A.rows() == A.cols() && A.rows() > 0, ErrorCode::DimensionMismatch, "eig_general needs a square matrix");
  EigDecomp out;
  Eigen::ComplexEigenSolver<CMat> es(A, true);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NonConvergence, "complex eigensolver failed");
  out.Q0 = es.eigenvectors();
  out.lambdas = es.eigenvalues();
  out.Q0lu.compute(out.Q0);
  check_eig_residual(A, out, tol_eig);
  return out;
}

CMat cauchy_matrix(const CVec& lambdas, double tol_sing) {
  const Index n = lambdas.size();
  const double scale = lambdas.cwiseAbs().maxCoeff();
  CMat L(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      const cplx s = lambdas(i) + lambdas(j);
      if (std::abs(s) < tol_sing * scale || s == cplx(0.0)) {
        throw Error(ErrorCode::NearSingularPair,
                    "lambda_" + std::to_string(i) + " + lambda_" + std::to_string(j) + " ~ 0");
      }
      L(i, j) = 1.0 / s;
    }
  }
  return L;
}

Mat real_part_checked(const CMat& X, double tol, const char* where) {
  const double im = X.imag().norm();
  const double re = X.real().norm();
  if (im > tol * std::max(re, 1e-300) && im > 1e-300) {
    throw Error(ErrorCode::AccuracyLoss,
                std::string(where) + ": imaginary part " + std::to_string(im / std::max(re, 1e-300)) +
                    " relative");
  }
  return X.real();
}

CMat solve_lyap_dense(const EigDecomp& eig, const CMat& Q) {
  const CMat L = cauchy_matrix(eig.lambdas);
  // Q0^{-1} Q Q0^{-T} = Q0^{-1} (Q0^{-1} Q^T)^T
  const CMat Qt = eig.solve(eig.solve(Q.transpose()).transpose());
  const CMat Xt = -L.cwiseProduct(Qt);
  return eig.Q0 * Xt * eig.Q0.transpose();
}

Mat solve_lyap_dense(const Mat& A, const Mat& Q) {
  require(A.rows() == A.cols() && Q.rows() == A.rows() && Q.cols() == A.cols(), ErrorCode::DimensionMismatch,
          "solve_lyap_dense dimensions");
  const EigDecomp eig = eig_general(A);
  const CMat X = solve_lyap_dense(eig, Q.cast<cplx>());
  Mat Xr = real_part_checked(X, 1e-8, "solve_lyap_dense");
  if ((Q - Q.transpose()).norm() <= 1e-14 * Q.norm()) Xr = 0.5 * (Xr + Xr.transpose()).eval();
  return Xr;
}

Mat solve_lyap_schur(const Mat& A, const Mat& Q) {
  const Index n = A.rows();
  require(A.cols() == n && Q.rows() == n && Q.cols() == n, ErrorCode::DimensionMismatch, "solve_lyap_schur dimensions");
  Eigen::RealSchur<Mat> schur(A, true);
  if (schur.info() != Eigen::Success) throw Error(ErrorCode::NonConvergence, "real Schur failed");
  const Mat& T = schur.matrixT();
  const Mat& U = schur.matrixU();

  // 1x1 and 2x2 diagonal blocks of the quasi-triangular factor
  std::vector<Index> start;
  for (Index i = 0; i < n;) {
    start.push_back(i);
    i += (i + 1 < n && T(i + 1, i) != 0.0) ? 2 : 1;
  }
  start.push_back(n);
  const Index nb = static_cast<Index>(start.size()) - 1;

  CVec lam(n);
  for (Index b = 0; b < nb; ++b) {
    const Index i = start[b], sz = start[b + 1] - i;
    if (sz == 1) {
      lam(i) = T(i, i);
    } else {
      const double tr = 0.5 * (T(i, i) + T(i + 1, i + 1));
      const double det = T(i, i) * T(i + 1, i + 1) - T(i, i + 1) * T(i + 1, i);
      const cplx disc = std::sqrt(cplx(tr * tr - det, 0.0));
      lam(i) = tr + disc;
      lam(i + 1) = tr - disc;
    }
  }
  const double lmax = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j)
      if (std::abs(lam(i) + lam(j)) < 1e-12 * lmax)
        throw Error(ErrorCode::NearSingularPair, "eigenvalue pair of A sums to ~0");

  // A = U T U^T:  T Y + Y T^T = -U^T Q U  with  X = U Y U^T
  const Mat C = -(U.transpose() * Q * U);
  Mat Y = Mat::Zero(n, n);
  for (Index bj = nb - 1; bj >= 0; --bj) {
    const Index j0 = start[bj], bsz = start[bj + 1] - j0;
    const Index jt = n - j0 - bsz;
    Mat R = C.middleCols(j0, bsz);
    if (jt > 0) R.noalias() -= Y.rightCols(jt) * T.block(j0, j0 + bsz, bsz, jt).transpose();
    const Mat Tjj = T.block(j0, j0, bsz, bsz);
    for (Index bi = nb - 1; bi >= 0; --bi) {
      const Index i0 = start[bi], asz = start[bi + 1] - i0;
      const Index it = n - i0 - asz;
      Mat rhs = R.middleRows(i0, asz);
      if (it > 0) rhs.noalias() -= T.block(i0, i0 + asz, asz, it) * Y.block(i0 + asz, j0, it, bsz);
      // T_ii Z + Z T_jj^T = rhs  as a Kronecker system of size <= 4
      const Mat Tii = T.block(i0, i0, asz, asz);
      Mat K = Mat::Zero(asz * bsz, asz * bsz);
      for (Index c = 0; c < bsz; ++c) {
        K.block(c * asz, c * asz, asz, asz) += Tii;
        for (Index d = 0; d < bsz; ++d) K.block(c * asz, d * asz, asz, asz).diagonal().array() += Tjj(c, d);
      }
      const Vec z = K.fullPivLu().solve(rhs.reshaped());
      Y.block(i0, j0, asz, bsz) = z.reshaped(asz, bsz);
    }
  }
  Mat X = U * Y * U.transpose();
  if ((Q - Q.transpose()).norm() <= 1e-14 * Q.norm()) X = 0.5 * (X + X.transpose()).eval();
  return X;
}

double lyap_residual(const Mat& A, const Mat& X, const Mat& Q) {
  return (A * X + X * A.transpose() + Q).norm();
}

ModalPair generalized_modal(const Mat& K, const Mat& M) {
  require(K.rows() == K.cols() && M.rows() == M.cols() && K.rows() == M.rows(), ErrorCode::DimensionMismatch,
          "generalized_modal dimensions");
  Eigen::LLT<Mat> llt(M);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotSPD, "mass matrix is not positive definite");
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(K, M, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (ges.info() != Eigen::Success) throw Error(ErrorCode::NonConvergence, "generalized eigensolver failed");
  const Vec lam = ges.eigenvalues();
  if (lam.minCoeff() <= 0.0) throw Error(ErrorCode::NotSPD, "stiffness matrix is not positive definite");
  ModalPair out;
  out.Omega = lam.cwiseSqrt();
  out.Phi = ges.eigenvectors();
  // fix the sign so that the entry of largest magnitude in every column is positive
  for (Index j = 0; j < out.Phi.cols(); ++j) {
    Index imax = 0;
    out.Phi.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.Phi(imax, j) < 0) out.Phi.col(j) *= -1.0;
  }
  return out;
}

LowRankFactors tsvd(const CMat& A, Index p) {
  require(p >= 0 && p <= std::min(A.rows(), A.cols()), ErrorCode::InvalidArgument, "tsvd rank out of range");
  LowRankFactors out;
  if (p == 0) {
    out.left = CMat::Zero(A.rows(), 0);
    out.right = CMat::Zero(A.cols(), 0);
    return out;
  }
  Eigen::BDCSVD<CMat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.left = svd.matrixU().leftCols(p) * svd.singularValues().head(p).asDiagonal();
  out.right = svd.matrixV().leftCols(p).conjugate();
  return out;
}

LUFactors::LUFactors(const Mat& A) : n_(A.rows()), normF_(A.norm()) {
  require(A.rows() == A.cols(), ErrorCode::DimensionMismatch, "lu_factor needs a square matrix");
  lu_.compute(A);
  const auto U = lu_.matrixLU().diagonal().cwiseAbs();
  const double umax = U.maxCoeff();
  if (!(U.minCoeff() > 1e-14 * umax) || umax == 0.0) {
    throw Error(ErrorCode::SingularMatrix, "pivot below threshold in LU factorization");
  }
}

Mat LUFactors::solve(const Mat& B) const {
  require(B.rows() == n_, ErrorCode::DimensionMismatch, "lu_solve right-hand side rows");
  return lu_.solve(B);
}

LUFactors lu_factor(const Mat& A) { return LUFactors(A); }
Mat lu_solve(const LUFactors& lu, const Mat& B) { return lu.solve(B); }

QRDeflation block_qr_deflate(const Mat& B, double tol_defl) {
  const Index n = B.rows();
  const Index c = B.cols();
  const double thresh = tol_defl * B.norm();
  QRDeflation out;
  out.Q.resize(n, c);
  Mat Rfull = Mat::Zero(c, c);
  for (Index j = 0; j < c; ++j) {
    Vec w = B.col(j);
    // two classical Gram-Schmidt passes against the kept columns
    for (int pass = 0; pass < 2; ++pass) {
      if (out.kept == 0) break;
      const Vec h = out.Q.leftCols(out.kept).transpose() * w;
      w.noalias() -= out.Q.leftCols(out.kept) * h;
      Rfull.col(j).head(out.kept) += h;
    }
    const double nw = w.norm();
    if (nw > thresh && nw > 0.0) {
      out.Q.col(out.kept) = w / nw;
      Rfull(out.kept, j) = nw;
      out.kept_cols.push_back(j);
      ++out.kept;
    }
  }
  out.Q.conservativeResize(n, out.kept);
  out.R = Rfull.topRows(out.kept);
  return out;
}

Mat random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat A(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) A(i, j) = nd(rng);
  return A;
}

Mat random_stable(Index n, std::uint64_t seed, double shift) {
  Mat A = random_matrix(n, n, seed) / std::sqrt(static_cast<double>(n));
  Eigen::EigenSolver<Mat> es(A, false);
  const double maxre = es.eigenvalues().real().maxCoeff();
  A.diagonal().array() -= (maxre + shift);
  return A;
}

Mat random_spd(Index n, std::uint64_t seed) {
  const Mat G = random_matrix(n, n, seed);
  return G * G.transpose() / static_cast<double>(n) + Mat::Identity(n, n);
}

}  // namespace plyap
