#pragma once

#include <cstdint>
#include <vector>

#include "paramlyap/types.hpp"

namespace plyap {

// A = Q0 * diag(lambdas) * Q0^{-1}.  When the input is real symmetric the
// eigenvectors are real orthonormal and Q0^{-1} = Q0^T is used directly.
struct EigDecomp {
  CMat Q0;
  CVec lambdas;
  Eigen::PartialPivLU<CMat> Q0lu;
  bool orthogonal = false;

  Index size() const { return lambdas.size(); }
  CMat solve(const CMat& B) const;  // Q0^{-1} B
  CMat inverse() const;
};

EigDecomp eig_general(const Mat& A, double tol_eig = 1e-10);
EigDecomp eig_general(const CMat& A, double tol_eig = 1e-10);

// L(i,j) = 1 / (lambda_i + lambda_j)
CMat cauchy_matrix(const CVec& lambdas, double tol_sing = 1e-12);

// A X + X A^T = -Q through the eigendecomposition of A.
Mat solve_lyap_dense(const Mat& A, const Mat& Q);
CMat solve_lyap_dense(const EigDecomp& eig, const CMat& Q);

// Same equation through a real Schur form (Bartels-Stewart); used as the
// reference solver since it is backward stable for non-normal A.
Mat solve_lyap_schur(const Mat& A, const Mat& Q);

double lyap_residual(const Mat& A, const Mat& X, const Mat& Q);

// imaginary part must be below tol * ||X||_F, otherwise AccuracyLoss
Mat real_part_checked(const CMat& X, double tol, const char* where);

struct ModalPair {
  Vec Omega;
  Mat Phi;
};

ModalPair generalized_modal(const Mat& K, const Mat& M);

// A ~ left * right^T (plain transpose)
struct LowRankFactors {
  CMat left;
  CMat right;
  Index rank() const { return left.cols(); }
};

LowRankFactors tsvd(const CMat& A, Index p);

class LUFactors {
 public:
  LUFactors() = default;
  explicit LUFactors(const Mat& A);
  Mat solve(const Mat& B) const;
  Index size() const { return n_; }
  double normF() const { return normF_; }

 private:
  Eigen::PartialPivLU<Mat> lu_;
  Index n_ = 0;
  double normF_ = 0.0;
};

LUFactors lu_factor(const Mat& A);
Mat lu_solve(const LUFactors& lu, const Mat& B);

struct QRDeflation {
  Mat Q;                      // orthonormal columns, one per kept column of B
  Mat R;                      // kept x cols(B), Q * R reproduces B
  std::vector<Index> kept_cols;
  Index kept = 0;
};

QRDeflation block_qr_deflate(const Mat& B, double tol_defl = 1e-12);

// random helpers shared by tests, self checks and the synthetic CLI problem
Mat random_matrix(Index rows, Index cols, std::uint64_t seed);
Mat random_stable(Index n, std::uint64_t seed, double shift = 1.0);
Mat random_spd(Index n, std::uint64_t seed);

}  // namespace plyap
