#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "paramlyap/dense.hpp"
#include "paramlyap/gcrodr.hpp"

namespace plyap {

// A(v) X + X A(v)^T = -Q   with   A(v) = A0 - Bl diag(v) Br^T
struct ParamLyapProblem {
  Mat A0;
  Mat Bl;
  Mat Br;
  Mat Q;
  Mat X0;  // optional closed-form seed solution; computed when empty

  Index n() const { return A0.rows(); }
  Index k() const { return Bl.cols(); }
  void validate() const;
  Mat A(const Vec& v) const;
};

void check_parameters(const Vec& v, Index k);

struct SmwSettings {
  Index pbar = 50;
  Index dense_offdiag_limit = 1500;  // n*k above which the TSVD is randomized
  bool keep_Z = true;
  std::uint64_t seed = 7;
};

// trace(E X(v)) = f0 + sum_i v_i fz_i + <W1, KB1> + <W2, KB2>
struct TraceFunctional {
  double f0 = 0.0;
  Vec fz;
  CMat KB1;  // n x k
  CMat KB2;  // k x n
};

// Everything of the parameter-free stage.  The core handles the general
// right-hand side P (I2 (x) D) P^T; a problem with a seed solution X0 uses
// P = [X0 Br, Bl].
struct SmwOffline {
  Index n = 0;
  Index k = 0;
  Mat A0, Bl, Br, P;
  Mat X0;  // empty for projected (pure X_delta) systems
  Mat Q;   // empty for projected systems

  EigDecomp eig;
  CMat L;      // Cauchy matrix
  CMat beta;   // Q0^{-1} Bl
  CMat gamma;  // Q0^T Br
  std::vector<CMat> Ztilde;
  std::vector<Mat> Z;  // only when keep_Z

  // cw[t*k+p] = L (gamma_t o beta_p).  Entry s of this vector is both the
  // s-th diagonal entry of block (t,p) of the (1,1)-block and entry (t,p) of
  // the s-th diagonal block of the (2,2)-block.
  std::vector<CVec> cw;

  Index pbar = 0;
  LowRankFactors pc12;  // ~ N1^T L0^{-1} M2
  LowRankFactors pc21;  // ~ N2^T L0^{-1} M1

  // ||A(v)||_F^2 = normA0F^2 + v^T norm_had v - 2 a^T v
  Vec a;  // diag(Bl^T A0 Br)
  double normA0F = 0.0;
  Mat norm_had;  // (Bl^T Bl) o (Br^T Br)

  TraceFunctional trace_I;

  Index system_size() const { return 2 * n * k; }
  const CVec& weights(Index t, Index p) const { return cw[static_cast<size_t>(t * k + p)]; }
};

SmwOffline smw_offline(const ParamLyapProblem& problem, const SmwSettings& settings = {});
SmwOffline smw_offline_core(const Mat& A0, const Mat& Bl, const Mat& Br, const Mat& P, const SmwSettings& settings,
                            const Mat* X0 = nullptr, const Mat* Q = nullptr);

// off-diagonal blocks of N^T L0^{-1} M filled from the triple-product formulas
CMat smw_block12_dense(const SmwOffline& off);
CMat smw_block21_dense(const SmwOffline& off);

// matrix-free blocks and their plain transposes (vec conventions: W1 is n x k,
// W2 is k x n, both column-major)
CVec smw_block12_apply(const SmwOffline& off, const CVec& w2);
CVec smw_block21_apply(const SmwOffline& off, const CVec& w1);
CVec smw_block12_apply_transpose(const SmwOffline& off, const CVec& u1);
CVec smw_block21_apply_transpose(const SmwOffline& off, const CVec& u2);

CVec smw_rhs(const SmwOffline& off, const Vec& v);
CVec smw_apply_system(const SmwOffline& off, const Vec& v, const CVec& x);
// same operator through the stored diagonal weights and dense off-diagonal blocks
CVec smw_apply_system_blocks(const SmwOffline& off, const Vec& v, const CVec& x, const CMat& b12, const CMat& b21);

class SmwPreconditioner {
 public:
  SmwPreconditioner(const SmwOffline& off, const Vec& v);
  void apply(const CVec& x, CVec& y) const;
  CVec apply(const CVec& x) const {
    CVec y;
    apply(x, y);
    return y;
  }
  // dense matrix of the diagonal blocks (for checks on small problems)
  CMat diag_block_dense(int which) const;

 private:
  void solve_A11(const CVec& x, CVec& y) const;
  void solve_A22(const CVec& x, CVec& y) const;
  void solve_S(const CVec& x, CVec& y) const;

  const SmwOffline* off_;
  Vec vinv_;
  std::vector<Eigen::PartialPivLU<CMat>> blocks_;
  std::vector<CMat> block_mats_;
  Index p_ = 0;
  CMat A11invN1_;
  CMat Kp_;
  Eigen::PartialPivLU<CMat> cap_;
};

CVec smw_apply_precond(const SmwOffline& off, const Vec& v, const CVec& x);

struct SmwSolveOptions {
  GcrodrOptions gcrodr;
  bool precondition = true;
};

struct SMWResult {
  CVec w;
  CMat W1;  // n x k
  CMat W2;  // k x n
  SolveStats stats;
};

SMWResult smw_solve(const SmwOffline& off, const Vec& v, RecycleSpace* recycle, const SmwSolveOptions& opt = {});

// X(v) = X0 + sum v_i Z_i + Q0 (L o (W1 beta^T + beta W2)) Q0^T
// (without X0 for projected systems).  Verifies the residual when asked.
Mat smw_assemble_X(const SmwOffline& off, const Vec& v, const SMWResult& res, bool verify = true,
                   double tol_total = 1e-8);

TraceFunctional make_trace_functional(const SmwOffline& off, const Mat* E);
double smw_trace(const SmwOffline& off, const Vec& v, const SMWResult& res, const TraceFunctional& tf);
double smw_trace(const SmwOffline& off, const Vec& v, const SMWResult& res, const Mat* E = nullptr);

// bound on ||E(v)||_F for errors E1 (n x k) in W1 and E2 (k x n) in W2
double smw_error_bound(const SmwOffline& off, const CMat& E1, const CMat& E2);
// the error matrix itself, Q0 (L o (E1 beta^T + beta E2)) Q0^T
CMat smw_error_matrix(const SmwOffline& off, const CMat& E1, const CMat& E2);

}  // namespace plyap
