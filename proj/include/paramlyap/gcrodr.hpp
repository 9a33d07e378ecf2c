#pragma once

#include <functional>
#include <vector>

#include "paramlyap/types.hpp"

namespace plyap {

// y = op(x); must be safe to call repeatedly
using LinearOp = std::function<void(const CVec& x, CVec& y)>;

// Deflation pair carried between systems: C = A_prev * U, C^H C = I.
// U lives in the right-preconditioned variable.
struct RecycleSpace {
  CMat U;
  CMat C;
  Index size() const { return U.cols(); }
  bool empty() const { return U.cols() == 0; }
  void clear() {
    U.resize(0, 0);
    C.resize(0, 0);
  }
};

enum class SolveStatus { Converged, MaxIterationsExceeded, Breakdown };

struct SolveStats {
  int iterations = 0;
  int cycles = 0;
  double final_relres = 0.0;
  SolveStatus status = SolveStatus::Converged;
  bool degenerate_projection = false;  // harmonic Ritz fell back to Ritz vectors
  std::vector<double> residual_history;
};

struct GcrodrOptions {
  double tol = 1e-10;
  int maxit = 300;
  int m_restart = 80;
  int s = 10;
};

struct GcrodrResult {
  CVec x;
  RecycleSpace recycle;
  SolveStats stats;
};

// Right-preconditioned GCRO-DR.  precond may be empty (no preconditioning),
// x0 and recycle may be null.  With s = 0 and no recycle input this is
// restarted GMRES(m_restart).
GcrodrResult gcrodr_solve(const LinearOp& A, const LinearOp& precond, const CVec& b, const CVec* x0,
                          const GcrodrOptions& opt, const RecycleSpace* recycle);

// Harmonic Ritz extraction from a projected pair:  A * What = Vhat * G  with
// Vhat orthonormal.  Returns the coefficient matrix P (cols(G) x s) of the s
// harmonic Ritz vectors with smallest |theta|, and optionally the values.
// Falls back to Ritz vectors when the small pencil is singular (flag set).
CMat harmonic_ritz_coefficients(const CMat& G, const CMat& VhatH_What, Index s, CVec* theta, bool* degenerate);

// Convenience wrapper for a full cycle's data: given A W = Vhat G, build the
// new recycle pair (U = W P R^{-1}, C = Vhat Q).
RecycleSpace harmonic_ritz_extract(const CMat& W, const CMat& Vhat, const CMat& G, Index s,
                                   CVec* theta = nullptr, bool* degenerate = nullptr);

}  // namespace plyap
