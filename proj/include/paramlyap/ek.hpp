#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "paramlyap/smw.hpp"

namespace plyap {

// Orthonormal basis of EK_m(A0, P) = span[P, A0^{-1}P, A0 P, A0^{-2}P, ...].
// Blocks are appended one at a time; a block holds a "direct" part (from A0
// times the previous direct part) followed by an "inverse" part (from A0^{-1}
// times the previous inverse part).  Projections onto the first m blocks use
// block m+1 for the Arnoldi remainder, so m = blocks - 1 until the space
// saturates.
class EKBasis {
 public:
  EKBasis(const Mat& A0, std::shared_ptr<const LUFactors> lu, const Mat& P, double tol_defl = 1e-12);

  // append the next block; false when everything deflated (A0-invariant space)
  bool expand();

  Index n() const { return V_.rows(); }
  int blocks() const { return static_cast<int>(starts_.size()) - 1; }
  int m() const { return saturated_ ? blocks() : blocks() - 1; }
  bool saturated() const { return saturated_; }
  Index dim_total() const { return V_.cols(); }
  Index dim(int m) const { return starts_[static_cast<size_t>(m)]; }
  Index active_dim() const { return dim(m()); }

  Mat V() const { return V_.leftCols(active_dim()); }
  const Mat& V_all() const { return V_; }
  Mat T() const;       // V_m^T A0 V_m
  Mat Tunder() const;  // (block m+1)^T A0 V_m, zero rows when saturated
  Mat T_direct() const;
  Mat Blm() const { return Bl_.topRows(active_dim()); }
  Mat Brm() const { return Br_.topRows(active_dim()); }
  const Mat& G() const { return G_; }
  Mat Pm() const;  // [G; 0] with active_dim rows
  const Mat& P() const { return P_; }

  void set_low_rank(const Mat& Bl, const Mat& Br);

 private:
  void append(const Mat& Qnew, Index ndirect);

  Mat A0_;
  std::shared_ptr<const LUFactors> lu_;
  Mat P_;
  double tol_defl_;
  Mat V_, AV_, T_;
  Mat Bl_, Br_;  // projected, V^T Bl and V^T Br over all columns
  Mat Blfull_, Brfull_;
  Mat G_;
  std::vector<Index> starts_;
  std::vector<Index> ndirect_;
  bool saturated_ = false;
};

EKBasis ek_init(const Mat& A0, const LUFactors& A0lu, const Mat& P, double tol_defl = 1e-12);
// throws SaturatedSpace when the whole new block deflates
void ek_expand(EKBasis& basis);

struct BackwardErrorCache {
  double normA0F = 0.0;
  Mat norm_had;  // (Bl^T Bl) o (Br^T Br)
  Vec a;         // diag(Bl^T A0 Br)

  static BackwardErrorCache from(const Mat& A0, const Mat& Bl, const Mat& Br);
  double normAv_sq(const Vec& v) const { return normA0F * normA0F + v.dot(norm_had * v) - 2.0 * a.dot(v); }
};

enum class ProjectedSolver { Smw, Dense };

struct EkOptions {
  double eps = 1e-8;
  int m_max = 120;
  double tol_defl = 1e-12;
  ProjectedSolver solver = ProjectedSolver::Smw;
  SmwSettings smw;
  SmwSolveOptions solve;
};

// Y of  (T - Blm D Brm^T) Y + Y (.)^T = Pm (I2 (x) D) Pm^T
Mat ek_solve_projected(const EKBasis& basis, const Vec& v, ProjectedSolver solver = ProjectedSolver::Dense,
                       const EkOptions& opt = {});
double ek_backward_error(const EKBasis& basis, const Mat& Y, const Vec& v, const BackwardErrorCache& cache);
double ek_trace(const EKBasis& basis, const Mat& Y, const Mat* E = nullptr);

struct EkEvaluation {
  Vec v;
  double f_delta = 0.0;  // trace(E X_delta)
  double backward_error = 0.0;
  Index basis_dim = 0;
  int m = 0;
  int expansions = 0;
  int inner_iters = 0;
  bool converged = false;
  bool dense_fallback = false;
  std::string note;
};

// Stateful driver: one shared basis for a whole parameter sequence.
class EkSolver {
 public:
  EkSolver(const Mat& A0, const Mat& Bl, const Mat& Br, const Mat& P, const EkOptions& opt, const Mat* E = nullptr);

  EkEvaluation evaluate(const Vec& v);
  const EKBasis& basis() const { return *basis_; }
  int total_expansions() const { return total_expansions_; }
  Mat last_Y() const { return last_Y_; }

 private:
  struct Projected {
    int m = -1;
    std::unique_ptr<SmwOffline> off;
    RecycleSpace recycle;
  };
  bool grow();
  void prepare_projection();
  Mat solve_current(const Vec& v, int& iters, bool growing);
  double weighted_trace(const Mat& Y);  // trace(E V Y V^T) with V^T E V cached per m

  Mat A0_, Bl_, Br_, P_;
  EkOptions opt_;
  bool has_E_ = false;
  Mat E_;
  std::shared_ptr<const LUFactors> lu_;
  std::unique_ptr<EKBasis> basis_;
  BackwardErrorCache cache_;
  Projected proj_;
  Mat vev_;
  int vev_m_ = -1;
  int total_expansions_ = 0;
  Mat last_Y_;
};

struct SweepRecord {
  Vec v;
  double f_value = 0.0;  // trace(E X(v)) including the seed part
  double backward_error = 0.0;
  Index basis_dim = 0;
  int expansions = 0;
  int inner_iters = 0;
  double wall_ms = 0.0;
  bool converged = false;
  std::string status;
};

struct SweepReport {
  std::vector<SweepRecord> records;
  Index final_basis_dim = 0;
  int total_expansions = 0;
  int unconverged() const;
};

SweepReport ek_sweep(const ParamLyapProblem& problem, const std::vector<Vec>& Vset, double eps, int m_max,
                     const Mat* E = nullptr, const EkOptions& base = {});

}  // namespace plyap
