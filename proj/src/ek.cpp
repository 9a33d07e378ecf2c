#include "paramlyap/ek.hpp"

#include <chrono>
#include <cmath>

namespace plyap {

EKBasis::EKBasis(const Mat& A0, std::shared_ptr<const LUFactors> lu, const Mat& P, double tol_defl)
    : A0_(A0), lu_(std::move(lu)), P_(P), tol_defl_(tol_defl) {
  require(A0.rows() == A0.cols(), ErrorCode::DimensionMismatch, "A0 must be square");
  require(P.rows() == A0.rows() && P.cols() > 0, ErrorCode::DimensionMismatch, "P must have n rows");
  require(lu_ && lu_->size() == A0.rows(), ErrorCode::DimensionMismatch, "LU factors do not match A0");
  const Index n = A0.rows();
  V_.resize(n, 0);
  AV_.resize(n, 0);
  T_.resize(0, 0);
  starts_.push_back(0);
  Mat W(n, 2 * P.cols());
  W << P, lu_->solve(P);
  append(W, P.cols());
  require(blocks() == 1 && dim_total() > 0, ErrorCode::InvalidArgument, "P is numerically zero");
  G_ = V_.transpose() * P_;
}

// Orthogonalize the candidate columns against V and each other (two classical
// Gram-Schmidt passes) and keep those above tol * ||W||_F.
void EKBasis::append(const Mat& W, Index ndirect) {
  const Index n = V_.rows();
  const double thresh = tol_defl_ * W.norm();
  Mat kept(n, W.cols());
  Index nk = 0, nd = 0;
  for (Index j = 0; j < W.cols(); ++j) {
    Vec w = W.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      if (V_.cols() > 0) w.noalias() -= V_ * (V_.transpose() * w);
      if (nk > 0) w.noalias() -= kept.leftCols(nk) * (kept.leftCols(nk).transpose() * w);
    }
    const double nw = w.norm();
    if (nw > thresh && V_.cols() + nk < n) {
      kept.col(nk++) = w / nw;
      if (j < ndirect) ++nd;
    }
  }
  if (nk == 0) {
    saturated_ = true;
    return;
  }
  const Index old = V_.cols();
  const Mat Qn = kept.leftCols(nk);
  const Mat AQ = A0_ * Qn;
  V_.conservativeResize(n, old + nk);
  V_.rightCols(nk) = Qn;
  AV_.conservativeResize(n, old + nk);
  AV_.rightCols(nk) = AQ;
  Mat T(old + nk, old + nk);
  T.topLeftCorner(old, old) = T_;
  T.bottomRows(nk) = Qn.transpose() * AV_;
  T.topRightCorner(old, nk) = V_.leftCols(old).transpose() * AQ;
  T_ = std::move(T);
  if (Bl_.size() > 0) {
    Bl_.conservativeResize(old + nk, Eigen::NoChange);
    Br_.conservativeResize(old + nk, Eigen::NoChange);
    Bl_.bottomRows(nk) = Qn.transpose() * Blfull_;
    Br_.bottomRows(nk) = Qn.transpose() * Brfull_;
  }
  starts_.push_back(old + nk);
  ndirect_.push_back(nd);
  if (V_.cols() == n) saturated_ = true;
}

bool EKBasis::expand() {
  if (saturated_) return false;
  const Index b0 = starts_[starts_.size() - 2];
  const Index b1 = starts_.back();
  const Index nd = ndirect_.back();
  const Index ni = (b1 - b0) - nd;
  Mat W(V_.rows(), nd + ni);
  if (nd > 0) W.leftCols(nd) = AV_.middleCols(b0, nd);
  if (ni > 0) W.rightCols(ni) = lu_->solve(V_.middleCols(b0 + nd, ni));
  append(W, nd);
  return !saturated_ || V_.cols() > b1;
}

Mat EKBasis::T() const {
  const Index d = active_dim();
  return T_.topLeftCorner(d, d);
}

Mat EKBasis::Tunder() const {
  const Index d = active_dim();
  return T_.bottomLeftCorner(T_.rows() - d, d);
}

Mat EKBasis::T_direct() const {
  const Index d = active_dim();
  const Mat Vd = V_.leftCols(d);
  return Vd.transpose() * (A0_ * Vd);
}

Mat EKBasis::Pm() const {
  Mat out = Mat::Zero(active_dim(), G_.cols());
  out.topRows(G_.rows()) = G_;
  return out;
}

void EKBasis::set_low_rank(const Mat& Bl, const Mat& Br) {
  require(Bl.rows() == n() && Br.rows() == n() && Bl.cols() == Br.cols(), ErrorCode::DimensionMismatch,
          "Bl and Br must be n x k");
  Blfull_ = Bl;
  Brfull_ = Br;
  Bl_ = V_.transpose() * Bl;
  Br_ = V_.transpose() * Br;
}

EKBasis ek_init(const Mat& A0, const LUFactors& A0lu, const Mat& P, double tol_defl) {
  return EKBasis(A0, std::make_shared<LUFactors>(A0lu), P, tol_defl);
}

void ek_expand(EKBasis& basis) {
  if (!basis.expand()) throw Error(ErrorCode::SaturatedSpace, "new block deflated completely");
}

BackwardErrorCache BackwardErrorCache::from(const Mat& A0, const Mat& Bl, const Mat& Br) {
  BackwardErrorCache c;
  c.normA0F = A0.norm();
  c.norm_had = (Bl.transpose() * Bl).cwiseProduct(Br.transpose() * Br);
  c.a = (Bl.transpose() * A0 * Br).diagonal();
  return c;
}

namespace {

Mat projected_rhs(const Mat& Pm, const Vec& v) {
  const Index k = v.size();
  return Pm.leftCols(k) * v.asDiagonal() * Pm.rightCols(k).transpose() +
         Pm.rightCols(k) * v.asDiagonal() * Pm.leftCols(k).transpose();
}

Mat dense_projected(const Mat& Am, const Mat& rhs) {
  Mat Y;
  try {
    Y = solve_lyap_schur(Am, -rhs);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NearSingularPair || e.code() == ErrorCode::NonConvergence)
      throw Error(ErrorCode::SingularProjectedEquation, e.what());
    throw;
  }
  const double rn = (Am * Y + Y * Am.transpose() - rhs).norm();
  if (!Y.allFinite() || rn > 1e-8 * std::max(rhs.norm(), 1e-300))
    throw Error(ErrorCode::SingularProjectedEquation, "projected equation is numerically singular");
  return Y;
}

}  // namespace

Mat ek_solve_projected(const EKBasis& basis, const Vec& v, ProjectedSolver solver, const EkOptions& opt) {
  check_parameters(v, basis.Blm().cols());
  require(basis.m() > 0, ErrorCode::InvalidArgument, "basis has no active blocks; expand first");
  const Mat Blm = basis.Blm(), Brm = basis.Brm(), Pm = basis.Pm();
  require(Pm.cols() == 2 * v.size(), ErrorCode::DimensionMismatch, "P must have 2k columns");
  const Mat T = basis.T();
  const Mat Am = T - Blm * v.asDiagonal() * Brm.transpose();
  const Mat rhs = projected_rhs(Pm, v);
  if (solver == ProjectedSolver::Dense) return dense_projected(Am, rhs);
  try {
    const SmwOffline off = smw_offline_core(T, Blm, Brm, Pm, opt.smw);
    const SMWResult res = smw_solve(off, v, nullptr, opt.solve);
    return smw_assemble_X(off, v, res, true, 1e-8);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NearSingularPair || e.code() == ErrorCode::AccuracyLoss ||
        e.code() == ErrorCode::SingularPrecondBlock || e.code() == ErrorCode::NonConvergence)
      return dense_projected(Am, rhs);
    throw;
  }
}

double ek_backward_error(const EKBasis& basis, const Mat& Y, const Vec& v, const BackwardErrorCache& cache) {
  const Index d = basis.active_dim();
  require(Y.rows() == d && Y.cols() == d, ErrorCode::DimensionMismatch, "Y does not match the active basis");
  const double num = std::sqrt(2.0) * (basis.Tunder() * Y).norm();
  if (num == 0.0) return 0.0;
  const double normA = std::sqrt(std::max(cache.normAv_sq(v), 0.0));
  const Mat& G = basis.G();
  const double rhs = projected_rhs(G, v).norm();
  return num / (2.0 * normA * Y.norm() + rhs);
}

double ek_trace(const EKBasis& basis, const Mat& Y, const Mat* E) {
  if (!E) return Y.trace();
  const Mat V = basis.V();
  require(E->rows() == basis.n() && E->cols() == basis.n(), ErrorCode::DimensionMismatch, "E must be n x n");
  return (V.transpose() * (*E) * V).cwiseProduct(Y.transpose()).sum();
}

EkSolver::EkSolver(const Mat& A0, const Mat& Bl, const Mat& Br, const Mat& P, const EkOptions& opt, const Mat* E)
    : A0_(A0), Bl_(Bl), Br_(Br), P_(P), opt_(opt) {
  require(opt.eps > 0.0, ErrorCode::InvalidArgument, "eps must be positive");
  require(opt.m_max >= 1, ErrorCode::InvalidArgument, "m_max must be at least 1");
  if (E) {
    has_E_ = true;
    E_ = *E;
  }
  lu_ = std::make_shared<LUFactors>(A0);
  basis_ = std::make_unique<EKBasis>(A0, lu_, P, opt.tol_defl);
  basis_->set_low_rank(Bl, Br);
  cache_ = BackwardErrorCache::from(A0, Bl, Br);
}

bool EkSolver::grow() {
  if (basis_->saturated() || basis_->m() >= opt_.m_max) return false;
  const Index before = basis_->dim_total();
  const int m_before = basis_->m();
  basis_->expand();
  if (basis_->m() == m_before && basis_->dim_total() == before) return false;
  ++total_expansions_;
  return true;
}

void EkSolver::prepare_projection() {
  if (proj_.m == basis_->m()) return;
  proj_.m = basis_->m();
  proj_.recycle.clear();
  proj_.off.reset();
  if (opt_.solver == ProjectedSolver::Smw) {
    try {
      proj_.off = std::make_unique<SmwOffline>(
          smw_offline_core(basis_->T(), basis_->Blm(), basis_->Brm(), basis_->Pm(), opt_.smw));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NearSingularPair && e.code() != ErrorCode::NonConvergence &&
          e.code() != ErrorCode::AccuracyLoss)
        throw;
      proj_.off.reset();  // dense projected solves for this m
    }
  }
}

Mat EkSolver::solve_current(const Vec& v, int& iters, bool growing) {
  iters = 0;
  // while the basis is still growing for this parameter the offline data for
  // the intermediate sizes would be thrown away at once; solve densely instead
  if (growing && opt_.solver == ProjectedSolver::Smw) return ek_solve_projected(*basis_, v, ProjectedSolver::Dense, opt_);
  prepare_projection();
  if (proj_.off) {
    try {
      const SMWResult res = smw_solve(*proj_.off, v, &proj_.recycle, opt_.solve);
      iters = res.stats.iterations;
      return smw_assemble_X(*proj_.off, v, res, true, 1e-8);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AccuracyLoss && e.code() != ErrorCode::SingularPrecondBlock) throw;
      proj_.recycle.clear();
    }
  }
  return ek_solve_projected(*basis_, v, ProjectedSolver::Dense, opt_);
}

double EkSolver::weighted_trace(const Mat& Y) {
  if (!has_E_) return Y.trace();
  if (vev_m_ != basis_->m()) {
    const Mat V = basis_->V();
    vev_ = V.transpose() * E_ * V;
    vev_m_ = basis_->m();
  }
  return vev_.cwiseProduct(Y.transpose()).sum();
}

EkEvaluation EkSolver::evaluate(const Vec& v) {
  check_parameters(v, Bl_.cols());
  EkEvaluation out;
  out.v = v;
  const int exp_before = total_expansions_;
  int failures = 0;
  if (basis_->m() == 0) grow();
  for (;;) {
    bool solved = false;
    Mat Y;
    try {
      int it = 0;
      Y = solve_current(v, it, total_expansions_ > exp_before);
      out.inner_iters += it;
      solved = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularProjectedEquation) throw;
      ++failures;
      out.note = "singular projected equation";
    }
    if (solved) {
      out.backward_error = ek_backward_error(*basis_, Y, v, cache_);
      if (out.backward_error <= opt_.eps) {
        out.converged = true;
        out.f_delta = weighted_trace(Y);
        last_Y_ = std::move(Y);
        break;
      }
    } else if (failures >= 2) {
      out.backward_error = std::numeric_limits<double>::quiet_NaN();
      break;
    }
    if (!grow()) {
      if (solved) {
        out.f_delta = weighted_trace(Y);
        last_Y_ = std::move(Y);
      }
      break;
    }
  }

  if (!out.converged && basis_->dim_total() >= basis_->n()) {
    // the basis spans everything; solve the full equation directly
    const Mat Av = A0_ - Bl_ * v.asDiagonal() * Br_.transpose();
    Mat ID = Mat::Zero(P_.cols(), P_.cols());
    const Index k = v.size();
    ID.topRightCorner(k, k) = v.asDiagonal();
    ID.bottomLeftCorner(k, k) = v.asDiagonal();
    const Mat rhs = P_ * ID * P_.transpose();
    const Mat Xd = solve_lyap_schur(Av, -rhs);
    out.f_delta = has_E_ ? (E_ * Xd).trace() : Xd.trace();
    out.backward_error = (Av * Xd + Xd * Av.transpose() - rhs).norm() /
                         (2.0 * Av.norm() * Xd.norm() + rhs.norm());
    out.converged = out.backward_error <= opt_.eps;
    out.dense_fallback = true;
  }
  out.m = basis_->m();
  out.basis_dim = basis_->active_dim();
  out.expansions = total_expansions_ - exp_before;
  return out;
}

int SweepReport::unconverged() const {
  int c = 0;
  for (const auto& r : records) c += r.converged ? 0 : 1;
  return c;
}

SweepReport ek_sweep(const ParamLyapProblem& problem, const std::vector<Vec>& Vset, double eps, int m_max,
                     const Mat* E, const EkOptions& base) {
  problem.validate();
  for (const Vec& v : Vset) check_parameters(v, problem.k());
  Mat X0 = problem.X0;
  if (X0.size() == 0) X0 = solve_lyap_schur(problem.A0, problem.Q);
  Mat P(problem.n(), 2 * problem.k());
  P << X0 * problem.Br, problem.Bl;
  const double f0 = E ? (*E * X0).trace() : X0.trace();

  EkOptions opt = base;
  opt.eps = eps;
  opt.m_max = m_max;
  EkSolver solver(problem.A0, problem.Bl, problem.Br, P, opt, E);
  SweepReport rep;
  rep.records.reserve(Vset.size());
  for (const Vec& v : Vset) {
    const auto t0 = std::chrono::steady_clock::now();
    const EkEvaluation ev = solver.evaluate(v);
    const auto t1 = std::chrono::steady_clock::now();
    SweepRecord r;
    r.v = v;
    r.f_value = f0 + ev.f_delta;
    r.backward_error = ev.backward_error;
    r.basis_dim = ev.basis_dim;
    r.expansions = ev.expansions;
    r.inner_iters = ev.inner_iters;
    r.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    r.converged = ev.converged;
    r.status = ev.converged ? (ev.dense_fallback ? "dense_fallback" : "converged") : "unconverged";
    rep.records.push_back(std::move(r));
  }
  rep.final_basis_dim = solver.basis().active_dim();
  rep.total_expansions = solver.total_expansions();
  return rep;
}

}  // namespace plyap
