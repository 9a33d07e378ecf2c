#include "paramlyap/smw.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace plyap {

void ParamLyapProblem::validate() const {
  const Index nn = A0.rows();
  require(nn > 0 && A0.cols() == nn, ErrorCode::DimensionMismatch, "A0 must be square");
  require(Bl.rows() == nn && Br.rows() == nn, ErrorCode::DimensionMismatch, "Bl and Br need n rows");
  require(Bl.cols() == Br.cols() && Bl.cols() >= 1, ErrorCode::DimensionMismatch, "Bl and Br need k >= 1 columns");
  require(Q.rows() == nn && Q.cols() == nn, ErrorCode::DimensionMismatch, "Q must be n x n");
  require(X0.size() == 0 || (X0.rows() == nn && X0.cols() == nn), ErrorCode::DimensionMismatch, "X0 must be n x n");
  require(A0.allFinite() && Bl.allFinite() && Br.allFinite() && Q.allFinite(), ErrorCode::InvalidArgument,
          "problem data must be finite");
}

Mat ParamLyapProblem::A(const Vec& v) const { return A0 - Bl * v.asDiagonal() * Br.transpose(); }

void check_parameters(const Vec& v, Index k) {
  require(v.size() == k, ErrorCode::DimensionMismatch, "parameter vector has wrong length");
  for (Index i = 0; i < k; ++i) {
    if (v(i) == 0.0) throw Error(ErrorCode::ZeroParameter, "parameter " + std::to_string(i) + " is zero");
    require(std::isfinite(v(i)), ErrorCode::InvalidArgument, "parameter is not finite");
  }
}

namespace {

using CMap = Eigen::Map<const CMat>;

CMat block12_of(const SmwOffline& off, const CMat& W2) {
  return off.L.cwiseProduct(off.beta * W2) * off.gamma;
}

CMat block21_of(const SmwOffline& off, const CMat& W1) {
  return off.gamma.transpose() * off.L.cwiseProduct(W1 * off.beta.transpose());
}

CVec vec_of(const CMat& M) { return Eigen::Map<const CVec>(M.data(), M.size()); }

// rank-p approximation of an operator known only through products
LowRankFactors randomized_tsvd(Index dim, Index p, std::uint64_t seed,
                               const std::function<CVec(const CVec&)>& apply,
                               const std::function<CVec(const CVec&)>& apply_adjoint) {
  LowRankFactors out;
  if (p == 0) {
    out.left = CMat::Zero(dim, 0);
    out.right = CMat::Zero(dim, 0);
    return out;
  }
  const Index l = std::min<Index>(dim, p + 10);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto mult = [&](const CMat& X, bool adjoint) {
    CMat Y(dim, X.cols());
    for (Index j = 0; j < X.cols(); ++j) Y.col(j) = adjoint ? apply_adjoint(X.col(j)) : apply(X.col(j));
    return Y;
  };
  auto orth = [&](const CMat& Y) {
    Eigen::HouseholderQR<CMat> qr(Y);
    return CMat(qr.householderQ() * CMat::Identity(dim, Y.cols()));
  };
  CMat Om(dim, l);
  for (Index j = 0; j < l; ++j)
    for (Index i = 0; i < dim; ++i) Om(i, j) = cplx(nd(rng), 0.0);
  CMat Qm = orth(mult(Om, false));
  for (int it = 0; it < 3; ++it) {
    const CMat Z = orth(mult(Qm, true));
    Qm = orth(mult(Z, false));
  }
  const CMat Bt = mult(Qm, true);  // (Q^H A)^H
  Eigen::BDCSVD<CMat> svd(Bt.adjoint().eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.left = Qm * svd.matrixU().leftCols(p) * svd.singularValues().head(p).asDiagonal();
  out.right = svd.matrixV().leftCols(p).conjugate();
  return out;
}

}  // namespace

CVec smw_block12_apply(const SmwOffline& off, const CVec& w2) {
  const CMap W2(w2.data(), off.k, off.n);
  return vec_of(block12_of(off, W2));
}

CVec smw_block21_apply(const SmwOffline& off, const CVec& w1) {
  const CMap W1(w1.data(), off.n, off.k);
  return vec_of(block21_of(off, W1));
}

CVec smw_block12_apply_transpose(const SmwOffline& off, const CVec& u1) {
  const CMap U1(u1.data(), off.n, off.k);
  return vec_of(off.beta.transpose() * off.L.cwiseProduct(U1 * off.gamma.transpose()));
}

CVec smw_block21_apply_transpose(const SmwOffline& off, const CVec& u2) {
  const CMap U2(u2.data(), off.k, off.n);
  return vec_of(off.L.cwiseProduct(off.gamma * U2) * off.beta);
}

CMat smw_block12_dense(const SmwOffline& off) {
  const Index n = off.n, k = off.k;
  CMat B(n * k, n * k);
  // row t*n+s, column q*k+p:  beta(s,p) L(s,q) gamma(q,t)
  for (Index q = 0; q < n; ++q)
    for (Index p = 0; p < k; ++p)
      for (Index t = 0; t < k; ++t)
        for (Index s = 0; s < n; ++s) B(t * n + s, q * k + p) = off.beta(s, p) * off.L(s, q) * off.gamma(q, t);
  return B;
}

CMat smw_block21_dense(const SmwOffline& off) {
  const Index n = off.n, k = off.k;
  CMat B(n * k, n * k);
  // row s*k+t, column p*n+q:  gamma(q,t) L(q,s) beta(s,p)
  for (Index p = 0; p < k; ++p)
    for (Index q = 0; q < n; ++q)
      for (Index s = 0; s < n; ++s)
        for (Index t = 0; t < k; ++t) B(s * k + t, p * n + q) = off.gamma(q, t) * off.L(q, s) * off.beta(s, p);
  return B;
}

SmwOffline smw_offline_core(const Mat& A0, const Mat& Bl, const Mat& Br, const Mat& P, const SmwSettings& settings,
                            const Mat* X0, const Mat* Q) {
  SmwOffline off;
  off.n = A0.rows();
  off.k = Bl.cols();
  require(P.rows() == off.n && P.cols() == 2 * off.k, ErrorCode::DimensionMismatch, "P must be n x 2k");
  off.A0 = A0;
  off.Bl = Bl;
  off.Br = Br;
  off.P = P;
  if (X0) off.X0 = *X0;
  if (Q) off.Q = *Q;
  const Index n = off.n, k = off.k;

  off.eig = eig_general(A0);
  off.L = cauchy_matrix(off.eig.lambdas);
  off.beta = off.eig.solve(Bl.cast<cplx>());
  off.gamma = off.eig.Q0.transpose() * Br.cast<cplx>();

  const CMat qP = off.eig.solve(P.cast<cplx>());
  off.Ztilde.resize(static_cast<size_t>(k));
  if (settings.keep_Z) off.Z.resize(static_cast<size_t>(k));
  for (Index i = 0; i < k; ++i) {
    const CMat outer = qP.col(k + i) * qP.col(i).transpose() + qP.col(i) * qP.col(k + i).transpose();
    off.Ztilde[static_cast<size_t>(i)] = off.L.cwiseProduct(outer);
    if (settings.keep_Z) {
      off.Z[static_cast<size_t>(i)] = real_part_checked(
          off.eig.Q0 * off.Ztilde[static_cast<size_t>(i)] * off.eig.Q0.transpose(), 1e-8, "Z_i");
    }
  }

  off.cw.resize(static_cast<size_t>(k * k));
  for (Index t = 0; t < k; ++t)
    for (Index p = 0; p < k; ++p)
      off.cw[static_cast<size_t>(t * k + p)] = off.L * off.gamma.col(t).cwiseProduct(off.beta.col(p));

  const Index nk = n * k;
  off.pbar = std::min<Index>(std::max<Index>(settings.pbar, 0), nk);
  if (nk <= settings.dense_offdiag_limit) {
    off.pc12 = tsvd(smw_block12_dense(off), off.pbar);
    off.pc21 = tsvd(smw_block21_dense(off), off.pbar);
  } else {
    const SmwOffline& co = off;
    off.pc12 = randomized_tsvd(
        nk, off.pbar, settings.seed, [&](const CVec& x) { return smw_block12_apply(co, x); },
        [&](const CVec& x) { return CVec(smw_block12_apply_transpose(co, x.conjugate()).conjugate()); });
    off.pc21 = randomized_tsvd(
        nk, off.pbar, settings.seed + 1, [&](const CVec& x) { return smw_block21_apply(co, x); },
        [&](const CVec& x) { return CVec(smw_block21_apply_transpose(co, x.conjugate()).conjugate()); });
  }

  off.a = (Bl.transpose() * A0 * Br).diagonal();
  off.normA0F = A0.norm();
  off.norm_had = (Bl.transpose() * Bl).cwiseProduct(Br.transpose() * Br);
  off.trace_I = make_trace_functional(off, nullptr);
  return off;
}

SmwOffline smw_offline(const ParamLyapProblem& problem, const SmwSettings& settings) {
  problem.validate();
  Mat X0 = problem.X0;
  if (X0.size() == 0) {
    const EigDecomp eig = eig_general(problem.A0);
    X0 = real_part_checked(solve_lyap_dense(eig, problem.Q.cast<cplx>()), 1e-8, "X0");
    X0 = 0.5 * (X0 + X0.transpose()).eval();
  }
  const double qn = std::max(problem.Q.norm(), 1e-300);
  if (lyap_residual(problem.A0, X0, problem.Q) > 1e-8 * qn) {
    throw Error(ErrorCode::AccuracyLoss, "seed solution X0 does not satisfy the seed equation");
  }
  Mat P(problem.n(), 2 * problem.k());
  P << X0 * problem.Br, problem.Bl;
  return smw_offline_core(problem.A0, problem.Bl, problem.Br, P, settings, &X0, &problem.Q);
}

CVec smw_rhs(const SmwOffline& off, const Vec& v) {
  check_parameters(v, off.k);
  CMat R1 = CMat::Zero(off.n, off.k);
  CMat R2 = CMat::Zero(off.k, off.n);
  for (Index i = 0; i < off.k; ++i) {
    const CMat& Zt = off.Ztilde[static_cast<size_t>(i)];
    R1.noalias() += v(i) * (Zt * off.gamma);
    R2.noalias() += v(i) * (off.gamma.transpose() * Zt);
  }
  CVec b(off.system_size());
  b << vec_of(R1), vec_of(R2);
  return b;
}

CVec smw_apply_system(const SmwOffline& off, const Vec& v, const CVec& x) {
  check_parameters(v, off.k);
  const Index n = off.n, k = off.k;
  require(x.size() == 2 * n * k, ErrorCode::DimensionMismatch, "system vector length");
  const CMap W1(x.data(), n, k);
  const CMap W2(x.data() + n * k, k, n);
  const CMat Y = off.L.cwiseProduct(W1 * off.beta.transpose() + off.beta * W2);
  const Vec vinv = v.cwiseInverse();
  const CMat O1 = W1 * vinv.cast<cplx>().asDiagonal() - Y * off.gamma;
  const CMat O2 = vinv.cast<cplx>().asDiagonal() * W2 - off.gamma.transpose() * Y;
  CVec out(2 * n * k);
  out << vec_of(O1), vec_of(O2);
  return out;
}

CVec smw_apply_system_blocks(const SmwOffline& off, const Vec& v, const CVec& x, const CMat& b12, const CMat& b21) {
  check_parameters(v, off.k);
  const Index n = off.n, k = off.k, nk = n * k;
  const CMap W1(x.data(), n, k);
  const CMap W2(x.data() + nk, k, n);
  CMat O1(n, k), O2(k, n);
  for (Index s = 0; s < n; ++s) {
    for (Index t = 0; t < k; ++t) {
      cplx acc1 = W1(s, t) / v(t);
      cplx acc2 = W2(t, s) / v(t);
      for (Index p = 0; p < k; ++p) {
        const cplx wgt = off.weights(t, p)(s);
        acc1 -= wgt * W1(s, p);
        acc2 -= wgt * W2(p, s);
      }
      O1(s, t) = acc1;
      O2(t, s) = acc2;
    }
  }
  CVec out(2 * nk);
  out << vec_of(O1) - b12 * x.tail(nk), vec_of(O2) - b21 * x.head(nk);
  return out;
}

SmwPreconditioner::SmwPreconditioner(const SmwOffline& off, const Vec& v) : off_(&off) {
  check_parameters(v, off.k);
  const Index n = off.n, k = off.k, nk = n * k;
  vinv_ = v.cwiseInverse();
  blocks_.resize(static_cast<size_t>(n));
  block_mats_.resize(static_cast<size_t>(n));
  for (Index s = 0; s < n; ++s) {
    CMat G(k, k);
    for (Index t = 0; t < k; ++t)
      for (Index p = 0; p < k; ++p) G(t, p) = (t == p ? cplx(vinv_(t)) : cplx(0.0)) - off.weights(t, p)(s);
    auto& lu = blocks_[static_cast<size_t>(s)];
    lu.compute(G);
    const auto d = lu.matrixLU().diagonal().cwiseAbs();
    if (!(d.minCoeff() > 1e-14 * std::max(d.maxCoeff(), G.cwiseAbs().maxCoeff()))) {
      throw Error(ErrorCode::SingularPrecondBlock, "diagonal block " + std::to_string(s) + " is singular");
    }
    block_mats_[static_cast<size_t>(s)] = std::move(G);
  }
  p_ = off.pbar;
  if (p_ > 0) {
    CMat A22N2(nk, p_);
    A11invN1_.resize(nk, p_);
    CVec tmp;
    for (Index j = 0; j < p_; ++j) {
      solve_A22(off.pc21.left.col(j), tmp);
      A22N2.col(j) = tmp;
      solve_A11(off.pc12.left.col(j), tmp);
      A11invN1_.col(j) = tmp;
    }
    Kp_ = off.pc12.right.transpose() * A22N2;
    const CMat cap = CMat::Identity(p_, p_) - Kp_ * (off.pc21.right.transpose() * A11invN1_);
    cap_.compute(cap);
    const auto d = cap_.matrixLU().diagonal().cwiseAbs();
    if (!(d.minCoeff() > 1e-14 * d.maxCoeff())) {
      throw Error(ErrorCode::SingularPrecondBlock, "Schur complement capacitance matrix is singular");
    }
  }
}

void SmwPreconditioner::solve_A11(const CVec& x, CVec& y) const {
  const Index n = off_->n, k = off_->k;
  y.resize(n * k);
  CVec row(k);
  for (Index s = 0; s < n; ++s) {
    for (Index p = 0; p < k; ++p) row(p) = x(p * n + s);
    const CVec sol = blocks_[static_cast<size_t>(s)].solve(row);
    for (Index p = 0; p < k; ++p) y(p * n + s) = sol(p);
  }
}

void SmwPreconditioner::solve_A22(const CVec& x, CVec& y) const {
  const Index n = off_->n, k = off_->k;
  y.resize(n * k);
  for (Index s = 0; s < n; ++s) y.segment(s * k, k) = blocks_[static_cast<size_t>(s)].solve(x.segment(s * k, k));
}

void SmwPreconditioner::solve_S(const CVec& x, CVec& y) const {
  solve_A11(x, y);
  if (p_ == 0) return;
  const CVec c = Kp_ * (off_->pc21.right.transpose() * y);
  y.noalias() += A11invN1_ * cap_.solve(c);
}

void SmwPreconditioner::apply(const CVec& x, CVec& y) const {
  const Index nk = off_->n * off_->k;
  require(x.size() == 2 * nk, ErrorCode::DimensionMismatch, "preconditioner vector length");
  y.resize(2 * nk);
  CVec t2, y1, y2;
  solve_A22(x.tail(nk), t2);
  CVec u = x.head(nk);
  CVec x2 = x.tail(nk);
  if (p_ > 0) u.noalias() += off_->pc12.left * (off_->pc12.right.transpose() * t2);
  solve_S(u, y1);
  if (p_ > 0) x2.noalias() += off_->pc21.left * (off_->pc21.right.transpose() * y1);
  solve_A22(x2, y2);
  y << y1, y2;
}

CMat SmwPreconditioner::diag_block_dense(int which) const {
  const Index n = off_->n, k = off_->k, nk = n * k;
  CMat D = CMat::Zero(nk, nk);
  for (Index s = 0; s < n; ++s) {
    const CMat& G = block_mats_[static_cast<size_t>(s)];
    for (Index t = 0; t < k; ++t)
      for (Index p = 0; p < k; ++p) {
        if (which == 1) D(t * n + s, p * n + s) = G(t, p);
        else D(s * k + t, s * k + p) = G(t, p);
      }
  }
  return D;
}

CVec smw_apply_precond(const SmwOffline& off, const Vec& v, const CVec& x) {
  return SmwPreconditioner(off, v).apply(x);
}

SMWResult smw_solve(const SmwOffline& off, const Vec& v, RecycleSpace* recycle, const SmwSolveOptions& opt) {
  const CVec b = smw_rhs(off, v);
  const LinearOp A = [&](const CVec& x, CVec& y) { y = smw_apply_system(off, v, x); };
  LinearOp M;
  std::optional<SmwPreconditioner> prec;
  if (opt.precondition) {
    prec.emplace(off, v);
    M = [&](const CVec& x, CVec& y) { prec->apply(x, y); };
  }
  GcrodrResult g = gcrodr_solve(A, M, b, nullptr, opt.gcrodr, recycle);
  if (recycle) *recycle = std::move(g.recycle);
  SMWResult res;
  res.w = std::move(g.x);
  res.stats = std::move(g.stats);
  const Index n = off.n, k = off.k;
  res.W1 = CMap(res.w.data(), n, k);
  res.W2 = CMap(res.w.data() + n * k, k, n);
  return res;
}

Mat smw_assemble_X(const SmwOffline& off, const Vec& v, const SMWResult& res, bool verify, double tol_total) {
  check_parameters(v, off.k);
  const Index n = off.n;
  CMat inner = off.L.cwiseProduct(res.W1 * off.beta.transpose() + off.beta * res.W2);
  if (!off.Z.size()) {
    for (Index i = 0; i < off.k; ++i) inner += v(i) * off.Ztilde[static_cast<size_t>(i)];
  }
  Mat X = real_part_checked(off.eig.Q0 * inner * off.eig.Q0.transpose(), 1e-8, "smw_assemble_X");
  for (size_t i = 0; i < off.Z.size(); ++i) X += v(static_cast<Index>(i)) * off.Z[i];
  if (off.X0.size() > 0) X += off.X0;
  X = 0.5 * (X + X.transpose()).eval();
  if (verify) {
    const Mat Av = off.A0 - off.Bl * v.asDiagonal() * off.Br.transpose();
    double res_norm = 0.0, ref = 0.0;
    if (off.Q.size() > 0) {
      res_norm = lyap_residual(Av, X, off.Q);
      ref = off.Q.norm();
    } else {
      const Index k = off.k;
      Mat ID = Mat::Zero(2 * k, 2 * k);
      ID.topRightCorner(k, k) = v.asDiagonal();
      ID.bottomLeftCorner(k, k) = v.asDiagonal();
      const Mat rhs = off.P * ID * off.P.transpose();
      res_norm = (Av * X + X * Av.transpose() - rhs).norm();
      ref = rhs.norm();
    }
    if (res_norm > tol_total * std::max(ref, 1e-300)) {
      throw Error(ErrorCode::AccuracyLoss,
                  "assembled solution residual " + std::to_string(res_norm / ref) + " relative, n=" +
                      std::to_string(n));
    }
  }
  return X;
}

TraceFunctional make_trace_functional(const SmwOffline& off, const Mat* E) {
  TraceFunctional tf;
  const CMat& Q0 = off.eig.Q0;
  CMat K;  // K = Q0^T E^T Q0 so that trace(E Q0 M Q0^T) = sum(K o M)
  if (E) {
    require(E->rows() == off.n && E->cols() == off.n, ErrorCode::DimensionMismatch, "E must be n x n");
    K = Q0.transpose() * E->transpose().cast<cplx>() * Q0;
  } else {
    K = Q0.transpose() * Q0;
  }
  const CMat KL = K.cwiseProduct(off.L);
  tf.KB1 = KL * off.beta;
  tf.KB2 = off.beta.transpose() * KL;
  tf.fz.resize(off.k);
  for (Index i = 0; i < off.k; ++i) tf.fz(i) = K.cwiseProduct(off.Ztilde[static_cast<size_t>(i)]).sum().real();
  if (off.X0.size() > 0) tf.f0 = E ? (*E * off.X0).trace() : off.X0.trace();
  return tf;
}

double smw_trace(const SmwOffline& off, const Vec& v, const SMWResult& res, const TraceFunctional& tf) {
  check_parameters(v, off.k);
  const cplx w = res.W1.cwiseProduct(tf.KB1).sum() + res.W2.cwiseProduct(tf.KB2).sum();
  return tf.f0 + v.dot(tf.fz) + w.real();
}

double smw_trace(const SmwOffline& off, const Vec& v, const SMWResult& res, const Mat* E) {
  if (!E) return smw_trace(off, v, res, off.trace_I);
  return smw_trace(off, v, res, make_trace_functional(off, E));
}

CMat smw_error_matrix(const SmwOffline& off, const CMat& E1, const CMat& E2) {
  const CMat& Q0 = off.eig.Q0;
  return Q0 * off.L.cwiseProduct(E1 * off.beta.transpose() + off.beta * E2) * Q0.transpose();
}

double smw_error_bound(const SmwOffline& off, const CMat& E1, const CMat& E2) {
  require(E1.rows() == off.n && E1.cols() == off.k && E2.rows() == off.k && E2.cols() == off.n,
          ErrorCode::DimensionMismatch, "error blocks must be n x k and k x n");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (off.A0 + off.A0.transpose()), Eigen::EigenvaluesOnly);
  const double alpha0 = es.eigenvalues().maxCoeff();
  if (alpha0 >= 0.0) throw Error(ErrorCode::NotDissipative, "symmetric part of A0 is not negative definite");
  const CMat& Q0 = off.eig.Q0;
  const CMat Bl = off.Bl.cast<cplx>();
  const CMat F = Q0 * E1 * Bl.transpose() + Bl * E2 * Q0.transpose();
  return F.norm() / (2.0 * std::abs(alpha0));
}

}  // namespace plyap
