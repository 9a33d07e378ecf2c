#include "paramlyap/gcrodr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace plyap {

namespace {

// rotation with  c*a + s*b = r,  -conj(s)*a + c*b = 0
void make_givens(cplx a, cplx b, double& c, cplx& s) {
  const double aa = std::abs(a);
  const double bb = std::abs(b);
  if (bb == 0.0) {
    c = 1.0;
    s = 0.0;
  } else if (aa == 0.0) {
    c = 0.0;
    s = std::conj(b) / bb;
  } else {
    const double nrm = std::hypot(aa, bb);
    c = aa / nrm;
    s = (a / aa) * std::conj(b) / nrm;
  }
}

void apply_givens(double c, cplx s, cplx& x, cplx& y) {
  const cplx t = c * x + s * y;
  y = -std::conj(s) * x + c * y;
  x = t;
}

}  // namespace

CMat harmonic_ritz_coefficients(const CMat& G, const CMat& VhatH_What, Index s, CVec* theta, bool* degenerate) {
  const Index nG = G.cols();
  const Index keep = std::min<Index>(s, nG);
  if (degenerate) *degenerate = false;
  if (keep <= 0) {
    if (theta) theta->resize(0);
    return CMat::Zero(nG, 0);
  }
  // G^H G z = theta G^H (Vhat^H What) z
  const CMat Amat = G.adjoint() * G;
  const CMat Bmat = G.adjoint() * VhatH_What;
  Eigen::FullPivLU<CMat> blu(Bmat);
  CVec vals;
  CMat vecs;
  const double bscale = Bmat.cwiseAbs().maxCoeff();
  bool singular = !(bscale > 0.0) || blu.rank() < nG;
  if (!singular) {
    const auto d = blu.matrixLU().diagonal().cwiseAbs();
    singular = d.minCoeff() < 1e-13 * d.maxCoeff();
  }
  if (!singular) {
    Eigen::ComplexEigenSolver<CMat> es(blu.solve(Amat), true);
    singular = es.info() != Eigen::Success;
    if (!singular) {
      vals = es.eigenvalues();
      vecs = es.eigenvectors();
    }
  }
  if (singular) {
    // Ritz fallback: W^H A W ~ (Vhat^H W)^H G
    if (degenerate) *degenerate = true;
    Eigen::ComplexEigenSolver<CMat> es(VhatH_What.adjoint() * G, true);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::DegenerateProjection, "Ritz fallback failed");
    vals = es.eigenvalues();
    vecs = es.eigenvectors();
  }
  std::vector<Index> order(static_cast<size_t>(nG));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(vals(a)) < std::abs(vals(b)); });
  CMat P(nG, keep);
  if (theta) theta->resize(keep);
  for (Index i = 0; i < keep; ++i) {
    P.col(i) = vecs.col(order[static_cast<size_t>(i)]);
    if (theta) (*theta)(i) = vals(order[static_cast<size_t>(i)]);
  }
  return P;
}

RecycleSpace harmonic_ritz_extract(const CMat& W, const CMat& Vhat, const CMat& G, Index s, CVec* theta,
                                   bool* degenerate) {
  RecycleSpace out;
  const CMat VhW = Vhat.adjoint() * W;
  const CMat P = harmonic_ritz_coefficients(G, VhW, s, theta, degenerate);
  if (P.cols() == 0) return out;
  const CMat GP = G * P;
  Eigen::HouseholderQR<CMat> qr(GP);
  const Index kk = P.cols();
  CMat Q = qr.householderQ() * CMat::Identity(GP.rows(), kk);
  CMat R = qr.matrixQR().topRows(kk).triangularView<Eigen::Upper>();
  // drop trailing directions when G*P is numerically rank deficient
  const auto d = R.diagonal().cwiseAbs();
  Index good = kk;
  const double dmax = d.maxCoeff();
  for (Index i = 0; i < kk; ++i) {
    if (!(d(i) > 1e-12 * dmax)) {
      good = i;
      break;
    }
  }
  if (good == 0) return out;
  const CMat Rg = R.topLeftCorner(good, good);
  out.C = Vhat * Q.leftCols(good);
  out.U = Rg.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(CMat(W * P.leftCols(good)));
  return out;
}

GcrodrResult gcrodr_solve(const LinearOp& A, const LinearOp& precond, const CVec& b, const CVec* x0,
                          const GcrodrOptions& opt, const RecycleSpace* recycle) {
  require(opt.tol > 0.0, ErrorCode::InvalidArgument, "gcrodr tol must be positive");
  require(opt.s >= 0 && opt.s < opt.m_restart, ErrorCode::InvalidArgument, "gcrodr needs 0 <= s < m_restart");
  const Index N = b.size();
  GcrodrResult res;
  SolveStats& st = res.stats;

  CVec tmp(N);
  auto apply_hat = [&](const CVec& v, CVec& out) {
    if (precond) {
      precond(v, tmp);
      A(tmp, out);
    } else {
      A(v, out);
    }
  };

  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.x = CVec::Zero(N);
    st.residual_history.push_back(0.0);
    return res;
  }

  CVec r0 = b;
  if (x0) {
    require(x0->size() == N, ErrorCode::DimensionMismatch, "gcrodr initial guess length");
    CVec ax(N);
    A(*x0, ax);
    r0 -= ax;
  }
  CVec y = CVec::Zero(N);
  CVec r = r0;

  CMat U;
  CMat C;
  Index k = 0;
  if (recycle && !recycle->empty() && opt.s > 0) {
    const Index kk = std::min<Index>(recycle->U.cols(), opt.s);
    const CMat Ut = recycle->U.leftCols(kk);
    CMat AU(N, kk);
    CVec col(N);
    for (Index i = 0; i < kk; ++i) {
      apply_hat(Ut.col(i), col);
      AU.col(i) = col;
    }
    Eigen::HouseholderQR<CMat> qr(AU);
    const CMat R = qr.matrixQR().topRows(kk).triangularView<Eigen::Upper>();
    const auto d = R.diagonal().cwiseAbs();
    if (kk > 0 && d.minCoeff() > 1e-12 * d.maxCoeff()) {
      C = qr.householderQ() * CMat::Identity(N, kk);
      U = R.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(Ut);
      k = kk;
      const CVec cr = C.adjoint() * r;
      y.noalias() += U * cr;
      r.noalias() -= C * cr;
    }
  }

  double relres = r.norm() / bnorm;
  st.residual_history.push_back(relres);
  st.status = SolveStatus::Converged;

  CVec w(N);
  while (relres > opt.tol) {
    if (st.iterations >= opt.maxit) {
      st.status = SolveStatus::MaxIterationsExceeded;
      break;
    }
    const Index mk = opt.m_restart - k;
    const Index steps = std::min<Index>(mk, opt.maxit - st.iterations);
    CMat V = CMat::Zero(N, steps + 1);
    CMat H = CMat::Zero(steps + 1, steps);
    CMat Rm = CMat::Zero(steps + 1, steps);
    CMat Bm = CMat::Zero(k, steps);
    CVec g = CVec::Zero(steps + 1);
    std::vector<double> cs(static_cast<size_t>(steps));
    std::vector<cplx> sn(static_cast<size_t>(steps));
    const CVec cr = (k > 0) ? CVec(C.adjoint() * r) : CVec();

    const double beta = r.norm();
    V.col(0) = r / beta;
    g(0) = beta;
    Index j = 0;
    bool breakdown = false;
    for (; j < steps;) {
      apply_hat(V.col(j), w);
      ++st.iterations;
      if (k > 0) {
        for (int pass = 0; pass < 2; ++pass) {
          const CVec bc = C.adjoint() * w;
          w.noalias() -= C * bc;
          Bm.col(j) += bc;
        }
      }
      const double w0 = w.norm();
      for (Index i = 0; i <= j; ++i) {
        const cplx h = V.col(i).dot(w);
        H(i, j) = h;
        w -= h * V.col(i);
      }
      if (w.norm() < 0.7071067811865476 * w0) {
        for (Index i = 0; i <= j; ++i) {
          const cplx h = V.col(i).dot(w);
          H(i, j) += h;
          w -= h * V.col(i);
        }
      }
      const double hn = w.norm();
      H(j + 1, j) = hn;
      if (hn > 0.0) V.col(j + 1) = w / hn;

      for (Index i = 0; i <= j + 1; ++i) Rm(i, j) = H(i, j);
      for (Index i = 0; i < j; ++i)
        apply_givens(cs[static_cast<size_t>(i)], sn[static_cast<size_t>(i)], Rm(i, j), Rm(i + 1, j));
      make_givens(Rm(j, j), Rm(j + 1, j), cs[static_cast<size_t>(j)], sn[static_cast<size_t>(j)]);
      apply_givens(cs[static_cast<size_t>(j)], sn[static_cast<size_t>(j)], Rm(j, j), Rm(j + 1, j));
      apply_givens(cs[static_cast<size_t>(j)], sn[static_cast<size_t>(j)], g(j), g(j + 1));
      ++j;
      const double est = std::abs(g(j)) / bnorm;
      st.residual_history.push_back(est);
      if (est <= opt.tol) break;
      if (hn <= 1e-14 * std::max(w0, 1e-300)) {
        breakdown = true;
        break;
      }
    }

    const CVec z = Rm.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    y.noalias() += V.leftCols(j) * z;
    if (k > 0) y.noalias() += U * (cr - Bm.leftCols(j) * z);
    apply_hat(y, w);
    r = r0 - w;
    ++st.cycles;
    relres = r.norm() / bnorm;

    if (opt.s > 0) {
      CMat G;
      CMat Wb;
      CMat Vhat;
      if (k == 0) {
        G = H.topLeftCorner(j + 1, j);
        Wb = V.leftCols(j);
        Vhat = V.leftCols(j + 1);
      } else {
        const Vec dinv = U.colwise().norm().cwiseInverse().transpose();
        G = CMat::Zero(k + j + 1, k + j);
        G.topLeftCorner(k, k) = dinv.cast<cplx>().asDiagonal();
        G.topRightCorner(k, j) = Bm.leftCols(j);
        G.bottomRightCorner(j + 1, j) = H.topLeftCorner(j + 1, j);
        Wb.resize(N, k + j);
        Wb << U * dinv.cast<cplx>().asDiagonal(), V.leftCols(j);
        Vhat.resize(N, k + j + 1);
        Vhat << C, V.leftCols(j + 1);
      }
      bool degen = false;
      RecycleSpace next = harmonic_ritz_extract(Wb, Vhat, G, opt.s, nullptr, &degen);
      st.degenerate_projection = st.degenerate_projection || degen;
      U = std::move(next.U);
      C = std::move(next.C);
      k = U.cols();
    }

    if (breakdown && relres > opt.tol) {
      st.status = SolveStatus::Breakdown;
      break;
    }
  }

  res.x = y;
  if (precond) precond(y, res.x);
  if (x0) res.x += *x0;
  CVec ax(N);
  A(res.x, ax);
  st.final_relres = (b - ax).norm() / bnorm;
  if (opt.s > 0) {
    res.recycle.U = std::move(U);
    res.recycle.C = std::move(C);
  }
  return res;
}

}  // namespace plyap
