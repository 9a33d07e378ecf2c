#pragma once

// Textbook restarted GMRES(m) with right preconditioning: modified
// Gram-Schmidt with a second pass when the vector shrinks below 1/sqrt(2) of
// its length, complex Givens rotations, restart from the true residual.

#include <vector>

#include "paramlyap/gcrodr.hpp"

namespace ref_gmres {

using plyap::CMat;
using plyap::cplx;
using plyap::CVec;
using plyap::Index;

struct Result {
  CVec x;
  std::vector<double> history;
  int iterations = 0;
};

inline Result solve(const plyap::LinearOp& A, const plyap::LinearOp& M, const CVec& b, double tol, int maxit, int m) {
  const Index N = b.size();
  Result out;
  CVec tmp(N), w(N);
  auto op = [&](const CVec& v, CVec& y) {
    if (M) {
      M(v, tmp);
      A(tmp, y);
    } else {
      A(v, y);
    }
  };
  const double bnorm = b.norm();
  CVec y = CVec::Zero(N);
  CVec r = b;
  double rel = r.norm() / bnorm;
  out.history.push_back(rel);
  while (rel > tol && out.iterations < maxit) {
    const Index steps = std::min<Index>(m, maxit - out.iterations);
    CMat V = CMat::Zero(N, steps + 1), H = CMat::Zero(steps + 1, steps);
    CVec g = CVec::Zero(steps + 1);
    std::vector<double> c(steps);
    std::vector<cplx> s(steps);
    const double beta = r.norm();
    V.col(0) = r / beta;
    g(0) = beta;
    Index j = 0;
    while (j < steps) {
      op(V.col(j), w);
      ++out.iterations;
      const double w0 = w.norm();
      for (Index i = 0; i <= j; ++i) {
        H(i, j) = V.col(i).dot(w);
        w -= H(i, j) * V.col(i);
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
      for (Index i = 0; i < j; ++i) {
        const cplx t = c[i] * H(i, j) + s[i] * H(i + 1, j);
        H(i + 1, j) = -std::conj(s[i]) * H(i, j) + c[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const cplx a = H(j, j), bb = H(j + 1, j);
      if (std::abs(bb) == 0.0) {
        c[j] = 1.0;
        s[j] = 0.0;
      } else if (std::abs(a) == 0.0) {
        c[j] = 0.0;
        s[j] = std::conj(bb) / std::abs(bb);
      } else {
        const double nrm = std::hypot(std::abs(a), std::abs(bb));
        c[j] = std::abs(a) / nrm;
        s[j] = (a / std::abs(a)) * std::conj(bb) / nrm;
      }
      H(j, j) = c[j] * a + s[j] * bb;
      H(j + 1, j) = -std::conj(s[j]) * a + c[j] * bb;
      const cplx gt = c[j] * g(j) + s[j] * g(j + 1);
      g(j + 1) = -std::conj(s[j]) * g(j) + c[j] * g(j + 1);
      g(j) = gt;
      ++j;
      out.history.push_back(std::abs(g(j)) / bnorm);
      if (std::abs(g(j)) / bnorm <= tol) break;
      if (hn <= 1e-14 * w0) break;
    }
    const CVec z = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    y += V.leftCols(j) * z;
    op(y, w);
    r = b - w;
    rel = r.norm() / bnorm;
  }
  out.x = y;
  if (M) M(y, out.x);
  return out;
}

}  // namespace ref_gmres
