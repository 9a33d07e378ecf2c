#include "paramlyap/vibration.hpp"

#include <cmath>

namespace plyap {

void VibSpec::validate() const {
  require(d >= 10 && d % 10 == 0, ErrorCode::InvalidArgument, "d must be a positive multiple of 10");
  require(k1 > 0 && k2 > 0 && k3 > 0, ErrorCode::InvalidArgument, "spring stiffnesses must be positive");
  require(alpha > 0, ErrorCode::InvalidArgument, "alpha must be positive");
  require(s >= 0 && s <= 2 * d + 1, ErrorCode::InvalidArgument, "s out of range");
  require(i1 >= 1 && i1 + d / 10 + d <= 2 * d, ErrorCode::IndexOutOfRange, "i1 out of range");
  require(i2 >= d + 1 && i2 <= 2 * d, ErrorCode::IndexOutOfRange, "i2 must lie in the second row");
}

Vec mass_config(int d) {
  require(d >= 2 && d % 2 == 0, ErrorCode::InvalidArgument, "d must be even");
  const int m = 2 * d + 1;
  Vec mass(m);
  for (int i = 1; i <= 2 * d; ++i) {
    double mi;
    if (i <= d / 2) mi = 0.1 * (2 * d + 1 - 2 * i);
    else if (i <= d) mi = 0.1 * (i - d / 2) + 100.0;
    else mi = 160.0;
    if (!(mi > 0.0)) throw Error(ErrorCode::NonPositiveMass, "mass " + std::to_string(i) + " is not positive");
    mass(i - 1) = mi;
  }
  mass(m - 1) = 175.0;
  return mass;
}

void build_mass_spring(const VibSpec& spec, Mat& M, Mat& K) {
  const int d = spec.d;
  const int m = 2 * d + 1;
  M = mass_config(d).asDiagonal();
  K = Mat::Zero(m, m);
  auto row = [&](int off, double k) {
    for (int i = 0; i < d; ++i) {
      K(off + i, off + i) = 2.0 * k;
      if (i + 1 < d) {
        K(off + i, off + i + 1) = -k;
        K(off + i + 1, off + i) = -k;
      }
    }
    K(off + d - 1, m - 1) = -k;
    K(m - 1, off + d - 1) = -k;
  };
  row(0, spec.k1);
  row(d, spec.k2);
  K(m - 1, m - 1) = spec.k1 + spec.k2 + spec.k3;
}

Mat damper_geometry(int d, int i1, int i2) {
  const int m = 2 * d + 1;
  const int j = i1 + d / 10;
  require(i1 >= 1 && j + d <= m && i2 >= 1 && i2 <= m, ErrorCode::IndexOutOfRange, "damper index out of range");
  Mat B = Mat::Zero(m, 3);
  B(i1 - 1, 0) = 1.0;
  B(j - 1, 1) = 1.0;
  B(j + d - 1, 1) = -1.0;
  B(i2 - 1, 2) = 1.0;
  return B;
}

Mat critical_damping_Q(Index m, int s) {
  const Index n = 2 * m;
  if (s == 0) return Mat::Identity(n, n) / static_cast<double>(n);
  Mat Q = Mat::Zero(n, n);
  for (int i = 0; i < s; ++i) {
    Q(i, i) = 1.0 / (2.0 * s);
    Q(m + i, m + i) = 1.0 / (2.0 * s);
  }
  return Q;
}

Mat critical_damping_X0(const Vec& Omega, double alpha, int s) {
  const Index m = Omega.size();
  const Index n = 2 * m;
  const Index used = (s == 0) ? m : s;
  const double scale = (s == 0) ? 1.0 / static_cast<double>(n) : 1.0 / (2.0 * s);
  Mat X0 = Mat::Zero(n, n);
  for (Index i = 0; i < used; ++i) {
    const double w = 1.0 / Omega(i);
    X0(i, i) = scale * (1.0 / alpha + 0.5 * alpha) * w;
    X0(i, m + i) = X0(m + i, i) = -0.5 * scale * w;
    X0(m + i, m + i) = scale * w / alpha;
  }
  return X0;
}

VibModel build_vib_model(const VibSpec& spec) {
  spec.validate();
  VibModel model;
  build_mass_spring(spec, model.M, model.K);
  model.modal = generalized_modal(model.K, model.M);
  model.B = damper_geometry(spec.d, spec.i1, spec.i2);
  const Index m = model.M.rows();
  const Index n = 2 * m;
  const Vec& Om = model.modal.Omega;
  Mat A0 = Mat::Zero(n, n);
  A0.topRightCorner(m, m) = Om.asDiagonal();
  A0.bottomLeftCorner(m, m) = -Om.asDiagonal().toDenseMatrix();
  A0.bottomRightCorner(m, m) = -spec.alpha * Om.asDiagonal().toDenseMatrix();
  Mat Bv = Mat::Zero(n, 3);
  Bv.bottomRows(m) = model.modal.Phi.transpose() * model.B;
  ParamLyapProblem& p = model.problem;
  p.A0 = std::move(A0);
  p.Bl = Bv;
  p.Br = Bv;
  p.Q = critical_damping_Q(m, spec.s);
  p.X0 = critical_damping_X0(Om, spec.alpha, spec.s);
  return model;
}

RayleighModel build_rayleigh_model(const Mat& M, const Mat& K, double alpha, double beta, const Mat& B) {
  require(alpha >= 0 && beta >= 0 && alpha * alpha + beta * beta > 0, ErrorCode::InvalidArgument,
          "Rayleigh coefficients must be nonnegative and not both zero");
  const Index m = M.rows();
  require(B.rows() == m, ErrorCode::DimensionMismatch, "damper geometry rows");
  Eigen::LLT<Mat> lm(M), lk(K);
  if (lm.info() != Eigen::Success || lk.info() != Eigen::Success)
    throw Error(ErrorCode::NotSPD, "M and K must be positive definite");
  const Mat I = Mat::Identity(m, m);
  const Mat Minv = lm.solve(I);
  const Mat Kinv = lk.solve(I);
  const Mat MinvK = Minv * K;

  RayleighModel r;
  const Index n = 2 * m;
  r.A0 = Mat::Zero(n, n);
  r.A0.topRightCorner(m, m) = I;
  r.A0.bottomLeftCorner(m, m) = -MinvK;
  r.A0.bottomRightCorner(m, m) = -alpha * I - beta * MinvK;
  r.Bl = Mat::Zero(n, B.cols());
  r.Br = Mat::Zero(n, B.cols());
  r.Bl.bottomRows(m) = Minv * B;
  r.Br.bottomRows(m) = B;
  r.Q = Mat::Zero(n, n);
  r.Q.topLeftCorner(m, m) = Kinv;
  r.Q.bottomRightCorner(m, m) = Minv;

  // modal coordinates decouple into 2x2 blocks [[0,1],[-lam,-c]], c = alpha + beta*lam
  const Mat S = alpha * K + beta * K * Minv * K;
  const Mat X11 = Eigen::LLT<Mat>(S).solve(I) + 0.5 * alpha * Kinv * M * Kinv + 0.5 * beta * Kinv;
  const Mat X22 = Eigen::LLT<Mat>(alpha * M + beta * K).solve(I);
  r.X0.resize(n, n);
  r.X0 << X11, -0.5 * Kinv, -0.5 * Kinv, X22;
  r.X0 = 0.5 * (r.X0 + r.X0.transpose()).eval();

  const ModalPair mp = generalized_modal(K, M);
  r.eigs.resize(n);
  for (Index i = 0; i < m; ++i) {
    const double lam = mp.Omega(i) * mp.Omega(i);
    const double c = alpha + beta * lam;
    const cplx disc = std::sqrt(cplx(c * c - 4.0 * lam, 0.0));
    r.eigs(2 * i) = 0.5 * (-c + disc);
    r.eigs(2 * i + 1) = 0.5 * (-c - disc);
  }
  return r;
}

double total_energy(const VibModel& model, const Vec& v, Backend backend, const EvaluatorOptions& opt) {
  Evaluator ev(model.problem, backend, opt);
  return ev.evaluate(v).f_value;
}

OptimizeResult optimize_viscosities(const VibModel& model, const Vec& v0, double tol, Backend backend,
                                    const EvaluatorOptions& opt) {
  require(v0.size() == model.problem.k(), ErrorCode::DimensionMismatch, "v0 length");
  require((v0.array() > 0).all(), ErrorCode::InvalidArgument, "v0 must be positive");
  Evaluator ev(model.problem, backend, opt);
  OptimizeResult out;
  auto f = [&](const Vec& v) {
    if ((v.array() <= 0).any()) ++out.negative_probes;
    EvalRecord r = ev.evaluate(v);
    out.total_inner_iters += r.inner_iters;
    const double val = r.f_value;
    out.history.push_back(std::move(r));
    return val;
  };
  NelderMeadOptions nm;
  nm.tol_x = tol;
  nm.tol_f = tol;
  nm.throw_on_budget = false;
  const NelderMeadResult res = nelder_mead(f, v0, nm);
  out.v = res.x;
  out.energy = res.fval;
  out.evals = res.evals;
  out.converged = res.converged;
  if (!res.converged) {
    throw Error(ErrorCode::EvaluationBudgetExceeded,
                "viscosity optimization did not converge within " + std::to_string(res.evals) + " evaluations");
  }
  return out;
}

}  // namespace plyap
