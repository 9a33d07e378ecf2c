#include "paramlyap/evaluator.hpp"

#include <chrono>

namespace plyap {

Backend parse_backend(const std::string& name) {
  if (name == "smw") return Backend::Smw;
  if (name == "ek") return Backend::Ek;
  if (name == "oracle" || name == "dense") return Backend::Oracle;
  throw Error(ErrorCode::InvalidArgument, "unknown backend '" + name + "' (smw | ek | oracle)");
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Smw: return "smw";
    case Backend::Ek: return "ek";
    case Backend::Oracle: return "oracle";
  }
  return "?";
}

Evaluator::Evaluator(const ParamLyapProblem& problem, Backend backend, const EvaluatorOptions& opt, const Mat* E)
    : problem_(problem), backend_(backend), opt_(opt) {
  problem_.validate();
  if (E) {
    require(E->rows() == problem.n() && E->cols() == problem.n(), ErrorCode::DimensionMismatch, "E must be n x n");
    has_E_ = true;
    E_ = *E;
  }
  if (backend_ == Backend::Oracle) return;
  if (problem_.X0.size() == 0) problem_.X0 = solve_lyap_schur(problem_.A0, problem_.Q);
  f0_ = has_E_ ? (E_ * problem_.X0).trace() : problem_.X0.trace();
  if (backend_ == Backend::Smw) {
    SmwSettings st = opt_.smw;
    st.keep_Z = false;
    off_ = std::make_unique<SmwOffline>(smw_offline(problem_, st));
    tf_ = make_trace_functional(*off_, has_E_ ? &E_ : nullptr);
  } else {
    reset_sequence();
  }
}

void Evaluator::reset_sequence() {
  recycle_.clear();
  if (backend_ == Backend::Ek) {
    Mat P(problem_.n(), 2 * problem_.k());
    P << problem_.X0 * problem_.Br, problem_.Bl;
    ek_ = std::make_unique<EkSolver>(problem_.A0, problem_.Bl, problem_.Br, P, opt_.ek, has_E_ ? &E_ : nullptr);
  }
}

EvalRecord Evaluator::evaluate(const Vec& v) {
  check_parameters(v, problem_.k());
  EvalRecord rec;
  rec.v = v;
  const auto t0 = std::chrono::steady_clock::now();
  switch (backend_) {
    case Backend::Smw: {
      if (!opt_.carry_recycle) recycle_.clear();
      const SMWResult res = smw_solve(*off_, v, &recycle_, opt_.solve);
      rec.f_value = smw_trace(*off_, v, res, tf_);
      rec.backward_error = res.stats.final_relres;
      rec.inner_iters = res.stats.iterations;
      rec.basis_dim = problem_.n();
      rec.converged = res.stats.status == SolveStatus::Converged;
      break;
    }
    case Backend::Ek: {
      const EkEvaluation ev = ek_->evaluate(v);
      rec.f_value = f0_ + ev.f_delta;
      rec.backward_error = ev.backward_error;
      rec.inner_iters = ev.inner_iters;
      rec.basis_dim = ev.basis_dim;
      rec.expansions = ev.expansions;
      rec.converged = ev.converged;
      break;
    }
    case Backend::Oracle: {
      const Mat Av = problem_.A(v);
      const Mat X = solve_lyap_schur(Av, problem_.Q);
      rec.f_value = has_E_ ? (E_ * X).trace() : X.trace();
      const double denom = 2.0 * Av.norm() * X.norm() + problem_.Q.norm();
      rec.backward_error = lyap_residual(Av, X, problem_.Q) / std::max(denom, 1e-300);
      rec.basis_dim = problem_.n();
      break;
    }
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace plyap
