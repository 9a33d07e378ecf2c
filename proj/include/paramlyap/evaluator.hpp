#pragma once

#include <memory>
#include <string>

#include "paramlyap/ek.hpp"
#include "paramlyap/smw.hpp"

namespace plyap {

enum class Backend { Smw, Ek, Oracle };

Backend parse_backend(const std::string& name);
const char* backend_name(Backend b);

struct EvaluatorOptions {
  SmwSettings smw;
  SmwSolveOptions solve;
  EkOptions ek;
  bool carry_recycle = true;  // one recycle space threaded through the sequence
};

struct EvalRecord {
  Vec v;
  double f_value = 0.0;
  double backward_error = 0.0;  // smw: inner relres, ek: projected backward error, oracle: residual ratio
  int inner_iters = 0;
  Index basis_dim = 0;
  int expansions = 0;
  bool converged = true;
  double wall_ms = 0.0;
};

// f(v) = trace(E X(v)) for one problem and a sequence of parameters.  Keeps
// the offline data and the sequential state (recycle space or EK basis).
class Evaluator {
 public:
  Evaluator(const ParamLyapProblem& problem, Backend backend, const EvaluatorOptions& opt = {},
            const Mat* E = nullptr);

  EvalRecord evaluate(const Vec& v);
  Backend backend() const { return backend_; }
  const ParamLyapProblem& problem() const { return problem_; }
  const SmwOffline* smw_offline_data() const { return off_.get(); }
  void reset_sequence();

 private:
  ParamLyapProblem problem_;
  Backend backend_;
  EvaluatorOptions opt_;
  bool has_E_ = false;
  Mat E_;
  double f0_ = 0.0;
  std::unique_ptr<SmwOffline> off_;
  TraceFunctional tf_;
  RecycleSpace recycle_;
  std::unique_ptr<EkSolver> ek_;
};

}  // namespace plyap
