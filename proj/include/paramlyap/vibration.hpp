#pragma once

#include <vector>

#include "paramlyap/evaluator.hpp"
#include "paramlyap/nelder_mead.hpp"

namespace plyap {

// Two rows of d masses tied to one extra mass; three dampers:
// grounded on row 1 at i1, between the rows at i1 + d/10, grounded on row 2 at i2.
struct VibSpec {
  int d = 50;
  double k1 = 40.0, k2 = 20.0, k3 = 30.0;
  double alpha = 0.04;
  int s = 0;  // 0: Q = I/n, otherwise the first s modes only
  int i1 = 5;
  int i2 = 60;  // 1-based mass indices

  void validate() const;
};

struct VibModel {
  Mat M, K;
  ModalPair modal;
  Mat B;  // physical damper geometry, (2d+1) x 3
  ParamLyapProblem problem;
  Index n() const { return problem.n(); }
};

Vec mass_config(int d);
void build_mass_spring(const VibSpec& spec, Mat& M, Mat& K);
Mat damper_geometry(int d, int i1, int i2);

// X0 of the critical-damping linearization for Q = I/n (s = 0) or the
// s-mode selection
Mat critical_damping_X0(const Vec& Omega, double alpha, int s);
Mat critical_damping_Q(Index m, int s);

VibModel build_vib_model(const VibSpec& spec);

struct RayleighModel {
  Mat A0, Bl, Br, Q, X0;
  CVec eigs;  // closed-form eigenvalues of A0
};

// Rayleigh damping alpha M + beta K with the energy-norm measure Q = diag(K^{-1}, M^{-1})
RayleighModel build_rayleigh_model(const Mat& M, const Mat& K, double alpha, double beta, const Mat& B);

double total_energy(const VibModel& model, const Vec& v, Backend backend, const EvaluatorOptions& opt = {});

struct OptimizeResult {
  Vec v;
  double energy = 0.0;
  int evals = 0;
  bool converged = false;
  int negative_probes = 0;
  int total_inner_iters = 0;
  std::vector<EvalRecord> history;
};

OptimizeResult optimize_viscosities(const VibModel& model, const Vec& v0, double tol, Backend backend,
                                    const EvaluatorOptions& opt = {});

}  // namespace plyap
