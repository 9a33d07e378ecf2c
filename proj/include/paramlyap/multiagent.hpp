#pragma once

#include <functional>
#include <string>
#include <vector>

#include "paramlyap/evaluator.hpp"

namespace plyap {

struct AgentSet {
  std::vector<Mat> A, B, C, K;
  Index count() const { return static_cast<Index>(A.size()); }
  Index state_dim() const { return A.empty() ? 0 : A.front().rows(); }
};

// m copies of the 2x2 agent used in the network examples
AgentSet example_agents(Index m);

Mat laplacian_alg2(Index m);
Mat laplacian_ring(Index m);
Mat laplacian_grid(Index rows, Index cols);
Mat laplacian_from_edges(Index m, const std::vector<std::pair<Index, Index>>& edges);
// "ring:N", "grid:RxC", "alg2:M" or a path to a whitespace separated edge list (1-based)
Mat laplacian_from_spec(const std::string& spec);

struct NetworkModel {
  Mat L;
  Mat A;  // network system matrix
  Mat C;  // blkdiag(C_i)
  Index n = 0;  // agent state size
  Index agents() const { return L.rows(); }
};

NetworkModel assemble_network(const Mat& L, const AgentSet& agents);

struct PerturbationSpec {
  Mat Bl, Br;  // nm x 4, perturbation of the network matrix itself: A - Bl D Br^T
  std::function<Vec(const Vec&)> param_map;  // v -> diagonal of D
  Index index = 0;
  Index nparams = 0;
  Vec diag(const Vec& v) const { return param_map(v); }
};

PerturbationSpec perturbation_single_agent(Index k, Index m, Index n = 2);
PerturbationSpec perturbation_pair(Index k, Index m, Index n = 2);

bool is_stable(const Mat& A);
Mat perturbed_matrix(const NetworkModel& net, const PerturbationSpec& pert, const Vec& v);

// A^T X + X A = -C^T C written as a problem of the library's form: coefficient
// A^T, low-rank factors swapped, Q = C^T C.
ParamLyapProblem h2_problem(const NetworkModel& net, const PerturbationSpec& pert);
Mat disturbance_single(Index k, Index m, Index n);  // e_k (x) I_n

// trace(E E^T X) for A^T X + X A = -C^T C
double h2_sq(const Mat& A, const Mat& E, const Mat& C);

struct GridCell {
  Index k = 0;
  Vec v;
  bool stable = false;
  double h2sq = 0.0;
  double backward_error = 0.0;
  int inner_iters = 0;
  Index basis_dim = 0;
  int expansions = 0;
  double wall_ms = 0.0;
  bool converged = true;
  std::string error;
};

struct GridSweep {
  std::vector<GridCell> cells;
  Index stable = 0;
  Index unstable = 0;
  Index failed = 0;
  std::vector<std::pair<Index, double>> max_per_k;
};

enum class PerturbationKind { SingleAgent, Pair };
enum class DisturbanceKind { SingleAgent, All };

struct SweepConfig {
  PerturbationKind perturbation = PerturbationKind::SingleAgent;
  DisturbanceKind disturbance = DisturbanceKind::SingleAgent;
  std::vector<Index> kset;
  std::vector<double> grid;  // values taken by every parameter
  Backend backend = Backend::Smw;
  EvaluatorOptions opt;
  int threads = 1;  // parallel over kset; results merged in kset order
};

std::vector<Vec> cartesian_grid(const std::vector<double>& values, Index dim);
GridSweep sweep_grid(const NetworkModel& net, const SweepConfig& cfg);

}  // namespace plyap
