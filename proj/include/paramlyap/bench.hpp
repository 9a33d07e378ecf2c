#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "paramlyap/multiagent.hpp"
#include "paramlyap/vibration.hpp"

namespace plyap {

struct RunConfig {
  std::string problem = "vibration";  // vibration | multiagent | synthetic
  Backend backend = Backend::Smw;

  double tol_gcrodr = 1e-10;
  int maxit = 300;
  int m_restart = 80;
  int recycle = 10;
  int pbar = -1;  // -1: 5 for multiagent, 50 otherwise
  double eps = 1e-8;
  int mmax = 120;
  bool precondition = true;

  // vibration
  int d = 50;
  int s = 5;
  std::vector<int> i1{5};
  std::vector<int> i2{60};
  double alpha = 0.04;
  double k1 = 40.0, k2 = 20.0, k3 = 30.0;
  std::vector<double> v0{100.0, 100.0, 100.0};
  double opt_tol = 1e-4;

  // multiagent
  std::string topology = "ring:16";
  std::string perturbation = "single";  // single | pair
  std::string disturbance = "";         // single | all; empty picks the perturbation's default
  std::vector<long long> kset;          // empty: every agent (single) or {1} (pair)
  std::vector<double> grid;             // empty: the desk-scale grid
  std::string grid_scale = "desk";

  // synthetic
  int n = 60;
  int k = 2;
  int count = 20;

  std::uint64_t seed = 7;
  int threads = 1;
  std::string out;

  void validate() const;  // throws Error(InvalidArgument) naming the field
  EvaluatorOptions evaluator_options() const;
};

struct CsvRow {
  std::string problem_id;
  Vec v;
  double f_value = 0.0;
  double backward_error = 0.0;
  long long inner_iters = 0;
  long long basis_dim = 0;
  long long expansions = 0;
  bool stable = true;
  double wall_ms = 0.0;
  bool ok = true;  // converged and stable
};

struct RunOutput {
  std::vector<CsvRow> rows;
  std::vector<std::string> summary;
  int exit_code = 0;
};

extern const char* const kRunCsvHeader;
void write_run_csv(std::ostream& os, const std::vector<CsvRow>& rows);
std::string format_v(const Vec& v);

RunOutput run(const RunConfig& cfg);

struct CompareRow {
  std::string problem_id;
  Vec v;
  std::string backend;
  double f_value = 0.0;
  double f_oracle = 0.0;
  double rel_error = 0.0;
  double wall_ms = 0.0;
  double oracle_ms = 0.0;
};

struct CompareOutput {
  std::vector<CompareRow> rows;
  int exit_code = 0;
};

extern const char* const kCompareCsvHeader;
void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows);
CompareOutput compare_backends(const RunConfig& cfg);

struct SelftestResult {
  std::vector<std::pair<std::string, bool>> checks;
  bool all_passed() const;
};

SelftestResult selftest(std::uint64_t seed = 7);

// shared problem generators
ParamLyapProblem synthetic_problem(Index n, Index k, std::uint64_t seed);
std::vector<Vec> synthetic_sequence(Index k, int count, std::uint64_t seed);
std::vector<double> desk_grid(const std::string& perturbation);

}  // namespace plyap
