#pragma once

#include <functional>

#include "paramlyap/types.hpp"

namespace plyap {

struct NelderMeadOptions {
  double tol_x = 1e-4;
  double tol_f = 1e-4;
  int max_evals = 0;  // 0 means 200 * dim
  int max_iters = 0;  // 0 means 200 * dim
  bool throw_on_budget = true;
};

struct NelderMeadResult {
  Vec x;
  double fval = 0.0;
  int evals = 0;
  int iterations = 0;
  bool converged = false;
};

// Unconstrained simplex search with the usual coefficients (1, 2, 0.5, 0.5)
// and the fminsearch-style start simplex and stopping test.
NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0,
                             const NelderMeadOptions& opt = {});

}  // namespace plyap
