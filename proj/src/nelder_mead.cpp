#include "paramlyap/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace plyap {

NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0,
                             const NelderMeadOptions& opt) {
  const Index n = x0.size();
  require(n > 0, ErrorCode::InvalidArgument, "nelder_mead needs at least one variable");
  const int max_evals = opt.max_evals > 0 ? opt.max_evals : static_cast<int>(200 * n);
  const int max_iters = opt.max_iters > 0 ? opt.max_iters : static_cast<int>(200 * n);

  NelderMeadResult res;
  std::vector<Vec> x(static_cast<size_t>(n + 1));
  std::vector<double> fv(static_cast<size_t>(n + 1));
  auto eval = [&](const Vec& p) {
    ++res.evals;
    return f(p);
  };

  x[0] = x0;
  fv[0] = eval(x0);
  for (Index j = 0; j < n; ++j) {
    Vec y = x0;
    y(j) = (y(j) != 0.0) ? 1.05 * y(j) : 0.00025;
    x[static_cast<size_t>(j + 1)] = y;
    fv[static_cast<size_t>(j + 1)] = eval(y);
  }

  std::vector<size_t> idx(static_cast<size_t>(n + 1));
  auto sort_simplex = [&]() {
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return fv[a] < fv[b]; });
    std::vector<Vec> xs(idx.size());
    std::vector<double> fs(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
      xs[i] = x[idx[i]];
      fs[i] = fv[idx[i]];
    }
    x.swap(xs);
    fv.swap(fs);
  };
  sort_simplex();

  const double eps = std::numeric_limits<double>::epsilon();
  const size_t last = static_cast<size_t>(n);
  while (true) {
    double fspread = 0.0, xspread = 0.0;
    for (size_t i = 1; i <= last; ++i) {
      fspread = std::max(fspread, std::abs(fv[0] - fv[i]));
      xspread = std::max(xspread, (x[i] - x[0]).cwiseAbs().maxCoeff());
    }
    const double ftol = std::max(opt.tol_f, 10.0 * eps * std::abs(fv[0]));
    const double xtol = std::max(opt.tol_x, 10.0 * eps * x[0].cwiseAbs().maxCoeff());
    if (fspread <= ftol && xspread <= xtol) {
      res.converged = true;
      break;
    }
    if (res.evals >= max_evals || res.iterations >= max_iters) break;
    ++res.iterations;

    Vec xbar = Vec::Zero(n);
    for (size_t i = 0; i < last; ++i) xbar += x[i];
    xbar /= static_cast<double>(n);

    const Vec xr = 2.0 * xbar - x[last];
    const double fr = eval(xr);
    bool shrink = false;
    if (fr < fv[0]) {
      const Vec xe = 3.0 * xbar - 2.0 * x[last];
      const double fe = eval(xe);
      if (fe < fr) {
        x[last] = xe;
        fv[last] = fe;
      } else {
        x[last] = xr;
        fv[last] = fr;
      }
    } else if (fr < fv[last - 1]) {
      x[last] = xr;
      fv[last] = fr;
    } else if (fr < fv[last]) {
      const Vec xc = 1.5 * xbar - 0.5 * x[last];
      const double fc = eval(xc);
      if (fc <= fr) {
        x[last] = xc;
        fv[last] = fc;
      } else {
        shrink = true;
      }
    } else {
      const Vec xcc = 0.5 * xbar + 0.5 * x[last];
      const double fcc = eval(xcc);
      if (fcc < fv[last]) {
        x[last] = xcc;
        fv[last] = fcc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (size_t i = 1; i <= last; ++i) {
        x[i] = x[0] + 0.5 * (x[i] - x[0]);
        fv[i] = eval(x[i]);
      }
    }
    sort_simplex();
  }

  res.x = x[0];
  res.fval = fv[0];
  if (!res.converged && opt.throw_on_budget) {
    throw Error(ErrorCode::EvaluationBudgetExceeded,
                "simplex search stopped after " + std::to_string(res.evals) + " evaluations");
  }
  return res;
}

}  // namespace plyap
