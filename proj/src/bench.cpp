#include "paramlyap/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <set>

namespace plyap {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16g", x);
  return buf;
}

void fail(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::InvalidArgument, field + ": " + why);
}

NetworkModel network_for(const RunConfig& cfg) {
  const Mat L = laplacian_from_spec(cfg.topology);
  return assemble_network(L, example_agents(L.rows()));
}

SweepConfig sweep_config(const RunConfig& cfg, const NetworkModel& net) {
  SweepConfig sc;
  sc.perturbation = cfg.perturbation == "pair" ? PerturbationKind::Pair : PerturbationKind::SingleAgent;
  std::string dist = cfg.disturbance;
  if (dist.empty()) dist = sc.perturbation == PerturbationKind::Pair ? "all" : "single";
  sc.disturbance = dist == "all" ? DisturbanceKind::All : DisturbanceKind::SingleAgent;
  if (cfg.kset.empty()) {
    if (sc.perturbation == PerturbationKind::SingleAgent)
      for (Index k = 1; k <= net.agents(); ++k) sc.kset.push_back(k);
    else
      sc.kset.push_back(1);
  } else {
    for (long long k : cfg.kset) sc.kset.push_back(static_cast<Index>(k));
  }
  if (!cfg.grid.empty()) {
    sc.grid = cfg.grid;
  } else if (cfg.grid_scale == "full") {
    if (sc.perturbation == PerturbationKind::SingleAgent)
      for (int j = 0; j <= 20; ++j) sc.grid.push_back(-9.9 + j);
    else
      for (int j = 0; j < 40; ++j) sc.grid.push_back(-4.9 + 0.5 * j);
  } else {
    sc.grid = desk_grid(cfg.perturbation);
  }
  sc.backend = cfg.backend;
  sc.opt = cfg.evaluator_options();
  sc.threads = cfg.threads;
  return sc;
}

// stability decided independently of the sweep: symmetric eigensolver when
// the perturbed matrix is symmetric, general otherwise
bool brute_force_stable(const Mat& A) {
  if ((A - A.transpose()).norm() <= 1e-14 * A.norm()) {
    Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff() < 0.0;
  }
  Eigen::ComplexEigenSolver<CMat> es(A.cast<cplx>(), false);
  return es.eigenvalues().real().maxCoeff() < 0.0;
}

VibSpec vib_spec(const RunConfig& cfg, int i1, int i2) {
  VibSpec s;
  s.d = cfg.d;
  s.s = cfg.s;
  s.i1 = i1;
  s.i2 = i2;
  s.alpha = cfg.alpha;
  s.k1 = cfg.k1;
  s.k2 = cfg.k2;
  s.k3 = cfg.k3;
  return s;
}

Vec to_vec(const std::vector<double>& x) { return Eigen::Map<const Vec>(x.data(), static_cast<Index>(x.size())); }

std::string vib_id(const RunConfig& cfg, int i1, int i2) {
  return "vib-d" + std::to_string(cfg.d) + "-i1-" + std::to_string(i1) + "-i2-" + std::to_string(i2);
}

}  // namespace

void RunConfig::validate() const {
  if (problem != "vibration" && problem != "multiagent" && problem != "synthetic")
    fail("problem", "must be vibration, multiagent or synthetic");
  if (!(tol_gcrodr > 0)) fail("tol-gcrodr", "must be positive");
  if (maxit < 1) fail("maxit", "must be at least 1");
  if (recycle < 0) fail("recycle", "must be nonnegative");
  if (m_restart <= recycle) fail("recycle", "must be smaller than the restart length");
  if (pbar < -1) fail("pbar", "must be nonnegative (or -1 for the problem default)");
  if (!(eps > 0)) fail("eps", "must be positive");
  if (mmax < 1) fail("mmax", "must be at least 1");
  if (threads < 1) fail("threads", "must be at least 1");
  if (problem == "vibration") {
    if (d < 10 || d % 10 != 0) fail("d", "must be a positive multiple of 10");
    if (s < 0 || s > 2 * d + 1) fail("s", "out of range");
    if (i1.empty() || i2.empty()) fail("i1/i2", "need at least one damper position");
    for (int a : i1)
      if (a < 1 || a + d / 10 + d > 2 * d) fail("i1", "position " + std::to_string(a) + " out of range");
    for (int b : i2)
      if (b < d + 1 || b > 2 * d) fail("i2", "position " + std::to_string(b) + " out of range");
    if (!(alpha > 0)) fail("alpha", "must be positive");
    if (!(k1 > 0 && k2 > 0 && k3 > 0)) fail("k1/k2/k3", "must be positive");
    if (v0.size() != 3) fail("v0", "needs three viscosities");
    for (double x : v0)
      if (!(x > 0)) fail("v0", "viscosities must be positive");
    if (!(opt_tol > 0)) fail("opt-tol", "must be positive");
  } else if (problem == "multiagent") {
    if (perturbation != "single" && perturbation != "pair") fail("perturbation", "must be single or pair");
    if (!disturbance.empty() && disturbance != "single" && disturbance != "all")
      fail("disturbance", "must be single or all");
    if (grid_scale != "desk" && grid_scale != "full") fail("grid-scale", "must be desk or full");
    for (double g : grid)
      if (g == 0.0) fail("grid", "parameter values must be nonzero");
  } else {
    if (n < 2) fail("n", "must be at least 2");
    if (k < 1 || k > n) fail("k", "must lie in [1, n]");
    if (count < 1) fail("count", "must be at least 1");
  }
}

EvaluatorOptions RunConfig::evaluator_options() const {
  EvaluatorOptions o;
  o.smw.pbar = pbar >= 0 ? pbar : (problem == "multiagent" ? 5 : 50);
  o.smw.seed = seed;
  o.solve.gcrodr.tol = tol_gcrodr;
  o.solve.gcrodr.maxit = maxit;
  o.solve.gcrodr.m_restart = m_restart;
  o.solve.gcrodr.s = recycle;
  o.solve.precondition = precondition;
  o.ek.eps = eps;
  o.ek.m_max = mmax;
  o.ek.smw = o.smw;
  o.ek.solve = o.solve;
  return o;
}

const char* const kRunCsvHeader =
    "problem_id,v,f_value,backward_error,inner_iters,basis_dim,expansions,stable,wall_ms";

std::string format_v(const Vec& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += fmt(v(i));
  }
  return s;
}

void write_run_csv(std::ostream& os, const std::vector<CsvRow>& rows) {
  os << kRunCsvHeader << '\n';
  for (const CsvRow& r : rows) {
    os << r.problem_id << ',' << format_v(r.v) << ',' << fmt(r.f_value) << ',' << fmt(r.backward_error) << ','
       << r.inner_iters << ',' << r.basis_dim << ',' << r.expansions << ',' << (r.stable ? "true" : "false") << ','
       << fmt(r.wall_ms) << '\n';
  }
}

ParamLyapProblem synthetic_problem(Index n, Index k, std::uint64_t seed) {
  ParamLyapProblem p;
  p.A0 = random_stable(n, seed, 1.0);
  const double sc = 1.0 / std::sqrt(static_cast<double>(n));
  p.Bl = random_matrix(n, k, seed + 1) * sc;
  p.Br = random_matrix(n, k, seed + 2) * sc;
  const Mat C = random_matrix(n, 2, seed + 3);
  p.Q = C * C.transpose();
  return p;
}

std::vector<Vec> synthetic_sequence(Index k, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Vec base(k), step(k);
  for (Index i = 0; i < k; ++i) {
    base(i) = u(rng);
    step(i) = 0.01 * (u(rng) - 1.0);
  }
  std::vector<Vec> seq;
  for (int j = 0; j < count; ++j) seq.push_back(base + static_cast<double>(j) * step);
  return seq;
}

std::vector<double> desk_grid(const std::string& perturbation) {
  if (perturbation == "pair") return {-4.9, -0.4, 4.6, 9.6, 14.6};
  return {-9.9, -4.9, 0.1, 5.1, 10.1};
}

RunOutput run(const RunConfig& cfg) {
  cfg.validate();
  RunOutput out;
  const EvaluatorOptions eo = cfg.evaluator_options();
  if (cfg.problem == "vibration") {
    for (int a : cfg.i1) {
      for (int b : cfg.i2) {
        const auto t0 = std::chrono::steady_clock::now();
        const VibModel model = build_vib_model(vib_spec(cfg, a, b));
        CsvRow row;
        row.problem_id = vib_id(cfg, a, b);
        try {
          const OptimizeResult r = optimize_viscosities(model, to_vec(cfg.v0), cfg.opt_tol, cfg.backend, eo);
          row.v = r.v;
          row.f_value = r.energy;
          row.inner_iters = r.total_inner_iters;
          bool all_conv = true;
          for (const EvalRecord& e : r.history) {
            row.expansions += e.expansions;
            all_conv = all_conv && e.converged;
          }
          row.backward_error = r.history.back().backward_error;
          row.basis_dim = r.history.back().basis_dim;
          row.stable = is_stable(model.problem.A(r.v));
          row.ok = all_conv && row.stable;
          if (r.negative_probes > 0)
            out.summary.push_back(row.problem_id + ": optimizer probed " + std::to_string(r.negative_probes) +
                                  " nonpositive viscosity vectors");
        } catch (const Error& e) {
          row.v = to_vec(cfg.v0);
          row.f_value = row.backward_error = std::numeric_limits<double>::quiet_NaN();
          row.ok = false;
          out.summary.push_back(row.problem_id + ": " + e.what());
        }
        row.wall_ms = ms_since(t0);
        out.rows.push_back(std::move(row));
      }
    }
  } else if (cfg.problem == "multiagent") {
    const NetworkModel net = network_for(cfg);
    const SweepConfig sc = sweep_config(cfg, net);
    const GridSweep gs = sweep_grid(net, sc);
    Index brute = 0;
    for (Index k : sc.kset) {
      const PerturbationSpec pert = sc.perturbation == PerturbationKind::SingleAgent
                                        ? perturbation_single_agent(k, net.agents(), net.n)
                                        : perturbation_pair(k, net.agents(), net.n);
      for (const Vec& v : cartesian_grid(sc.grid, pert.nparams))
        brute += brute_force_stable(perturbed_matrix(net, pert, v)) ? 1 : 0;
    }
    for (const GridCell& c : gs.cells) {
      CsvRow row;
      row.problem_id = "ma-k" + std::to_string(c.k);
      row.v = c.v;
      row.stable = c.stable;
      if (c.stable) {
        row.f_value = c.error.empty() ? c.h2sq : std::numeric_limits<double>::quiet_NaN();
        row.backward_error = c.backward_error;
      } else {
        row.f_value = row.backward_error = std::numeric_limits<double>::quiet_NaN();
      }
      row.inner_iters = c.inner_iters;
      row.basis_dim = c.basis_dim;
      row.expansions = c.expansions;
      row.wall_ms = c.wall_ms;
      row.ok = c.stable && c.converged;
      out.rows.push_back(std::move(row));
    }
    out.summary.push_back("stable=" + std::to_string(gs.stable) + " unstable=" + std::to_string(gs.unstable) +
                          " brute_force_stable=" + std::to_string(brute) + " failed=" + std::to_string(gs.failed));
    for (const auto& [k, best] : gs.max_per_k)
      out.summary.push_back("k=" + std::to_string(k) + " max_h2sq=" + fmt(best));
  } else {
    const ParamLyapProblem prob = synthetic_problem(cfg.n, cfg.k, cfg.seed);
    Evaluator ev(prob, cfg.backend, eo);
    for (const Vec& v : synthetic_sequence(cfg.k, cfg.count, cfg.seed + 11)) {
      CsvRow row;
      row.problem_id = "syn-n" + std::to_string(cfg.n) + "-k" + std::to_string(cfg.k);
      row.v = v;
      try {
        const EvalRecord r = ev.evaluate(v);
        row.f_value = r.f_value;
        row.backward_error = r.backward_error;
        row.inner_iters = r.inner_iters;
        row.basis_dim = r.basis_dim;
        row.expansions = r.expansions;
        row.wall_ms = r.wall_ms;
        row.ok = r.converged;
      } catch (const Error& e) {
        row.f_value = row.backward_error = std::numeric_limits<double>::quiet_NaN();
        row.ok = false;
        out.summary.push_back(format_v(v) + ": " + e.what());
      }
      row.stable = is_stable(prob.A(v));
      row.ok = row.ok && row.stable;
      out.rows.push_back(std::move(row));
    }
  }
  for (const CsvRow& r : out.rows)
    if (!r.ok) out.exit_code = 2;
  return out;
}

const char* const kCompareCsvHeader = "problem_id,v,backend,f_value,f_oracle,rel_error,wall_ms,oracle_ms,time_ratio";

void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << kCompareCsvHeader << '\n';
  for (const CompareRow& r : rows) {
    const double ratio = r.wall_ms > 0 ? r.oracle_ms / r.wall_ms : std::numeric_limits<double>::quiet_NaN();
    os << r.problem_id << ',' << format_v(r.v) << ',' << r.backend << ',' << fmt(r.f_value) << ','
       << fmt(r.f_oracle) << ',' << fmt(r.rel_error) << ',' << fmt(r.wall_ms) << ',' << fmt(r.oracle_ms) << ','
       << fmt(ratio) << '\n';
  }
}

CompareOutput compare_backends(const RunConfig& cfg) {
  cfg.validate();
  CompareOutput out;
  const EvaluatorOptions eo = cfg.evaluator_options();
  struct Case {
    std::string id;
    ParamLyapProblem prob;
    Mat E;
    std::vector<Vec> params;
  };
  std::vector<Case> cases;
  if (cfg.problem == "vibration") {
    const VibModel model = build_vib_model(vib_spec(cfg, cfg.i1.front(), cfg.i2.front()));
    const Vec v0 = to_vec(cfg.v0);
    std::vector<Vec> ps{v0, 0.5 * v0, 2.0 * v0, v0.cwiseProduct(Vec::LinSpaced(3, 0.5, 2.0)),
                        v0.cwiseProduct(Vec::LinSpaced(3, 3.0, 0.3))};
    cases.push_back({vib_id(cfg, cfg.i1.front(), cfg.i2.front()), model.problem, Mat(), ps});
  } else if (cfg.problem == "multiagent") {
    const NetworkModel net = network_for(cfg);
    const SweepConfig sc = sweep_config(cfg, net);
    for (Index k : sc.kset) {
      const PerturbationSpec pert = sc.perturbation == PerturbationKind::SingleAgent
                                        ? perturbation_single_agent(k, net.agents(), net.n)
                                        : perturbation_pair(k, net.agents(), net.n);
      Case c{"ma-k" + std::to_string(k), h2_problem(net, pert), Mat(), {}};
      if (sc.disturbance == DisturbanceKind::SingleAgent) {
        const Index agent = sc.perturbation == PerturbationKind::SingleAgent ? k : (k + 1) / 2;
        const Mat E = disturbance_single(agent, net.agents(), net.n);
        c.E = E * E.transpose();
      }
      for (const Vec& v : cartesian_grid(sc.grid, pert.nparams))
        if (is_stable(perturbed_matrix(net, pert, v))) c.params.push_back(pert.diag(v));
      cases.push_back(std::move(c));
      if (cases.size() >= 4) break;
    }
  } else {
    cases.push_back({"syn-n" + std::to_string(cfg.n) + "-k" + std::to_string(cfg.k),
                     synthetic_problem(cfg.n, cfg.k, cfg.seed), Mat(),
                     synthetic_sequence(cfg.k, cfg.count, cfg.seed + 11)});
  }

  for (const Case& c : cases) {
    const Mat* E = c.E.size() ? &c.E : nullptr;
    Evaluator oracle(c.prob, Backend::Oracle, eo, E);
    std::vector<EvalRecord> ref;
    for (const Vec& v : c.params) ref.push_back(oracle.evaluate(v));
    for (Backend b : {Backend::Smw, Backend::Ek, Backend::Oracle}) {
      try {
        Evaluator ev(c.prob, b, eo, E);
        for (size_t i = 0; i < c.params.size(); ++i) {
          const EvalRecord r = ev.evaluate(c.params[i]);
          CompareRow row;
          row.problem_id = c.id;
          row.v = c.params[i];
          row.backend = backend_name(b);
          row.f_value = r.f_value;
          row.f_oracle = ref[i].f_value;
          row.rel_error = std::abs(r.f_value - ref[i].f_value) / std::max(std::abs(ref[i].f_value), 1e-300);
          row.wall_ms = r.wall_ms;
          row.oracle_ms = ref[i].wall_ms;
          if (!r.converged) out.exit_code = 2;
          out.rows.push_back(std::move(row));
        }
      } catch (const Error&) {
        out.exit_code = 2;
      }
    }
  }
  return out;
}

bool SelftestResult::all_passed() const {
  for (const auto& c : checks)
    if (!c.second) return false;
  return true;
}

SelftestResult selftest(std::uint64_t seed) {
  SelftestResult res;
  auto check = [&](const std::string& name, const std::function<bool()>& body) {
    bool ok = false;
    try {
      ok = body();
    } catch (const std::exception&) {
      ok = false;
    }
    res.checks.emplace_back(name, ok);
  };

  check("dense lyapunov residual", [&] {
    const Mat A = random_stable(25, seed, 0.5);
    const Mat C = random_matrix(25, 3, seed + 1);
    const Mat Q = C * C.transpose();
    return lyap_residual(A, solve_lyap_dense(A, Q), Q) <= 1e-10 * Q.norm() &&
           lyap_residual(A, solve_lyap_schur(A, Q), Q) <= 1e-10 * Q.norm();
  });

  check("smw matches dense oracle", [&] {
    const ParamLyapProblem p = synthetic_problem(30, 2, seed);
    const SmwOffline off = smw_offline(p);
    const Vec v = Vec::Constant(2, 0.7);
    const SMWResult r = smw_solve(off, v, nullptr);
    const Mat X = smw_assemble_X(off, v, r);
    const Mat Xo = solve_lyap_schur(p.A(v), p.Q);
    return (X - Xo).norm() <= 1e-8 * Xo.norm();
  });

  check("structured system operator", [&] {
    const ParamLyapProblem p = synthetic_problem(12, 2, seed + 5);
    const SmwOffline off = smw_offline(p);
    const Vec v = Vec::LinSpaced(2, 0.5, 1.5);
    const CMat b12 = smw_block12_dense(off), b21 = smw_block21_dense(off);
    const CVec x = random_matrix(2 * 12 * 2, 2, seed).col(0).cast<cplx>();
    const CVec y1 = smw_apply_system(off, v, x), y2 = smw_apply_system_blocks(off, v, x, b12, b21);
    return (y1 - y2).norm() <= 1e-12 * y2.norm();
  });

  check("full-rank preconditioner converges in two steps", [&] {
    const ParamLyapProblem p = synthetic_problem(10, 2, seed + 6);
    SmwSettings st;
    st.pbar = 20;
    const SmwOffline off = smw_offline(p, st);
    const Vec v = Vec::Constant(2, 1.3);
    SmwSolveOptions so;
    so.gcrodr.s = 0;
    return smw_solve(off, v, nullptr, so).stats.iterations <= 2;
  });

  check("extended Krylov full space is exact", [&] {
    const ParamLyapProblem p = synthetic_problem(16, 1, seed + 7);
    const Vec v = Vec::Constant(1, 0.8);
    const std::vector<Vec> vs{v};
    const SweepReport rep = ek_sweep(p, vs, 1e-12, 50);
    const Mat Xo = solve_lyap_schur(p.A(v), p.Q);
    return rep.records[0].converged && std::abs(rep.records[0].f_value - Xo.trace()) <= 1e-8 * std::abs(Xo.trace());
  });

  check("vibration closed-form X0", [&] {
    VibSpec s;
    s.d = 10;
    s.i1 = 2;
    s.i2 = 15;
    s.s = 3;
    const VibModel m = build_vib_model(s);
    const auto& p = m.problem;
    return lyap_residual(p.A0, p.X0, p.Q) <= 1e-10 * p.Q.norm();
  });

  check("rayleigh closed-form X0", [&] {
    const Mat M = random_spd(6, seed + 8), K = random_spd(6, seed + 9);
    const RayleighModel r = build_rayleigh_model(M, K, 0.3, 0.1, Mat::Identity(6, 2));
    return lyap_residual(r.A0, r.X0, r.Q) <= 1e-10 * r.Q.norm();
  });

  check("alg2 Laplacian invariants", [&] {
    const Mat L = laplacian_alg2(200);
    return (L - L.transpose()).norm() == 0.0 && L.rowwise().sum().cwiseAbs().maxCoeff() == 0.0;
  });

  check("gcrodr identity system", [&] {
    const CVec b = random_matrix(20, 1, seed).col(0).cast<cplx>();
    const LinearOp A = [](const CVec& x, CVec& y) { y = x; };
    const GcrodrResult r = gcrodr_solve(A, LinearOp(), b, nullptr, GcrodrOptions{}, nullptr);
    return r.stats.iterations == 1 && (r.x - b).norm() <= 1e-14 * b.norm();
  });

  return res;
}

}  // namespace plyap
