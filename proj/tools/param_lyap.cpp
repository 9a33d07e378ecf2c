#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "paramlyap/bench.hpp"

using namespace plyap;

namespace {

struct CliState {
  RunConfig cfg;
  std::string backend = "smw";
  int m = 0;
  bool selftest = false;
};

void add_common(CLI::App* sub, CliState& st) {
  RunConfig& c = st.cfg;
  sub->set_config("--config", "", "TOML or INI file with option defaults");
  sub->add_option("--problem", c.problem, "vibration | multiagent | synthetic")->capture_default_str();
  sub->add_option("--backend", st.backend, "smw | ek | oracle")->capture_default_str();
  sub->add_option("--out", c.out, "CSV output path (stdout when empty)");
  sub->add_option("--seed", c.seed)->capture_default_str();
  sub->add_option("--threads", c.threads)->capture_default_str();

  sub->add_option("--tol-gcrodr", c.tol_gcrodr)->capture_default_str();
  sub->add_option("--maxit", c.maxit)->capture_default_str();
  sub->add_option("--restart", c.m_restart, "GCRO-DR cycle length")->capture_default_str();
  sub->add_option("--recycle", c.recycle, "recycled subspace dimension")->capture_default_str();
  sub->add_option("--pbar", c.pbar, "TSVD rank in the preconditioner (-1: 5 for multiagent, 50 otherwise)")->capture_default_str();
  sub->add_flag("!--no-precondition", c.precondition, "disable the preconditioner");
  sub->add_option("--eps", c.eps, "extended Krylov backward error tolerance")->capture_default_str();
  sub->add_option("--mmax", c.mmax)->capture_default_str();

  sub->add_option("--d", c.d)->capture_default_str();
  sub->add_option("--s", c.s)->capture_default_str();
  sub->add_option("--i1", c.i1)->delimiter(',');
  sub->add_option("--i2", c.i2)->delimiter(',');
  sub->add_option("--alpha", c.alpha)->capture_default_str();
  sub->add_option("--k1", c.k1)->capture_default_str();
  sub->add_option("--k2", c.k2)->capture_default_str();
  sub->add_option("--k3", c.k3)->capture_default_str();
  sub->add_option("--v0", c.v0)->delimiter(',');
  sub->add_option("--opt-tol", c.opt_tol)->capture_default_str();

  sub->add_option("--m", st.m, "number of agents on a ring when --topology is not given");
  sub->add_option("--topology", c.topology, "ring:N, grid:RxC, alg2:M or an edge-list file")->capture_default_str();
  sub->add_option("--perturbation", c.perturbation, "single | pair")->capture_default_str();
  sub->add_option("--disturbance", c.disturbance, "single | all");
  sub->add_option("--kset", c.kset)->delimiter(',');
  sub->add_option("--grid", c.grid)->delimiter(',');
  sub->add_option("--grid-scale", c.grid_scale, "desk | full")->capture_default_str();

  sub->add_option("--n", c.n)->capture_default_str();
  sub->add_option("--k", c.k)->capture_default_str();
  sub->add_option("--count", c.count)->capture_default_str();
}

int finish_config(CLI::App* sub, CliState& st) {
  try {
    st.cfg.backend = parse_backend(st.backend);
  } catch (const Error& e) {
    std::cerr << "backend: " << e.what() << '\n';
    return 1;
  }
  if (st.m > 0 && sub->count("--topology") == 0) st.cfg.topology = "ring:" + std::to_string(st.m);
  try {
    st.cfg.validate();
  } catch (const Error& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run_selftest(std::uint64_t seed) {
  const SelftestResult r = selftest(seed);
  for (const auto& [name, ok] : r.checks) std::cout << (ok ? "PASS " : "FAIL ") << name << '\n';
  return r.all_passed() ? 0 : 2;
}

template <class Writer>
bool emit(const std::string& path, Writer&& w) {
  if (path.empty()) {
    w(std::cout);
    return true;
  }
  std::ofstream f(path);
  if (!f) {
    std::cerr << "cannot open " << path << '\n';
    return false;
  }
  w(f);
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametrized Lyapunov equation solver and benchmark driver", "param-lyap"};
  app.require_subcommand(1);

  CliState run_st, cmp_st;
  std::uint64_t st_seed = 7;
  CLI::App* run_cmd = app.add_subcommand("run", "solve a configured problem and write a CSV report");
  add_common(run_cmd, run_st);
  run_cmd->add_flag("--selftest", run_st.selftest, "run the invariant self-tests instead");
  CLI::App* cmp_cmd = app.add_subcommand("compare", "compare the backends against the dense oracle");
  add_common(cmp_cmd, cmp_st);
  CLI::App* self_cmd = app.add_subcommand("selftest", "run quick invariant checks of every module");
  self_cmd->add_option("--seed", st_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (self_cmd->parsed()) return run_selftest(st_seed);

    if (run_cmd->parsed()) {
      if (run_st.selftest) return run_selftest(run_st.cfg.seed);
      if (int rc = finish_config(run_cmd, run_st)) return rc;
      const RunOutput out = run(run_st.cfg);
      if (!emit(run_st.cfg.out, [&](std::ostream& os) { write_run_csv(os, out.rows); })) return 1;
      for (const std::string& line : out.summary) std::cerr << line << '\n';
      return out.exit_code;
    }

    if (int rc = finish_config(cmp_cmd, cmp_st)) return rc;
    const CompareOutput out = compare_backends(cmp_st.cfg);
    if (!emit(cmp_st.cfg.out, [&](std::ostream& os) { write_compare_csv(os, out.rows); })) return 1;
    return out.exit_code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::IndexOutOfRange ? 1 : 2;
  }
}
