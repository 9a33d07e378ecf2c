#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "paramlyap/bench.hpp"

namespace py = pybind11;
using namespace plyap;

namespace {

ParamLyapProblem make_problem(const Mat& A0, const Mat& Bl, const Mat& Br, const Mat& Q, const Mat& X0) {
  ParamLyapProblem p;
  p.A0 = A0;
  p.Bl = Bl;
  p.Br = Br;
  p.Q = Q;
  p.X0 = X0;
  p.validate();
  return p;
}

EvaluatorOptions options_from(double tol, int maxit, int recycle, int pbar, double eps, int mmax, bool precondition) {
  RunConfig c;
  c.tol_gcrodr = tol;
  c.maxit = maxit;
  c.recycle = recycle;
  c.pbar = pbar;
  c.eps = eps;
  c.mmax = mmax;
  c.precondition = precondition;
  c.validate();
  return c.evaluator_options();
}

py::dict record_dict(const EvalRecord& r) {
  py::dict d;
  d["v"] = r.v;
  d["f_value"] = r.f_value;
  d["backward_error"] = r.backward_error;
  d["inner_iters"] = r.inner_iters;
  d["basis_dim"] = r.basis_dim;
  d["expansions"] = r.expansions;
  d["converged"] = r.converged;
  d["wall_ms"] = r.wall_ms;
  return d;
}

py::dict vib_dict(const VibModel& m) {
  py::dict d;
  d["M"] = m.M;
  d["K"] = m.K;
  d["Omega"] = m.modal.Omega;
  d["Phi"] = m.modal.Phi;
  d["A0"] = m.problem.A0;
  d["Bl"] = m.problem.Bl;
  d["Br"] = m.problem.Br;
  d["Q"] = m.problem.Q;
  d["X0"] = m.problem.X0;
  return d;
}

VibSpec vib_spec(int d, int s, int i1, int i2, double alpha, double k1, double k2, double k3) {
  VibSpec spec;
  spec.d = d;
  spec.s = s;
  spec.i1 = i1;
  spec.i2 = i2;
  spec.alpha = alpha;
  spec.k1 = k1;
  spec.k2 = k2;
  spec.k3 = k3;
  return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Parametrized Lyapunov equations with low-rank parameter dependence";

  static py::exception<Error> exc(m, "ParamLyapError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = exc;
      err.attr("code") = py::str(error_name(e.code()));
      exc(e.what());
    }
  });

  m.def("solve_lyap", &solve_lyap_schur, py::arg("A"), py::arg("Q"),
        "Solve A X + X A^T = -Q with the Bartels-Stewart reference solver.");
  m.def("lyap_residual", &lyap_residual, py::arg("A"), py::arg("X"), py::arg("Q"));

  py::class_<Evaluator>(m, "Evaluator")
      .def(py::init([](const Mat& A0, const Mat& Bl, const Mat& Br, const Mat& Q, const std::string& backend,
                       const Mat& X0, std::optional<Mat> E, double tol, int maxit, int recycle, int pbar, double eps,
                       int mmax, bool precondition) {
             const ParamLyapProblem p = make_problem(A0, Bl, Br, Q, X0);
             const EvaluatorOptions o = options_from(tol, maxit, recycle, pbar, eps, mmax, precondition);
             return std::make_unique<Evaluator>(p, parse_backend(backend), o, E ? &*E : nullptr);
           }),
           py::arg("A0"), py::arg("Bl"), py::arg("Br"), py::arg("Q"), py::arg("backend") = "smw",
           py::arg("X0") = Mat(), py::arg("E") = py::none(), py::arg("tol") = 1e-10, py::arg("maxit") = 300,
           py::arg("recycle") = 10, py::arg("pbar") = 50, py::arg("eps") = 1e-8, py::arg("mmax") = 120,
           py::arg("precondition") = true)
      .def("evaluate", [](Evaluator& ev, const Vec& v) { return record_dict(ev.evaluate(v)); }, py::arg("v"),
           "trace(E X(v)) with solver statistics")
      .def("reset", &Evaluator::reset_sequence)
      .def_property_readonly("backend", [](const Evaluator& ev) { return std::string(backend_name(ev.backend())); });

  m.def(
      "smw_solution",
      [](const Mat& A0, const Mat& Bl, const Mat& Br, const Mat& Q, const Vec& v, double tol) {
        const ParamLyapProblem p = make_problem(A0, Bl, Br, Q, Mat());
        const SmwOffline off = smw_offline(p);
        SmwSolveOptions so;
        so.gcrodr.tol = tol;
        const SMWResult r = smw_solve(off, v, nullptr, so);
        return smw_assemble_X(off, v, r, false);
      },
      py::arg("A0"), py::arg("Bl"), py::arg("Br"), py::arg("Q"), py::arg("v"), py::arg("tol") = 1e-10,
      "Full solution X(v) assembled from the low-rank update.");

  m.def("mass_config", &mass_config, py::arg("d"));
  m.def(
      "vibration_model",
      [](int d, int s, int i1, int i2, double alpha, double k1, double k2, double k3) {
        return vib_dict(build_vib_model(vib_spec(d, s, i1, i2, alpha, k1, k2, k3)));
      },
      py::arg("d") = 50, py::arg("s") = 5, py::arg("i1") = 5, py::arg("i2") = 60, py::arg("alpha") = 0.04,
      py::arg("k1") = 40.0, py::arg("k2") = 20.0, py::arg("k3") = 30.0);
  m.def(
      "optimize_viscosities",
      [](int d, int s, int i1, int i2, const Vec& v0, double tol, const std::string& backend, double alpha) {
        const VibModel model = build_vib_model(vib_spec(d, s, i1, i2, alpha, 40.0, 20.0, 30.0));
        const OptimizeResult r = optimize_viscosities(model, v0, tol, parse_backend(backend));
        py::dict out;
        out["v"] = r.v;
        out["energy"] = r.energy;
        out["evals"] = r.evals;
        out["negative_probes"] = r.negative_probes;
        int expansions = 0;
        for (const auto& h : r.history) expansions += h.expansions;
        out["expansions"] = expansions;
        return out;
      },
      py::arg("d"), py::arg("s"), py::arg("i1"), py::arg("i2"), py::arg("v0"), py::arg("tol") = 1e-4,
      py::arg("backend") = "smw", py::arg("alpha") = 0.04);

  m.def("laplacian", &laplacian_from_spec, py::arg("spec"), "Laplacian from 'ring:N', 'grid:RxC', 'alg2:M' or a file.");
  m.def(
      "network_matrix", [](const Mat& L) { return assemble_network(L, example_agents(L.rows())).A; }, py::arg("L"),
      "Network system matrix for the example agents.");
  m.def("is_stable", &is_stable, py::arg("A"));
  m.def("h2_sq", &h2_sq, py::arg("A"), py::arg("E"), py::arg("C"));

  m.def(
      "selftest",
      [](std::uint64_t seed) {
        std::vector<std::pair<std::string, bool>> out = selftest(seed).checks;
        return out;
      },
      py::arg("seed") = 7);
}
