#include "paramlyap/multiagent.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <thread>
#include <fstream>
#include <sstream>

namespace plyap {

AgentSet example_agents(Index m) {
  AgentSet s;
  Mat A(2, 2), K(2, 2), B(2, 2);
  A << -10, 5, 5, -8;
  K << 0.3, 0, 0, 0.2;
  B << 1, 1, -1, 1;
  for (Index i = 0; i < m; ++i) {
    s.A.push_back(A);
    s.B.push_back(B);
    s.C.push_back(B.transpose());
    s.K.push_back(K);
  }
  return s;
}

Mat laplacian_alg2(Index m) {
  require(m > 0 && m % 200 == 0, ErrorCode::IndivisibleSize, "alg2 topology needs m divisible by 200");
  // 1-based transcription; L1(i,j) addresses L(i-1,j-1)
  Mat L = Mat::Zero(m, m);
  auto L1 = [&](Index i, Index j) -> double& { return L(i - 1, j - 1); };
  std::vector<Index> r, h;
  auto range = [](std::vector<Index>& out, Index a, Index b) {
    for (Index i = a; i <= b; ++i) out.push_back(i);
  };
  range(r, m / 20 + m / 50, m / 10);
  range(r, m / 4 + m / 20, m / 4 + m / 10);
  range(r, m / 2 + m / 20 + 2, m / 2 + m / 20 + m / 50);
  range(r, m / 2 + m / 10 + 2, m / 2 + m / 10 + m / 20);
  range(r, m - m / 10, m - m / 20);
  range(h, 1, m / 20);
  range(h, m / 10 + m / 40, m / 10 + m / 20);
  range(h, m / 2, m / 2 + m / 20);
  h.push_back(m - 1);

  for (Index i = 1; i <= m - 2; ++i) {
    L1(i, i + 1) = -1;
    L1(i, m) = -1;
  }
  L1(1, m - 1) = -1;
  L1(m - 1, m) = -1;
  for (Index ri : r) {
    if (ri == m - 1) L1(1, m - 1) = 0;
    else L1(ri, ri + 1) = 0;
  }
  for (Index hi : h) L1(hi, m) = 0;
  L = (L + L.transpose()).eval();
  for (Index i = 0; i < m; ++i) {
    L(i, i) = 0;
    L(i, i) = -L.row(i).sum();
  }
  return L;
}

Mat laplacian_from_edges(Index m, const std::vector<std::pair<Index, Index>>& edges) {
  require(m > 0, ErrorCode::InvalidArgument, "graph needs at least one node");
  Mat L = Mat::Zero(m, m);
  for (const auto& [a, b] : edges) {
    require(a >= 0 && a < m && b >= 0 && b < m, ErrorCode::IndexOutOfRange, "edge endpoint out of range");
    if (a == b || L(a, b) != 0.0) continue;
    L(a, b) = L(b, a) = -1.0;
    L(a, a) += 1.0;
    L(b, b) += 1.0;
  }
  return L;
}

Mat laplacian_ring(Index m) {
  require(m >= 3, ErrorCode::InvalidArgument, "ring needs at least 3 nodes");
  std::vector<std::pair<Index, Index>> e;
  for (Index i = 0; i < m; ++i) e.emplace_back(i, (i + 1) % m);
  return laplacian_from_edges(m, e);
}

Mat laplacian_grid(Index rows, Index cols) {
  require(rows >= 1 && cols >= 1, ErrorCode::InvalidArgument, "grid dimensions");
  std::vector<std::pair<Index, Index>> e;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      const Index id = i * cols + j;
      if (j + 1 < cols) e.emplace_back(id, id + 1);
      if (i + 1 < rows) e.emplace_back(id, id + cols);
    }
  return laplacian_from_edges(rows * cols, e);
}

Mat laplacian_from_spec(const std::string& spec) {
  auto num = [&](const std::string& s) {
    try {
      size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos != s.size() || v <= 0) throw std::invalid_argument(s);
      return static_cast<Index>(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad topology size '" + s + "'");
    }
  };
  if (spec.rfind("ring:", 0) == 0) return laplacian_ring(num(spec.substr(5)));
  if (spec.rfind("alg2:", 0) == 0) return laplacian_alg2(num(spec.substr(5)));
  if (spec.rfind("grid:", 0) == 0) {
    const std::string g = spec.substr(5);
    const auto x = g.find('x');
    require(x != std::string::npos, ErrorCode::InvalidArgument, "grid topology must be grid:RxC");
    return laplacian_grid(num(g.substr(0, x)), num(g.substr(x + 1)));
  }
  std::ifstream in(spec);
  require(static_cast<bool>(in), ErrorCode::InvalidArgument, "cannot open topology file '" + spec + "'");
  std::vector<std::pair<Index, Index>> edges;
  Index maxnode = 0;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    long long a, b;
    if (!(ls >> a >> b)) continue;
    require(a >= 1 && b >= 1, ErrorCode::IndexOutOfRange, "edge list is 1-based");
    edges.emplace_back(a - 1, b - 1);
    maxnode = std::max<Index>(maxnode, std::max<Index>(a, b));
  }
  return laplacian_from_edges(maxnode, edges);
}

NetworkModel assemble_network(const Mat& L, const AgentSet& agents) {
  const Index m = L.rows();
  require(L.cols() == m && agents.count() == m, ErrorCode::DimensionMismatch, "agent count must match Laplacian");
  const Index n = agents.state_dim();
  NetworkModel net;
  net.L = L;
  net.n = n;
  net.A = Mat::Zero(n * m, n * m);
  net.C = Mat::Zero(agents.C.front().rows() * m, n * m);
  const Index p = agents.C.front().rows();
  for (Index i = 0; i < m; ++i) {
    const Mat BK = agents.B[static_cast<size_t>(i)] * agents.K[static_cast<size_t>(i)];
    net.A.block(i * n, i * n, n, n) = agents.A[static_cast<size_t>(i)];
    for (Index j = 0; j < m; ++j) {
      if (L(i, j) != 0.0) net.A.block(i * n, j * n, n, n) -= L(i, j) * BK * agents.C[static_cast<size_t>(j)];
    }
    net.C.block(i * p, i * n, p, n) = agents.C[static_cast<size_t>(i)];
  }
  return net;
}

PerturbationSpec perturbation_single_agent(Index k, Index m, Index n) {
  require(n == 2, ErrorCode::InvalidArgument, "single-agent perturbation is defined for 2x2 agents");
  require(k >= 1 && k <= m, ErrorCode::IndexOutOfRange, "agent index out of range");
  PerturbationSpec p;
  p.index = k;
  p.nparams = 3;
  p.Bl = Mat::Zero(n * m, 4);
  p.Br = Mat::Zero(n * m, 4);
  const Index r = 2 * (k - 1);
  p.Bl.block(r, 0, 2, 4) << 1, 1, 0, 0, 0, 0, 1, 1;
  p.Br.block(r, 0, 2, 4) << 1, 0, 1, 0, 0, 1, 0, 1;
  p.param_map = [](const Vec& v) {
    require(v.size() == 3, ErrorCode::DimensionMismatch, "single-agent perturbation takes 3 parameters");
    Vec d(4);
    d << v(0), v(1), v(1), v(2);
    return d;
  };
  return p;
}

PerturbationSpec perturbation_pair(Index k, Index m, Index n) {
  require(n == 2, ErrorCode::InvalidArgument, "pair perturbation is defined for 2x2 agents");
  require(k % 2 == 1, ErrorCode::EvenIndex, "pair perturbation needs an odd index");
  require(k >= 1 && k <= 2 * m - 3, ErrorCode::IndexOutOfRange, "pair index out of range");
  PerturbationSpec p;
  p.index = k;
  p.nparams = 2;
  p.Bl = Mat::Zero(n * m, 4);
  p.Br = Mat::Zero(n * m, 4);
  p.Bl.block(k - 1, 0, 4, 4) << 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0;
  p.Br.block(k - 1, 0, 4, 4).setIdentity();
  p.param_map = [](const Vec& v) {
    require(v.size() == 2, ErrorCode::DimensionMismatch, "pair perturbation takes 2 parameters");
    Vec d(4);
    d << v(0), v(0), v(1), v(1);
    return d;
  };
  return p;
}

bool is_stable(const Mat& A) {
  require(A.rows() == A.cols(), ErrorCode::DimensionMismatch, "is_stable needs a square matrix");
  Eigen::EigenSolver<Mat> es(A, false);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NonConvergence, "eigenvalue computation failed");
  return es.eigenvalues().real().maxCoeff() < 0.0;
}

Mat perturbed_matrix(const NetworkModel& net, const PerturbationSpec& pert, const Vec& v) {
  return net.A - pert.Bl * pert.diag(v).asDiagonal() * pert.Br.transpose();
}

ParamLyapProblem h2_problem(const NetworkModel& net, const PerturbationSpec& pert) {
  ParamLyapProblem p;
  p.A0 = net.A.transpose();
  p.Bl = pert.Br;
  p.Br = pert.Bl;
  p.Q = net.C.transpose() * net.C;
  return p;
}

Mat disturbance_single(Index k, Index m, Index n) {
  require(k >= 1 && k <= m, ErrorCode::IndexOutOfRange, "agent index out of range");
  Mat E = Mat::Zero(n * m, n);
  E.block((k - 1) * n, 0, n, n).setIdentity();
  return E;
}

double h2_sq(const Mat& A, const Mat& E, const Mat& C) {
  if (!is_stable(A)) throw Error(ErrorCode::Unstable, "system matrix is not Hurwitz");
  const Mat X = solve_lyap_schur(A.transpose(), C.transpose() * C);
  return (E * E.transpose() * X).trace();
}

std::vector<Vec> cartesian_grid(const std::vector<double>& values, Index dim) {
  std::vector<Vec> out;
  if (values.empty() || dim <= 0) return out;
  std::vector<size_t> idx(static_cast<size_t>(dim), 0);
  while (true) {
    Vec v(dim);
    for (Index j = 0; j < dim; ++j) v(j) = values[idx[static_cast<size_t>(j)]];
    out.push_back(v);
    Index j = dim - 1;
    while (j >= 0 && ++idx[static_cast<size_t>(j)] == values.size()) {
      idx[static_cast<size_t>(j)] = 0;
      --j;
    }
    if (j < 0) break;
  }
  return out;
}

namespace {

struct KResult {
  std::vector<GridCell> cells;
  Index stable = 0, unstable = 0, failed = 0;
  double best = -std::numeric_limits<double>::infinity();
};

KResult sweep_one_k(const NetworkModel& net, const SweepConfig& cfg, Index k) {
  const Index m = net.agents();
  const PerturbationSpec pert = cfg.perturbation == PerturbationKind::SingleAgent
                                    ? perturbation_single_agent(k, m, net.n)
                                    : perturbation_pair(k, m, net.n);
  Mat EEt;
  if (cfg.disturbance == DisturbanceKind::SingleAgent) {
    const Index agent = cfg.perturbation == PerturbationKind::SingleAgent ? k : (k + 1) / 2;
    const Mat E = disturbance_single(agent, m, net.n);
    EEt = E * E.transpose();
  }
  const ParamLyapProblem prob = h2_problem(net, pert);
  Evaluator ev(prob, cfg.backend, cfg.opt, EEt.size() ? &EEt : nullptr);
  KResult out;
  for (const Vec& v : cartesian_grid(cfg.grid, pert.nparams)) {
    GridCell cell;
    cell.k = k;
    cell.v = v;
    cell.stable = is_stable(perturbed_matrix(net, pert, v));
    if (!cell.stable) {
      ++out.unstable;
      out.cells.push_back(std::move(cell));
      continue;
    }
    ++out.stable;
    try {
      const EvalRecord r = ev.evaluate(pert.diag(v));
      cell.h2sq = r.f_value;
      cell.backward_error = r.backward_error;
      cell.inner_iters = r.inner_iters;
      cell.basis_dim = r.basis_dim;
      cell.expansions = r.expansions;
      cell.wall_ms = r.wall_ms;
      cell.converged = r.converged;
      if (!r.converged) ++out.failed;
      out.best = std::max(out.best, cell.h2sq);
    } catch (const Error& e) {
      cell.converged = false;
      cell.error = e.what();
      ++out.failed;
    }
    out.cells.push_back(std::move(cell));
  }
  return out;
}

}  // namespace

GridSweep sweep_grid(const NetworkModel& net, const SweepConfig& cfg) {
  const size_t nk = cfg.kset.size();
  std::vector<KResult> parts(nk);
  std::vector<std::exception_ptr> errors(nk);
  const size_t nthreads = std::max<size_t>(1, std::min<size_t>(static_cast<size_t>(std::max(cfg.threads, 1)), nk));
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next++; i < nk; i = next++) {
      try {
        parts[i] = sweep_one_k(net, cfg, cfg.kset[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  GridSweep out;
  for (size_t i = 0; i < nk; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    KResult& p = parts[i];
    out.stable += p.stable;
    out.unstable += p.unstable;
    out.failed += p.failed;
    out.max_per_k.emplace_back(cfg.kset[i], p.best);
    for (auto& c : p.cells) out.cells.push_back(std::move(c));
  }
  return out;
}

}  // namespace plyap
