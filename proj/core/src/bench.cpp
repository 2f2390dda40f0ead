#include "pdsplit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "pdsplit/rng.hpp"

namespace pdsplit::bench {

namespace {

Matrix random_normal_matrix(RngStream& rs, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rs.normal();
  return m;
}

Vector random_normal_vector(RngStream& rs, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rs.normal();
  return v;
}

}  // namespace

BenchProblem generate_fused_lasso(const FusedLassoParams& prm) {
  if (prm.p < 2 || prm.n < 1 || prm.p > 2000 || prm.n > 2000)
    throw Error("fused_lasso: dims out of desk-scale range");
  RngStream rs(prm.seed, 0);
  Matrix w = random_normal_matrix(rs, prm.n, prm.p);
  // Piecewise-constant ground truth so the first-difference penalty binds.
  Vector x_true(prm.p);
  const Index seg = std::max<Index>(2, prm.p / 5);
  double level = 0.0;
  for (Index j = 0; j < prm.p; ++j) {
    if (j % seg == 0) level = std::round(3.0 * rs.normal());
    x_true[j] = level;
  }
  Vector a = w * x_true + 0.1 * random_normal_vector(rs, prm.n);

  const double nu0 = spectral_info(LinOp::dense(w), 1e-9).op_norm_sq;
  const double lambda = prm.lambda >= 0 ? prm.lambda : nu0 / prm.n;
  const double lambda1 = prm.lambda1 >= 0 ? prm.lambda1 : nu0 / (10.0 * prm.n);

  BenchProblem out;
  out.name = "fused_lasso_p" + std::to_string(prm.p) + "_n" +
             std::to_string(prm.n) + "_s" + std::to_string(prm.seed);
  // Ridge folded into F keeps R = 0 and makes F strongly convex.
  out.spec = ProblemSpec::make(SmoothFn::least_squares(w, a, lambda),
                               ProxFn::zero(), ProxFn::l1(lambda1),
                               LinOp::first_difference(prm.p));
  out.meta = {{"kind", "fused_lasso"}, {"n", prm.n},        {"p", prm.p},
              {"seed", prm.seed},      {"lambda", lambda},  {"lambda1", lambda1},
              {"nu0", nu0},            {"nu", out.spec.F.nu()}};
  return out;
}

BenchProblem generate_group_lasso_logistic(
    const GroupLassoLogisticParams& prm) {
  const Index g = prm.grid;
  const Index p = g * g;
  if (g < 2 || prm.n < 1 || p > 2000 || prm.n > 2000)
    throw Error("group_lasso_logistic: dims out of desk-scale range");
  RngStream rs(prm.seed, 0);
  Matrix w = random_normal_matrix(rs, prm.n, p);
  Vector x_plant = random_normal_vector(rs, p);
  Vector labels(prm.n);
  for (Index i = 0; i < prm.n; ++i) {
    const double t = w.row(i).dot(x_plant) / std::sqrt(double(p));
    labels[i] = rs.bernoulli(1.0 / (1.0 + std::exp(-t))) ? 1.0 : 0.0;
  }

  // One group per pixel: the pixel plus its grid neighbors (sizes 3..5).
  std::vector<std::vector<Index>> groups;
  groups.reserve(static_cast<size_t>(p));
  for (Index r = 0; r < g; ++r)
    for (Index c = 0; c < g; ++c) {
      std::vector<Index> grp{r * g + c};
      if (r > 0) grp.push_back((r - 1) * g + c);
      if (r + 1 < g) grp.push_back((r + 1) * g + c);
      if (c > 0) grp.push_back(r * g + c - 1);
      if (c + 1 < g) grp.push_back(r * g + c + 1);
      groups.push_back(std::move(grp));
    }

  const double nu0 =
      spectral_info(LinOp::dense(w), 1e-9).op_norm_sq / (4.0 * prm.n);
  const double lambda = prm.lambda >= 0 ? prm.lambda : 2.0 * nu0 / prm.n;
  const double lambda1 = prm.lambda1 >= 0 ? prm.lambda1 : nu0 / (5.0 * prm.n);

  std::vector<Index> block_sizes;
  block_sizes.reserve(groups.size());
  for (const auto& grp : groups)
    block_sizes.push_back(static_cast<Index>(grp.size()));

  BenchProblem out;
  out.name = "group_lasso_logistic_g" + std::to_string(g) + "_n" +
             std::to_string(prm.n) + "_s" + std::to_string(prm.seed);
  out.spec = ProblemSpec::make(SmoothFn::logistic_l2(w, labels, lambda),
                               ProxFn::zero(),
                               ProxFn::l2_norm_sum(block_sizes, lambda1),
                               LinOp::group_selector(groups, p));
  out.meta = {{"kind", "group_lasso_logistic"},
              {"n", prm.n},
              {"p", p},
              {"groups", groups.size()},
              {"seed", prm.seed},
              {"lambda", lambda},
              {"lambda1", lambda1},
              {"nu0", nu0},
              {"nu", out.spec.F.nu()}};
  return out;
}

BenchProblem generate_pca_lasso(const PcaLassoParams& prm) {
  if (prm.p < 1 || prm.n < 1 || prm.m < 1 || prm.p > 2000 || prm.n > 2000)
    throw Error("pca_lasso: dims out of desk-scale range");
  RngStream rs(prm.seed, 0);
  Matrix w = random_normal_matrix(rs, prm.n, prm.p);
  Vector x_true = Vector::Zero(prm.p);
  for (Index j = 0; j < prm.p; j += 4) x_true[j] = rs.normal();
  Vector a = w * x_true + 0.1 * random_normal_vector(rs, prm.n);

  std::vector<LinOp> blocks;
  blocks.reserve(static_cast<size_t>(prm.m));
  std::vector<Index> block_sizes(static_cast<size_t>(prm.m),
                                 prm.rows_per_block);
  for (Index i = 0; i < prm.m; ++i)
    blocks.push_back(
        LinOp::dense(random_normal_matrix(rs, prm.rows_per_block, prm.p)));

  const double nu0 = spectral_info(LinOp::dense(w), 1e-9).op_norm_sq;
  const double lambda = prm.lambda >= 0 ? prm.lambda : nu0 / (10.0 * prm.n);
  const double lambda1 =
      prm.lambda1 >= 0 ? prm.lambda1 : 2.0 * nu0 / (double(prm.n) * prm.m);

  BenchProblem out;
  out.name = "pca_lasso_p" + std::to_string(prm.p) + "_n" +
             std::to_string(prm.n) + "_m" + std::to_string(prm.m) + "_s" +
             std::to_string(prm.seed);
  out.spec = ProblemSpec::make(SmoothFn::least_squares(w, a, 0.0),
                               ProxFn::l1(lambda),
                               ProxFn::l2_norm_sum(block_sizes, lambda1),
                               LinOp::vstack(std::move(blocks)));
  out.meta = {{"kind", "pca_lasso"},   {"n", prm.n},
              {"p", prm.p},            {"m", prm.m},
              {"rows_per_block", prm.rows_per_block},
              {"seed", prm.seed},      {"lambda", lambda},
              {"lambda1", lambda1},    {"nu", out.spec.F.nu()}};
  return out;
}

Matrix graph_laplacian(GraphKind kind, Index n, double erdos_p,
                       std::uint64_t seed) {
  if (n < 1) throw Error("graph_laplacian: need n >= 1");
  auto from_edges = [n](const std::vector<std::pair<Index, Index>>& edges) {
    Matrix lap = Matrix::Zero(n, n);
    for (auto [i, j] : edges) {
      lap(i, i) += 1.0;
      lap(j, j) += 1.0;
      lap(i, j) -= 1.0;
      lap(j, i) -= 1.0;
    }
    return lap;
  };
  std::vector<std::pair<Index, Index>> edges;
  switch (kind) {
    case GraphKind::Ring:
      for (Index i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
      if (n == 2) edges.pop_back();  // avoid the duplicate edge
      if (n == 1) edges.clear();
      return from_edges(edges);
    case GraphKind::Path:
      for (Index i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      return from_edges(edges);
    case GraphKind::Complete:
      for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) edges.emplace_back(i, j);
      return from_edges(edges);
    case GraphKind::Erdos: {
      for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
        RngStream rs(seed, attempt);
        edges.clear();
        for (Index i = 0; i < n; ++i)
          for (Index j = i + 1; j < n; ++j)
            if (rs.bernoulli(erdos_p)) edges.emplace_back(i, j);
        Matrix lap = from_edges(edges);
        // Connectivity: union-find over the sampled edges.
        std::vector<Index> parent(static_cast<size_t>(n));
        for (Index i = 0; i < n; ++i) parent[static_cast<size_t>(i)] = i;
        std::function<Index(Index)> find = [&](Index a) {
          while (parent[static_cast<size_t>(a)] != a)
            a = parent[static_cast<size_t>(a)] =
                parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
          return a;
        };
        for (auto [i, j] : edges) parent[static_cast<size_t>(find(i))] = find(j);
        bool connected = true;
        for (Index i = 1; i < n; ++i)
          if (find(i) != find(0)) connected = false;
        if (connected) return lap;
      }
      throw Error("graph_laplacian: erdos graph stayed disconnected");
    }
  }
  throw Error("graph_laplacian: unreachable");
}

BenchProblem generate_decentralized_quadratic(
    const DecentralizedQuadraticParams& prm) {
  const Index n = prm.nodes, d = prm.dim;
  if (n < 1 || d < 1 || n * d > 2000)
    throw Error("decentralized_quadratic: dims out of desk-scale range");
  RngStream rs(prm.seed, 0);
  Matrix what = graph_laplacian(prm.graph, n, prm.erdos_p, prm.seed);

  BenchProblem out;
  std::vector<Matrix> lifted_q;
  std::vector<Vector> lifted_v;
  Matrix q_block = Matrix::Zero(n * d, n * d);
  Vector v_block = Vector::Zero(n * d);
  for (Index i = 0; i < n; ++i) {
    Matrix m = random_normal_matrix(rs, d, d);
    Matrix qi = m.transpose() * m / double(d);
    qi.diagonal().array() += 0.5;
    Vector ci = random_normal_vector(rs, d);
    Vector vi = -qi * ci;
    out.local_fns.push_back(SmoothFn::quadratic(qi, vi));
    q_block.block(i * d, i * d, d, d) = qi;
    v_block.segment(i * d, d) = vi;
  }
  out.name = "decentralized_quadratic_n" + std::to_string(n) + "_d" +
             std::to_string(d) + "_s" + std::to_string(prm.seed);
  out.what = what;
  out.spec = ProblemSpec::make(SmoothFn::quadratic(q_block, v_block),
                               ProxFn::zero(),
                               ProxFn::indicator_point(Vector::Zero(n * d)),
                               LinOp::gossip_kron(what, d));
  out.meta = {{"kind", "decentralized_quadratic"},
              {"nodes", n},
              {"dim", d},
              {"seed", prm.seed},
              {"w_norm", out.spec.spectral.op_norm_sq}};
  return out;
}

// ---------------------------------------------------------------------------
// libsvm
// ---------------------------------------------------------------------------

std::pair<Matrix, Vector> read_libsvm(const std::string& path, Index p) {
  std::ifstream in(path);
  if (!in) throw Error("read_libsvm: cannot open " + path);
  std::vector<double> labels;
  std::vector<std::vector<std::pair<Index, double>>> rows;
  Index max_idx = 0;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok))
      throw Error("read_libsvm: empty record at line " +
                  std::to_string(line_no));
    double label;
    try {
      size_t used = 0;
      label = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error("read_libsvm: bad label '" + tok + "' at line " +
                  std::to_string(line_no));
    }
    std::vector<std::pair<Index, double>> row;
    std::set<Index> seen;
    while (ss >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos)
        throw Error("read_libsvm: bad feature '" + tok + "' at line " +
                    std::to_string(line_no));
      Index idx;
      double val;
      try {
        idx = static_cast<Index>(std::stoll(tok.substr(0, colon)));
        val = std::stod(tok.substr(colon + 1));
      } catch (const std::exception&) {
        throw Error("read_libsvm: bad feature '" + tok + "' at line " +
                    std::to_string(line_no));
      }
      if (idx < 1)
        throw Error("read_libsvm: index must be >= 1 at line " +
                    std::to_string(line_no));
      if (!seen.insert(idx).second)
        throw Error("read_libsvm: duplicate index " + std::to_string(idx) +
                    " at line " + std::to_string(line_no));
      max_idx = std::max(max_idx, idx);
      row.emplace_back(idx, val);
    }
    labels.push_back(label);
    rows.push_back(std::move(row));
  }
  const Index cols = p > 0 ? p : max_idx;
  if (p > 0 && max_idx > p)
    throw Error("read_libsvm: index " + std::to_string(max_idx) +
                " exceeds feature count " + std::to_string(p));
  Matrix w = Matrix::Zero(static_cast<Index>(rows.size()), cols);
  Vector a(static_cast<Index>(labels.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (auto [idx, val] : rows[i]) w(static_cast<Index>(i), idx - 1) = val;
    a[static_cast<Index>(i)] = labels[i];
  }
  // Remap binary labels to {0,1}.
  std::set<double> distinct(labels.begin(), labels.end());
  const bool already01 =
      std::all_of(labels.begin(), labels.end(),
                  [](double v) { return v == 0.0 || v == 1.0; });
  if (!already01) {
    if (distinct.size() == 2) {
      const double lo = *distinct.begin();
      for (Index i = 0; i < a.size(); ++i) a[i] = a[i] == lo ? 0.0 : 1.0;
    } else if (distinct.size() > 2) {
      // Regression-style labels: leave untouched.
    }
  }
  return {std::move(w), std::move(a)};
}

void write_libsvm(const std::string& path, const Matrix& w,
                  const Vector& labels) {
  check_dim("write_libsvm", w.rows(), labels.size());
  std::ofstream out(path);
  if (!out) throw Error("write_libsvm: cannot open " + path);
  char buf[64];
  for (Index i = 0; i < w.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", labels[i]);
    out << buf;
    for (Index j = 0; j < w.cols(); ++j) {
      if (w(i, j) == 0.0) continue;
      std::snprintf(buf, sizeof(buf), "%.17g", w(i, j));
      out << ' ' << (j + 1) << ':' << buf;
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

nlohmann::json run_record_to_json(const RunRecord& rec) {
  return nlohmann::json{{"bench", rec.bench},
                        {"solver", solver_name(rec.solver)},
                        {"estimator", estimator_name(rec.estimator.kind)},
                        {"gamma", rec.gamma},
                        {"tau", rec.tau},
                        {"seed", rec.seed},
                        {"final_objective", rec.final_objective},
                        {"final_kkt_primal", rec.final_kkt_primal},
                        {"final_kkt_dual", rec.final_kkt_dual},
                        {"diverged", rec.diverged},
                        {"out_of_theorem", rec.out_of_theorem},
                        {"trace_path", rec.trace_path}};
}

std::vector<RunRecord> grid_search(const BenchProblem& problem,
                                   const GridConfig& grid) {
  if (grid.solvers.empty() || grid.estimators.empty() ||
      grid.gamma_exp_min > grid.gamma_exp_max)
    throw Error("grid_search: empty grid");
  const double nu = problem.spec.F.nu();
  const double lsq = problem.spec.spectral.op_norm_sq;

  std::vector<RunRecord> best;
  for (const auto solver : grid.solvers) {
    for (const auto& est : grid.estimators) {
      const bool cv = solver == SolverKind::CondatVu31 ||
                      solver == SolverKind::CondatVu32;
      if (cv && est.kind != EstimatorKind::Full) continue;  // unsupported
      bool found = false;
      RunRecord winner;
      std::vector<std::string> diagnostics;
      for (int j = grid.gamma_exp_min; j <= grid.gamma_exp_max; ++j) {
        const double step = std::pow(1.5, j) / nu;
        // (gamma, tau) pairs per solver convention: for PDDY/PD3O the grid
        // value is gamma and tau comes from the tau gamma ||L||^2 rule; for
        // Condat-Vu the grid value is the primal step tau and the rule fills
        // nu/2 < 1/tau - gamma ||L||^2 with the same margin.
        std::vector<std::pair<double, double>> pairs;
        if (cv) {
          const double slack = 1.0 / step - nu / 2.0;
          if (slack <= 0) {
            diagnostics.push_back("tau=" + std::to_string(step) +
                                  ": primal step beyond 2/nu");
            continue;
          }
          if (lsq > 0) {
            for (double rule : grid.tau_rules)
              pairs.emplace_back(rule * slack / lsq, step);
          } else {
            pairs.emplace_back(1.0, step);
          }
        } else if (lsq > 0) {
          for (double rule : grid.tau_rules)
            pairs.emplace_back(step, rule / (step * lsq));
        } else {
          pairs.emplace_back(step, 1.0);
        }
        for (auto [gamma, tau] : pairs) {
          RunConfig cfg;
          cfg.gamma = gamma;
          cfg.tau = tau;
          cfg.iters = grid.iters;
          cfg.seed = grid.seed;
          cfg.estimator = est;
          cfg.log_every = grid.log_every;
          cfg.enforce_stepsize = false;  // warn-only during grid search
          RunTrace trace = run(solver, problem.spec, cfg);
          if (trace.diverged || !std::isfinite(trace.back().objective)) {
            diagnostics.push_back(
                "gamma=" + std::to_string(gamma) + " tau=" +
                std::to_string(tau) + ": " +
                (trace.diagnostic.empty() ? "non-finite objective"
                                          : trace.diagnostic));
            continue;
          }
          RunRecord rec;
          rec.bench = problem.name;
          rec.solver = solver;
          rec.estimator = est;
          rec.gamma = gamma;
          rec.tau = tau;
          rec.seed = grid.seed;
          rec.final_objective = trace.back().objective;
          rec.final_kkt_primal = trace.back().kkt_primal;
          rec.final_kkt_dual = trace.back().kkt_dual;
          rec.out_of_theorem = trace.out_of_theorem;
          if (!found || rec.final_objective < winner.final_objective) {
            winner = rec;
            found = true;
          }
        }
      }
      if (!found) {
        std::string msg = "grid_search: all configurations diverged for " +
                          solver_name(solver) + "/" +
                          estimator_name(est.kind) + ":";
        for (const auto& d : diagnostics) msg += "\n  " + d;
        throw Error(msg);
      }
      best.push_back(std::move(winner));
    }
  }
  return best;
}

}  // namespace pdsplit::bench
