// Benchmark harness CLI: problem generation, runs, grid search and the
// certification suite. See README for the config schema.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "pdsplit/bench.hpp"
#include "pdsplit/certify.hpp"
#include "pdsplit/oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pdsplit;

namespace {

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  json j;
  in >> j;
  return j;
}

bench::GraphKind graph_from_name(const std::string& name) {
  if (name == "ring") return bench::GraphKind::Ring;
  if (name == "path") return bench::GraphKind::Path;
  if (name == "complete") return bench::GraphKind::Complete;
  if (name == "erdos") return bench::GraphKind::Erdos;
  throw Error("unknown graph kind: " + name);
}

bench::BenchProblem problem_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fused_lasso") {
    bench::FusedLassoParams prm;
    prm.n = j.value("n", prm.n);
    prm.p = j.value("p", prm.p);
    prm.seed = j.value("seed", prm.seed);
    prm.lambda = j.value("lambda", -1.0);
    prm.lambda1 = j.value("lambda1", -1.0);
    return bench::generate_fused_lasso(prm);
  }
  if (kind == "group_lasso_logistic") {
    bench::GroupLassoLogisticParams prm;
    prm.n = j.value("n", prm.n);
    prm.grid = j.value("grid", prm.grid);
    prm.seed = j.value("seed", prm.seed);
    prm.lambda = j.value("lambda", -1.0);
    prm.lambda1 = j.value("lambda1", -1.0);
    return bench::generate_group_lasso_logistic(prm);
  }
  if (kind == "pca_lasso") {
    bench::PcaLassoParams prm;
    prm.n = j.value("n", prm.n);
    prm.p = j.value("p", prm.p);
    prm.m = j.value("m", prm.m);
    prm.rows_per_block = j.value("rows_per_block", prm.rows_per_block);
    prm.seed = j.value("seed", prm.seed);
    prm.lambda = j.value("lambda", -1.0);
    prm.lambda1 = j.value("lambda1", -1.0);
    return bench::generate_pca_lasso(prm);
  }
  if (kind == "decentralized_quadratic") {
    bench::DecentralizedQuadraticParams prm;
    prm.nodes = j.value("nodes", prm.nodes);
    prm.dim = j.value("dim", prm.dim);
    prm.graph = graph_from_name(j.value("graph", std::string("ring")));
    prm.erdos_p = j.value("erdos_p", prm.erdos_p);
    prm.seed = j.value("seed", prm.seed);
    return bench::generate_decentralized_quadratic(prm);
  }
  throw Error("unknown problem kind: " + kind);
}

SolverKind solver_from_name(const std::string& name) {
  if (name == "pddy") return SolverKind::Pddy;
  if (name == "pd3o") return SolverKind::Pd3o;
  if (name == "cv31") return SolverKind::CondatVu31;
  if (name == "cv32") return SolverKind::CondatVu32;
  if (name == "lico") return SolverKind::Lico;
  if (name == "prilico") return SolverKind::PriLico;
  throw Error("unknown solver: " + name);
}

EstimatorConfig estimator_from_json(const json& j) {
  EstimatorConfig cfg;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "full") cfg.kind = EstimatorKind::Full;
  else if (kind == "minibatch") cfg.kind = EstimatorKind::Minibatch;
  else if (kind == "lsvrg") cfg.kind = EstimatorKind::LSVRG;
  else if (kind == "saga") cfg.kind = EstimatorKind::SAGA;
  else throw Error("unknown estimator: " + kind);
  cfg.lsvrg_p = j.value("p", cfg.lsvrg_p);
  cfg.batch = j.value("batch", cfg.batch);
  return cfg;
}

std::string estimator_tag(const EstimatorConfig& cfg) {
  std::string tag = estimator_name(cfg.kind);
  if (cfg.kind == EstimatorKind::LSVRG)
    tag += "_p" + std::to_string(cfg.lsvrg_p).substr(0, 4);
  if (cfg.kind == EstimatorKind::Minibatch)
    tag += "_b" + std::to_string(cfg.batch);
  return tag;
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  const json cfg = load_json(config_path);
  bench::BenchProblem problem = problem_from_json(cfg.at("problem"));
  fs::create_directories(out_dir);

  std::optional<SaddlePoint> oracle;
  if (cfg.value("with_oracle", false)) {
    if (problem.spec.H.kind() == ProxFn::Kind::IndicatorPoint &&
        problem.spec.F.kind() == SmoothFn::Kind::Quadratic) {
      Matrix q;
      Vector qv;
      {
        const Index d = problem.spec.F.dim();
        qv = problem.spec.F.grad(Vector::Zero(d));
        q = Matrix::Zero(d, d);
        for (Index col = 0; col < d; ++col) {
          Vector e = Vector::Zero(d);
          e[col] = 1.0;
          q.col(col) = problem.spec.F.grad(e) - qv;
        }
      }
      oracle = solve_eq_qp(q, qv, problem.spec.L, problem.spec.H.point())
                   .saddle;
    } else {
      oracle = solve_composite_reference(problem.spec).saddle;
    }
  }

  std::vector<std::uint64_t> seeds;
  for (const auto& s : cfg.value("seeds", json::array({0})))
    seeds.push_back(s.get<std::uint64_t>());

  json summary = json::array();
  for (const auto& sname : cfg.at("solvers")) {
    const std::string solver_str = sname.get<std::string>();
    for (const auto& ej : cfg.at("estimators")) {
      const EstimatorConfig est = estimator_from_json(ej);
      const bool cv = solver_str == "cv31" || solver_str == "cv32";
      if (cv && est.kind != EstimatorKind::Full) {
        std::cerr << "skipping " << solver_str << "/"
                  << estimator_name(est.kind)
                  << ": stochastic CV not supported\n";
        continue;
      }
      if (problem.spec.L.spectral_is_self() && solver_str != "destroy" &&
          solver_str != "prilico") {
        std::cerr << "skipping " << solver_str
                  << ": gossip problems use prilico/destroy\n";
        continue;
      }
      for (const auto seed : seeds) {
        RunConfig rc;
        rc.gamma = cfg.value("gamma", 0.0);
        rc.tau = cfg.value("tau", 0.0);
        rc.iters = cfg.value("iters", 1000L);
        rc.seed = seed;
        rc.estimator = est;
        rc.log_every = cfg.value("log_every", 1L);
        rc.enforce_stepsize = cfg.value("enforce_stepsize", true);
        rc.oracle = oracle;

        RunTrace trace;
        if (solver_str == "destroy") {
          if (problem.local_fns.empty())
            throw Error("run: destroy requires a decentralized problem");
          trace = run_destroy(problem.local_fns, problem.what, rc);
        } else {
          trace = run(solver_from_name(solver_str), problem.spec, rc);
        }

        const std::string stem = problem.name + "_" + solver_str + "_" +
                                 estimator_tag(est) + "_s" +
                                 std::to_string(seed);
        const std::string csv = (fs::path(out_dir) / (stem + ".csv")).string();
        const std::string js =
            (fs::path(out_dir) / (stem + ".config.json")).string();
        write_trace_csv(trace, csv, js);

        json rec;
        rec["solver"] = solver_str;
        rec["estimator"] = estimator_tag(est);
        rec["seed"] = seed;
        rec["gamma"] = trace.gamma;
        rec["tau"] = trace.tau;
        rec["final_objective"] = trace.back().objective;
        rec["final_kkt_primal"] = trace.back().kkt_primal;
        rec["final_kkt_dual"] = trace.back().kkt_dual;
        rec["diverged"] = trace.diverged;
        rec["out_of_theorem"] = trace.out_of_theorem;
        rec["trace"] = csv;
        summary.push_back(std::move(rec));
        if (trace.diverged)
          std::cerr << "warning: " << stem << " diverged: " << trace.diagnostic
                    << "\n";
      }
    }
  }
  std::sort(summary.begin(), summary.end(),
            [](const json& a, const json& b) {
              return a.at("trace").get<std::string>() <
                     b.at("trace").get<std::string>();
            });
  json top;
  top["problem"] = problem.meta;
  top["runs"] = std::move(summary);
  std::ofstream out(fs::path(out_dir) / "summary.json");
  out << top.dump(2) << "\n";
  std::cout << "wrote " << (fs::path(out_dir) / "summary.json").string()
            << "\n";
  return 0;
}

int cmd_grid(const std::string& config_path, const std::string& out_dir) {
  const json cfg = load_json(config_path);
  bench::BenchProblem problem = problem_from_json(cfg.at("problem"));
  fs::create_directories(out_dir);

  bench::GridConfig grid;
  for (const auto& s : cfg.at("solvers"))
    grid.solvers.push_back(solver_from_name(s.get<std::string>()));
  for (const auto& e : cfg.at("estimators"))
    grid.estimators.push_back(estimator_from_json(e));
  grid.gamma_exp_min = cfg.value("gamma_exp_min", grid.gamma_exp_min);
  grid.gamma_exp_max = cfg.value("gamma_exp_max", grid.gamma_exp_max);
  if (cfg.contains("tau_rules")) {
    grid.tau_rules.clear();
    for (const auto& t : cfg.at("tau_rules"))
      grid.tau_rules.push_back(t.get<double>());
  }
  grid.iters = cfg.value("iters", grid.iters);
  grid.seed = cfg.value("seed", grid.seed);
  grid.log_every = cfg.value("log_every", grid.log_every);

  const auto best = bench::grid_search(problem, grid);
  json out = json::array();
  for (const auto& rec : best) out.push_back(bench::run_record_to_json(rec));
  std::ofstream f(fs::path(out_dir) / "grid_results.json");
  f << out.dump(2) << "\n";
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_gen_data(const std::string& kind, Index n, Index p, Index extra,
                 std::uint64_t seed, const std::string& out_dir) {
  fs::create_directories(out_dir);
  bench::BenchProblem problem;
  if (kind == "fused_lasso") {
    bench::FusedLassoParams prm;
    prm.n = n;
    prm.p = p;
    prm.seed = seed;
    problem = bench::generate_fused_lasso(prm);
  } else if (kind == "pca_lasso") {
    bench::PcaLassoParams prm;
    prm.n = n;
    prm.p = p;
    if (extra > 0) prm.m = extra;
    prm.seed = seed;
    problem = bench::generate_pca_lasso(prm);
  } else if (kind == "group_lasso_logistic") {
    bench::GroupLassoLogisticParams prm;
    prm.n = n;
    if (extra > 0) prm.grid = extra;
    prm.seed = seed;
    problem = bench::generate_group_lasso_logistic(prm);
  } else if (kind == "decentralized_quadratic") {
    bench::DecentralizedQuadraticParams prm;
    prm.nodes = n;
    prm.dim = p;
    prm.seed = seed;
    problem = bench::generate_decentralized_quadratic(prm);
  } else {
    throw Error("unknown problem kind: " + kind);
  }

  json meta = problem.meta;
  if (problem.spec.F.kind() == SmoothFn::Kind::LeastSquares ||
      problem.spec.F.kind() == SmoothFn::Kind::LogisticL2) {
    const std::string path =
        (fs::path(out_dir) / (problem.name + ".libsvm")).string();
    bench::write_libsvm(path, problem.spec.F.data_matrix(),
                        problem.spec.F.data_vector());
    meta["data"] = path;
  }
  if (problem.what.size() > 0) {
    const std::string path =
        (fs::path(out_dir) / (problem.name + "_laplacian.csv")).string();
    std::ofstream f(path);
    for (Index i = 0; i < problem.what.rows(); ++i) {
      for (Index j2 = 0; j2 < problem.what.cols(); ++j2)
        f << (j2 ? "," : "") << problem.what(i, j2);
      f << "\n";
    }
    meta["laplacian"] = path;
  }
  const std::string meta_path = (fs::path(out_dir) / "meta.json").string();
  std::ofstream f(meta_path);
  f << meta.dump(2) << "\n";
  std::cout << "wrote " << meta_path << "\n";
  return 0;
}

int cmd_certify(const std::string& suite_name, const std::string& out_path) {
  CertifySuite suite;
  try {
    suite = certify_suite_from_name(suite_name);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  const auto results = run_certification(suite, &std::cout);
  if (!out_path.empty()) {
    json out = json::array();
    for (const auto& r : results)
      out.push_back(json{{"id", r.id},
                         {"name", r.name},
                         {"pass", r.pass},
                         {"detail", r.detail},
                         {"seconds", r.seconds}});
    std::ofstream f(out_path);
    f << out.dump(2) << "\n";
  }
  const bool ok = all_passed(results);
  std::cout << (ok ? "CERTIFY: all criteria passed"
                   : "CERTIFY: FAILURES present")
            << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"primal-dual proximal splitting benchmark harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "results";
  auto* run_cmd = app.add_subcommand("run", "execute runs from a JSON config");
  run_cmd->add_option("--config", config_path, "config file")->required();
  run_cmd->add_option("--out", out_dir, "output directory");

  std::string grid_config, grid_out = "results";
  auto* grid_cmd =
      app.add_subcommand("grid", "stepsize grid search from a JSON config");
  grid_cmd->add_option("--config", grid_config, "config file")->required();
  grid_cmd->add_option("--out", grid_out, "output directory");

  std::string suite = "all", certify_out;
  auto* certify_cmd =
      app.add_subcommand("certify", "run the acceptance criteria");
  certify_cmd->add_option(
      "--suite", suite, "all|identities|rates|estimators|infra");
  certify_cmd->add_option("--out", certify_out, "write results JSON here");

  std::string gen_kind = "fused_lasso", gen_out = "data";
  long gen_n = 100, gen_p = 50, gen_extra = 0;
  std::uint64_t gen_seed = 7;
  auto* gen_cmd =
      app.add_subcommand("gen-data", "write a reproducible dataset");
  gen_cmd->add_option("--problem", gen_kind,
                      "fused_lasso|pca_lasso|group_lasso_logistic|"
                      "decentralized_quadratic");
  gen_cmd->add_option("--n", gen_n, "rows / nodes");
  gen_cmd->add_option("--p", gen_p, "features / node dim");
  gen_cmd->add_option("--m", gen_extra, "blocks or grid size");
  gen_cmd->add_option("--seed", gen_seed, "seed");
  gen_cmd->add_option("--out", gen_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(config_path, out_dir);
    if (grid_cmd->parsed()) return cmd_grid(grid_config, grid_out);
    if (certify_cmd->parsed()) return cmd_certify(suite, certify_out);
    if (gen_cmd->parsed())
      return cmd_gen_data(gen_kind, gen_n, gen_p, gen_extra, gen_seed,
                          gen_out);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return std::string(e.what()).find("config") != std::string::npos ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
