#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pdsplit/problem.hpp"
#include "pdsplit/solvers.hpp"

// Benchmark problem generators (synthetic, desk scale), dataset ingestion,
// and grid search.

namespace pdsplit::bench {

enum class GraphKind { Ring, Path, Complete, Erdos };

struct FusedLassoParams {
  Index n = 100;
  Index p = 50;
  std::uint64_t seed = 1;
  double lambda = -1.0;   // < 0: nu0 / n
  double lambda1 = -1.0;  // < 0: nu0 / (10 n)
};

struct GroupLassoLogisticParams {
  Index n = 80;
  Index grid = 6;  // p = grid^2 pixels, one group per pixel (sizes 3..5)
  std::uint64_t seed = 1;
  double lambda = -1.0;   // < 0: 2 nu0 / n
  double lambda1 = -1.0;  // < 0: nu0 / (5 n)
};

struct PcaLassoParams {
  Index n = 60;
  Index p = 40;
  Index m = 10;
  Index rows_per_block = 20;
  std::uint64_t seed = 1;
  double lambda = -1.0;   // < 0: nu0 / (10 n)
  double lambda1 = -1.0;  // < 0: 2 nu0 / (n m)
};

struct DecentralizedQuadraticParams {
  Index nodes = 10;
  Index dim = 5;
  GraphKind graph = GraphKind::Ring;
  double erdos_p = 0.5;
  std::uint64_t seed = 1;
};

struct BenchProblem {
  std::string name;
  ProblemSpec spec;
  // Decentralized extras (empty for centralized problems).
  std::vector<SmoothFn> local_fns;
  Matrix what;
  nlohmann::json meta;  // parameters and derived constants
};

BenchProblem generate_fused_lasso(const FusedLassoParams& prm);
BenchProblem generate_group_lasso_logistic(const GroupLassoLogisticParams& prm);
BenchProblem generate_pca_lasso(const PcaLassoParams& prm);
BenchProblem generate_decentralized_quadratic(
    const DecentralizedQuadraticParams& prm);

/// Graph Laplacian of the requested topology; Erdos graphs are resampled
/// (deterministically) until connected.
Matrix graph_laplacian(GraphKind kind, Index n, double erdos_p,
                       std::uint64_t seed);

/// libsvm text format: `label idx:val idx:val ...`, 1-based indices.
/// Feature count inferred from the largest index unless given. Binary labels
/// are remapped to {0,1}. Malformed lines and duplicate indices raise with
/// the line number.
std::pair<Matrix, Vector> read_libsvm(const std::string& path, Index p = 0);

/// Canonical writer: nonzeros in ascending index order, shortest round-trip
/// decimal representation, one space between tokens.
void write_libsvm(const std::string& path, const Matrix& w,
                  const Vector& labels);

struct GridConfig {
  std::vector<SolverKind> solvers;
  std::vector<EstimatorConfig> estimators;
  int gamma_exp_min = -4;  // gamma = 1.5^j / nu
  int gamma_exp_max = 4;
  std::vector<double> tau_rules = {0.5, 0.9, 0.99};  // targets for tau gamma ||L||^2
  long iters = 2000;
  std::uint64_t seed = 0;
  long log_every = 100;
};

struct RunRecord {
  std::string bench;
  SolverKind solver = SolverKind::Pd3o;
  EstimatorConfig estimator;
  double gamma = 0.0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  double final_objective = 0.0;
  double final_kkt_primal = 0.0;
  double final_kkt_dual = 0.0;
  bool diverged = false;
  bool out_of_theorem = false;
  std::string trace_path;
};

nlohmann::json run_record_to_json(const RunRecord& rec);

/// Best configuration per (solver, estimator) pair, ranked by final
/// objective over the log-grid gamma = 1.5^j / nu and the tau rules.
/// Throws when every configuration of a pair diverges, listing diagnostics.
std::vector<RunRecord> grid_search(const BenchProblem& problem,
                                   const GridConfig& grid);

}  // namespace pdsplit::bench
