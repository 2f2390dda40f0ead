#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pdsplit/problem.hpp"
#include "pdsplit/solvers.hpp"

// Independent ground-truth solvers and convergence-guarantee verifiers.
// Everything here is desk-scale analysis code: dense factorizations are fine.

namespace pdsplit {

enum class OracleMethod { DenseKKT, LongRunConsensus };

struct OracleSolution {
  SaddlePoint saddle;
  OracleMethod method = OracleMethod::DenseKKT;
  std::pair<double, double> certificate{0.0, 0.0};  // kkt residual pair
};

/// Ground truth for min 0.5 x'Qx + q'x s.t. Lx = b through the dense KKT
/// system [[Q, L*], [L, 0]] (x, y) = (-q, b); y is projected onto ran(L).
/// Throws on a singular/inconsistent system.
OracleSolution solve_eq_qp(const Matrix& q_mat, const Vector& q_vec,
                           const LinOp& l, const Vector& b);

/// Certified reference for a composite spec: runs deterministic Condat-Vu
/// and PD3O until both reach kkt <= 1e-9 (at most max_iters each), requires
/// the two limits to agree to 1e-8, and extracts (r*, h*) from the final
/// prox evaluations. Throws "no certified reference" on failure.
OracleSolution solve_composite_reference(const ProblemSpec& spec,
                                         long max_iters = 1000000);

// ---------------------------------------------------------------------------
// Generic DYS views of the primal-dual algorithms
// ---------------------------------------------------------------------------

/// A preconditioned DYS instance on the product space X x Y, together with
/// the inner product of the metric it lives in. The callbacks reference the
/// spec they were built from; keep it alive while the view is in use.
struct DysProduct {
  Resolvent resolvent_b;  // z-step resolvent
  Resolvent resolvent_a;  // u-step resolvent
  ForwardOp apply_c;
  std::function<double(const Vector&, const Vector&)> inner;
  Index nx = 0;
  Index ny = 0;
};

DysProduct dys_view_pddy(const ProblemSpec& spec, double gamma, double tau);
DysProduct dys_view_pd3o(const ProblemSpec& spec, double gamma, double tau);
DysProduct dys_view_cv31(const ProblemSpec& spec, double gamma, double tau);
DysProduct dys_view_cv32(const ProblemSpec& spec, double gamma, double tau);

/// Per-iteration DYS internals: v^k, z^k, u^{k+1}, C(z^k), plus the final v.
struct DysTrace {
  std::vector<Vector> v, z, u, cz;
  Vector v_final;
};

DysTrace run_dys_recording(const DysProduct& prod, Vector v0, double gamma,
                           int iters);

/// Fixed point (v*, z*, u*) mapped from a saddle through the fixed-point
/// relations; u* = z* = (x*, y*) and v* = z* + gamma b* for the saddle
/// selection b*.
struct DysFixedPoint {
  Vector v_star, z_star, u_star;
};

DysFixedPoint dys_fixed_point_pddy(const ProblemSpec& spec,
                                   const SaddlePoint& saddle, double gamma,
                                   double tau);
DysFixedPoint dys_fixed_point_pd3o(const ProblemSpec& spec,
                                   const SaddlePoint& saddle, double gamma,
                                   double tau);
DysFixedPoint dys_fixed_point_cv31(const ProblemSpec& spec,
                                   const SaddlePoint& saddle, double gamma,
                                   double tau);
DysFixedPoint dys_fixed_point_cv32(const ProblemSpec& spec,
                                   const SaddlePoint& saddle, double gamma,
                                   double tau);

/// Evaluates both sides of the fundamental equality along the trace, with
/// b^k = (v^k - z^k)/gamma and a^{k+1} = (2z^k - v^k - gamma C(z^k) -
/// u^{k+1})/gamma, in the product metric. Returns the worst relative
/// residual. An optional perturbation is added to a^{k+1} (fault injection
/// for detector-sensitivity tests).
double check_fundamental_equality(const DysProduct& prod, const DysTrace& tr,
                                  const DysFixedPoint& fix, double gamma,
                                  double perturb_a = 0.0);

// ---------------------------------------------------------------------------
// Rate verification
// ---------------------------------------------------------------------------

enum class Guarantee {
  ErgodicGapPd3o,      // O(1/k) Lagrangian-gap bound for PD3O
  ErgodicBregmanPddy,  // O(1/k) Bregman-sum bound for PDDY
  LinearLico,          // linear rate, linearly constrained strongly convex F
  LinearPd3o,          // linear rate, R smooth + primal-dual strong convexity
  LinearPddy,          // linear rate, primal-dual strong convexity
};

struct RateReport {
  Guarantee guarantee = Guarantee::ErgodicGapPd3o;
  double r_theoretical = 1.0;
  double r_empirical = 0.0;
  long bound_violations = 0;
  double margin = 0.0;
  long points_checked = 0;
};

std::string guarantee_name(Guarantee g);
nlohmann::json rate_report_to_json(const RateReport& report);

/// Checks gap_k <= V0 / (k gamma) at every logged k >= 1, where the gap is
/// the Lagrangian gap at the ergodic points or the Bregman sum
/// D_F(xbar) + D_{H*}(ybar) + D_R(sbar). Multiple traces (seeds) are
/// averaged with a 3-standard-error statistical slack; a single trace is
/// checked exactly (1e-9 relative floating-point guard).
RateReport verify_ergodic_bound(const std::vector<RunTrace>& traces,
                                const ProblemSpec& spec,
                                const SaddlePoint& saddle, Guarantee which);

/// Checks mean V^k <= r^k V^0 (same statistical slack policy), with the
/// guarantee-specific Lyapunov V^k and rate r. For deterministic single traces
/// logged every iteration, also enforces per-step descent
/// V^{k+1} <= r V^k (1 + 1e-9). kappa must exceed beta/rho (pass 0 to use
/// 2 beta/rho, or any positive value when beta = 0).
RateReport verify_linear_rate(const std::vector<RunTrace>& traces,
                              const ProblemSpec& spec,
                              const SaddlePoint& saddle,
                              const AssumptionConstants& constants,
                              Guarantee which, double kappa = 0.0);

}  // namespace pdsplit
