#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pdsplit/estimators.hpp"
#include "pdsplit/problem.hpp"

namespace pdsplit {

// ---------------------------------------------------------------------------
// Generic three-operator splitting
// ---------------------------------------------------------------------------

/// Resolvent callback: (v, gamma) -> J_{gamma M}(v).
using Resolvent = std::function<Vector(const Vector&, double)>;
/// Forward operator callback for the cocoercive term.
using ForwardOp = std::function<Vector(const Vector&)>;

struct DysState {
  Vector v;
  double gamma = 0.0;
};

struct DysStep {
  Vector z;
  Vector u;
};

/// One iteration of three-operator splitting:
///   z   = J_{gamma B}(v)
///   u   = J_{gamma A}(2z - v - gamma C(z))
///   v'  = v + u - z
/// Convergence needs gamma in (0, 2 xi) for the cocoercivity constant of C;
/// this is not enforced here (stochastic variants have their own caps).
DysStep dys_step(const Resolvent& resolvent_b, const Resolvent& resolvent_a,
                 const ForwardOp& apply_c, DysState& state);

// ---------------------------------------------------------------------------
// Metrics on the product space
// ---------------------------------------------------------------------------

/// ||y||^2 under (gamma/tau) I - gamma^2 L L* (the dual block of P).
double dual_metric_norm_sq(const LinOp& l, double gamma, double tau,
                           const Vector& y);

/// ||(x,y)||_P^2 = ||x||^2 + (gamma/tau)||y||^2 - gamma^2 ||L* y||^2.
double p_norm_sq(const LinOp& l, double gamma, double tau, const Vector& x,
                 const Vector& y);

/// ||(x,y)||_Q^2 = (gamma/tau)||x||^2 - gamma^2 ||L x||^2 + ||y||^2.
double q_norm_sq(const LinOp& l, double gamma, double tau, const Vector& x,
                 const Vector& y);

// ---------------------------------------------------------------------------
// Primal-dual iterations (each a pure step over an explicit state record)
// ---------------------------------------------------------------------------

/// PDDY state. One L and one L* application per step (adjoint cached).
struct PddyState {
  Vector p;
  Vector y;
  double gamma = 0.0;
  double tau = 0.0;
  Vector lstar_y;  // cached L* y
  Vector last_x;   // x^k computed mid-step (gradient point)
  Vector last_s;   // s^{k+1}
};

/// Throws unless gamma tau ||L||^2 < 1 (set enforce=false to only record the
/// violation; used by grid search).
PddyState make_pddy_state(const ProblemSpec& spec, Vector p0, Vector y0,
                          double gamma, double tau, bool enforce = true);

/// y^{k+1} = prox_{tau H*}(y^k + tau L(p^k - gamma L* y^k))
/// x^k     = p^k - gamma L* y^{k+1}
/// s^{k+1} = prox_{gamma R}(2 x^k - p^k - gamma g^{k+1}),  g^{k+1} at x^k
/// p^{k+1} = p^k + s^{k+1} - x^k
void pddy_step(const ProblemSpec& spec, Estimator& est, PddyState& state);

struct Pd3oState {
  Vector p;
  Vector y;
  double gamma = 0.0;
  double tau = 0.0;
  Vector lstar_y;
  Vector last_x;
};

Pd3oState make_pd3o_state(const ProblemSpec& spec, Vector p0, Vector y0,
                          double gamma, double tau, bool enforce = true);

/// x^k     = prox_{gamma R}(p^k)
/// w^k     = 2 x^k - p^k - gamma g^{k+1},  g^{k+1} at x^k
/// y^{k+1} = prox_{tau H*}(y^k + tau L(w^k - gamma L* y^k))
/// p^{k+1} = x^k - gamma g^{k+1} - gamma L* y^{k+1}
void pd3o_step(const ProblemSpec& spec, Estimator& est, Pd3oState& state);

enum class CondatVuForm { Alg31, Alg32 };

/// Deterministic Condat-Vu. Primal prox uses tau, dual prox uses gamma
/// (the role swap relative to PDDY/PD3O).
struct CondatVuState {
  CondatVuForm form = CondatVuForm::Alg31;
  Vector x;
  Vector d;  // dual iterate (Alg31) or previous dual (Alg32)
  double gamma = 0.0;
  double tau = 0.0;
};

/// Requires nu/2 < 1/tau - gamma ||L||^2.
CondatVuState make_condat_vu_state(const ProblemSpec& spec, CondatVuForm form,
                                   Vector x0, Vector d0, double gamma,
                                   double tau, bool enforce = true);

/// Alg31: x^{k} = prox_{tau R}(x^{k-1} - tau grad F(x^{k-1}) - tau L* d^k)
///        d^{k+1} = prox_{gamma H*}(d^k + gamma L (2 x^k - x^{k-1}))
/// Alg32: y^k = prox_{gamma H*}(y^{k-1} + gamma L x^k)
///        x^{k+1} = prox_{tau R}(x^k - tau grad F(x^k) - tau L*(2y^k - y^{k-1}))
void condat_vu_step(const ProblemSpec& spec, CondatVuState& state);

/// Linearly constrained SGD (R = 0, H = indicator of {y = b}).
struct LicoState {
  Vector x;
  Vector y;
  double gamma = 0.0;
  double tau = 0.0;
  Vector lstar_y;
};

LicoState make_lico_state(const ProblemSpec& spec, Vector x0, Vector y0,
                          double gamma, double tau, bool enforce = true);

/// w^k     = x^k - gamma g^{k+1}
/// y^{k+1} = y^k + tau L (w^k - gamma L* y^k) - tau b
/// x^{k+1} = w^k - gamma L* y^{k+1}
void licosgd_step(const ProblemSpec& spec, Estimator& est, LicoState& state);

/// Primal-only form with W = L*L and c = L*b.
struct PriLicoState {
  Vector x;
  Vector a;  // a^k = L* y^k
  double gamma = 0.0;
  double tau = 0.0;
};

/// t^{k+1} = x^k - gamma g^{k+1}
/// a^{k+1} = a^k + tau W (t^{k+1} - gamma a^k) - tau c
/// x^{k+1} = t^{k+1} - gamma a^{k+1}
void prilicosgd_step(const SmoothFn& f, const LinOp& w, const Vector& c,
                     Estimator& est, PriLicoState& state);

/// Synchronous decentralized run over a gossip matrix; equals PriLiCoSGD on
/// the lifted problem with W = What (x) I and c = 0.
struct DestroyState {
  std::vector<Vector> x;
  std::vector<Vector> a;
  std::vector<Vector> t;  // last t^{k+1}, kept for lifted comparisons
  Matrix what;
  double gamma = 0.0;
  double tau = 0.0;
};

/// Requires sum_i a_i^0 = 0 and a connected graph (exactly one zero
/// eigenvalue of What).
DestroyState make_destroy_state(Matrix what, std::vector<Vector> x0,
                                std::vector<Vector> a0, double gamma,
                                double tau);

/// Per-node updates touch only graph neighbors:
///   t_i^{k+1} = x_i^k - gamma g_i^{k+1}
///   a_i^{k+1} = (1 - tau gamma W_ii) a_i^k + tau W_ii t_i^{k+1}
///               + tau sum_{j != i} W_ij (t_j^{k+1} - gamma a_j^k)
///   x_i^{k+1} = t_i^{k+1} - gamma a_i^{k+1}
void destroy_step(const std::vector<SmoothFn>& local_fns,
                  std::vector<Estimator>& ests, DestroyState& state);

// ---------------------------------------------------------------------------
// Run loop with ergodic averaging and metric logging
// ---------------------------------------------------------------------------

enum class SolverKind { Pddy, Pd3o, CondatVu31, CondatVu32, Lico, PriLico };

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::Full;
  double lsvrg_p = 0.5;
  int batch = 16;
};

struct RunConfig {
  double gamma = 0.0;  // 0: gamma = max_stepsize(constants)
  double tau = 0.0;    // 0: tau gamma ||L||^2 = 0.99
  long iters = 1000;
  std::uint64_t seed = 0;
  EstimatorConfig estimator;
  long log_every = 1;
  bool enforce_stepsize = true;
  std::optional<Vector> x0;  // primal / p initialization (default 0)
  std::optional<Vector> y0;  // dual initialization (default 0)
  std::optional<SaddlePoint> oracle;  // enables gap / distance / sigma logging
  double divergence_norm = 1e12;
};

struct TraceRecord {
  long k = 0;           // iterations completed
  Vector x;             // current primal iterate
  Vector y;             // dual state y^k
  Vector p;             // p^k (PDDY/PD3O) or stacked a^k (decentralized)
  Vector x_bar;         // (1/k) sum_{j<k} x^j (gradient points)
  Vector y_bar;         // (1/k) sum_{j=1..k} y^j
  Vector s_bar;         // (1/k) sum_{j=1..k} s^j (PDDY only)
  double objective = 0.0;
  double duality_gap = 0.0;    // NaN without an oracle saddle
  double kkt_primal = 0.0;
  double kkt_dual = 0.0;
  double dist_to_oracle = 0.0;  // NaN without an oracle
  double sigma_sq = 0.0;        // NaN when not applicable
  std::int64_t wall_ns = 0;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  bool diverged = false;
  long diverged_at = -1;
  std::string diagnostic;
  std::string warning;          // soft diagnostics (e.g. constraint stall)
  bool out_of_theorem = false;  // stepsizes beyond the theorem caps

  // Config snapshot.
  SolverKind solver = SolverKind::Pd3o;
  EstimatorConfig estimator;
  double gamma = 0.0;
  double tau = 0.0;
  long iters = 0;
  std::uint64_t seed = 0;
  long log_every = 1;
  Vector x0;  // initial p / x
  Vector y0;

  const TraceRecord& back() const { return records.back(); }
};

/// Deterministic given (spec, config): bit-identical traces for equal seeds
/// (wall_ns excluded). Aborts on NaN/Inf or norm blowup with a diagnostic.
RunTrace run(SolverKind solver, const ProblemSpec& spec,
             const RunConfig& config);

/// DESTROY run over local objectives; trace vectors are the stacked node
/// states (x in `x`, a in `p`).
RunTrace run_destroy(const std::vector<SmoothFn>& local_fns,
                     const Matrix& what, const RunConfig& config);

/// Default stepsize pair per the stepsize rules: gamma from the estimator
/// constants, tau gamma ||L||^2 = 0.99 (tau = 1 when L = 0).
std::pair<double, double> default_stepsizes(const ProblemSpec& spec,
                                            const EstimatorConfig& est);

Estimator make_estimator_from(const EstimatorConfig& cfg, std::uint64_t seed);

/// CSV columns: k,objective,duality_gap,kkt_primal,kkt_dual,dist_to_oracle,
/// sigma_sq,wall_ns. The config snapshot is echoed as JSON next to it.
void write_trace_csv(const RunTrace& trace, const std::string& csv_path,
                     const std::string& config_json_path);

std::string solver_name(SolverKind kind);
std::string estimator_name(EstimatorKind kind);

}  // namespace pdsplit
