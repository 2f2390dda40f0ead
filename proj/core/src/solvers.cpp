#include "pdsplit/solvers.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "pdsplit/rng.hpp"

namespace pdsplit {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Gossip operators stand for the Gram matrix W = L*L of an implicit
// square-root constraint map; only the primal-only forms consume them.
void reject_gossip_l(const ProblemSpec& spec, const char* who) {
  if (spec.L.spectral_is_self())
    throw Error(std::string(who) +
                ": gossip operators represent W = L*L; use prilico/destroy "
                "(or a dense square root as L)");
}

void check_pd_stepsizes(const ProblemSpec& spec, double gamma, double tau,
                        bool enforce, const char* who) {
  reject_gossip_l(spec, who);
  if (gamma <= 0 || tau <= 0)
    throw Error(std::string(who) + ": gamma and tau must be > 0");
  if (enforce && gamma * tau * spec.spectral.op_norm_sq >= 1.0)
    throw Error(std::string(who) + ": gamma tau ||L||^2 = " +
                std::to_string(gamma * tau * spec.spectral.op_norm_sq) +
                " must be < 1");
}
}  // namespace

DysStep dys_step(const Resolvent& resolvent_b, const Resolvent& resolvent_a,
                 const ForwardOp& apply_c, DysState& state) {
  DysStep out;
  out.z = resolvent_b(state.v, state.gamma);
  out.u = resolvent_a(2.0 * out.z - state.v - state.gamma * apply_c(out.z),
                      state.gamma);
  state.v += out.u - out.z;
  return out;
}

double dual_metric_norm_sq(const LinOp& l, double gamma, double tau,
                           const Vector& y) {
  return (gamma / tau) * y.squaredNorm() -
         gamma * gamma * l.adjoint(y).squaredNorm();
}

double p_norm_sq(const LinOp& l, double gamma, double tau, const Vector& x,
                 const Vector& y) {
  return x.squaredNorm() + dual_metric_norm_sq(l, gamma, tau, y);
}

double q_norm_sq(const LinOp& l, double gamma, double tau, const Vector& x,
                 const Vector& y) {
  return (gamma / tau) * x.squaredNorm() -
         gamma * gamma * l.apply(x).squaredNorm() + y.squaredNorm();
}

// ---------------------------------------------------------------------------

PddyState make_pddy_state(const ProblemSpec& spec, Vector p0, Vector y0,
                          double gamma, double tau, bool enforce) {
  check_pd_stepsizes(spec, gamma, tau, enforce, "pddy");
  check_dim("pddy p0", spec.primal_dim(), p0.size());
  check_dim("pddy y0", spec.dual_dim(), y0.size());
  PddyState s;
  s.p = std::move(p0);
  s.y = std::move(y0);
  s.gamma = gamma;
  s.tau = tau;
  s.lstar_y = spec.L.adjoint(s.y);
  s.last_x = s.p;
  s.last_s = s.p;
  return s;
}

void pddy_step(const ProblemSpec& spec, Estimator& est, PddyState& state) {
  const double gamma = state.gamma, tau = state.tau;
  state.y = spec.H.prox_conjugate(
      state.y + tau * spec.L.apply(state.p - gamma * state.lstar_y), tau);
  state.lstar_y = spec.L.adjoint(state.y);
  const Vector x = state.p - gamma * state.lstar_y;
  const Vector g = est.sample(spec.F, x);
  Vector s = spec.R.prox(2.0 * x - state.p - gamma * g, gamma);
  state.p += s - x;
  state.last_x = x;
  state.last_s = std::move(s);
}

Pd3oState make_pd3o_state(const ProblemSpec& spec, Vector p0, Vector y0,
                          double gamma, double tau, bool enforce) {
  check_pd_stepsizes(spec, gamma, tau, enforce, "pd3o");
  check_dim("pd3o p0", spec.primal_dim(), p0.size());
  check_dim("pd3o y0", spec.dual_dim(), y0.size());
  Pd3oState s;
  s.p = std::move(p0);
  s.y = std::move(y0);
  s.gamma = gamma;
  s.tau = tau;
  s.lstar_y = spec.L.adjoint(s.y);
  s.last_x = s.p;
  return s;
}

void pd3o_step(const ProblemSpec& spec, Estimator& est, Pd3oState& state) {
  const double gamma = state.gamma, tau = state.tau;
  const Vector x = spec.R.prox(state.p, gamma);
  const Vector g = est.sample(spec.F, x);
  const Vector w = 2.0 * x - state.p - gamma * g;
  state.y = spec.H.prox_conjugate(
      state.y + tau * spec.L.apply(w - gamma * state.lstar_y), tau);
  state.lstar_y = spec.L.adjoint(state.y);
  state.p = x - gamma * g - gamma * state.lstar_y;
  state.last_x = x;
}

CondatVuState make_condat_vu_state(const ProblemSpec& spec, CondatVuForm form,
                                   Vector x0, Vector d0, double gamma,
                                   double tau, bool enforce) {
  reject_gossip_l(spec, "condat_vu");
  if (gamma <= 0 || tau <= 0)
    throw Error("condat_vu: gamma and tau must be > 0");
  if (enforce) {
    const double lhs = spec.F.nu() / 2.0;
    const double rhs = 1.0 / tau - gamma * spec.spectral.op_norm_sq;
    if (lhs >= rhs)
      throw Error("condat_vu: need nu/2 < 1/tau - gamma ||L||^2 (" +
                  std::to_string(lhs) + " >= " + std::to_string(rhs) + ")");
  }
  check_dim("condat_vu x0", spec.primal_dim(), x0.size());
  check_dim("condat_vu d0", spec.dual_dim(), d0.size());
  CondatVuState s;
  s.form = form;
  s.x = std::move(x0);
  s.d = std::move(d0);
  s.gamma = gamma;
  s.tau = tau;
  return s;
}

void condat_vu_step(const ProblemSpec& spec, CondatVuState& state) {
  const double gamma = state.gamma, tau = state.tau;
  if (state.form == CondatVuForm::Alg31) {
    const Vector x_new = spec.R.prox(
        state.x - tau * (spec.F.grad(state.x) + spec.L.adjoint(state.d)), tau);
    state.d = spec.H.prox_conjugate(
        state.d + gamma * spec.L.apply(2.0 * x_new - state.x), gamma);
    state.x = x_new;
  } else {
    const Vector y =
        spec.H.prox_conjugate(state.d + gamma * spec.L.apply(state.x), gamma);
    const Vector x_new = spec.R.prox(
        state.x -
            tau * (spec.F.grad(state.x) + spec.L.adjoint(2.0 * y - state.d)),
        tau);
    state.d = y;
    state.x = x_new;
  }
}

LicoState make_lico_state(const ProblemSpec& spec, Vector x0, Vector y0,
                          double gamma, double tau, bool enforce) {
  if (spec.R.kind() != ProxFn::Kind::Zero ||
      spec.H.kind() != ProxFn::Kind::IndicatorPoint)
    throw Error("lico: requires R = 0 and H = indicator of {y = b}");
  check_pd_stepsizes(spec, gamma, tau, enforce, "lico");
  check_dim("lico x0", spec.primal_dim(), x0.size());
  check_dim("lico y0", spec.dual_dim(), y0.size());
  LicoState s;
  s.x = std::move(x0);
  s.y = std::move(y0);
  s.gamma = gamma;
  s.tau = tau;
  s.lstar_y = spec.L.adjoint(s.y);
  return s;
}

void licosgd_step(const ProblemSpec& spec, Estimator& est, LicoState& state) {
  const double gamma = state.gamma, tau = state.tau;
  const Vector& b = spec.H.point();
  const Vector g = est.sample(spec.F, state.x);
  const Vector w = state.x - gamma * g;
  state.y += tau * spec.L.apply(w - gamma * state.lstar_y) - tau * b;
  state.lstar_y = spec.L.adjoint(state.y);
  state.x = w - gamma * state.lstar_y;
}

void prilicosgd_step(const SmoothFn& f, const LinOp& w, const Vector& c,
                     Estimator& est, PriLicoState& state) {
  const double gamma = state.gamma, tau = state.tau;
  const Vector g = est.sample(f, state.x);
  const Vector t = state.x - gamma * g;
  state.a += tau * w.apply(t - gamma * state.a) - tau * c;
  state.x = t - gamma * state.a;
}

DestroyState make_destroy_state(Matrix what, std::vector<Vector> x0,
                                std::vector<Vector> a0, double gamma,
                                double tau) {
  if (gamma <= 0 || tau <= 0)
    throw Error("destroy: gamma and tau must be > 0");
  const auto n = static_cast<size_t>(what.rows());
  if (x0.size() != n || a0.size() != n)
    throw Error("destroy: need one x_i and a_i per node");
  // Connected graph <=> the zero eigenvalue (consensus direction) is simple.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(what, Eigen::EigenvaluesOnly);
  const double lam_max = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  int zeros = 0;
  for (Index i = 0; i < eig.eigenvalues().size(); ++i)
    if (eig.eigenvalues()[i] <= 1e-10 * std::max(lam_max, 1.0)) ++zeros;
  if (zeros != 1) throw Error("destroy: disconnected graph");
  Vector asum = Vector::Zero(a0.front().size());
  double scale = 0.0;
  for (const auto& a : a0) {
    check_dim("destroy a0", asum.size(), a.size());
    asum += a;
    scale = std::max(scale, a.cwiseAbs().maxCoeff());
  }
  if (asum.cwiseAbs().maxCoeff() > 1e-10 * (1.0 + scale))
    throw Error("destroy: sum_i a_i^0 must be 0");
  DestroyState s;
  s.what = std::move(what);
  s.x = std::move(x0);
  s.a = std::move(a0);
  s.t.assign(n, Vector::Zero(s.x.front().size()));
  s.gamma = gamma;
  s.tau = tau;
  return s;
}

void destroy_step(const std::vector<SmoothFn>& local_fns,
                  std::vector<Estimator>& ests, DestroyState& state) {
  const auto n = state.x.size();
  if (local_fns.size() != n || ests.size() != n)
    throw Error("destroy_step: one objective and estimator per node");
  const double gamma = state.gamma, tau = state.tau;
  for (size_t i = 0; i < n; ++i)
    state.t[i] = state.x[i] - gamma * ests[i].sample(local_fns[i], state.x[i]);
  std::vector<Vector> a_new(n);
  for (size_t i = 0; i < n; ++i) {
    const Index ii = static_cast<Index>(i);
    const double wii = state.what(ii, ii);
    Vector ai = (1.0 - tau * gamma * wii) * state.a[i] + tau * wii * state.t[i];
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double wij = state.what(ii, static_cast<Index>(j));
      if (wij != 0.0) ai += tau * wij * (state.t[j] - gamma * state.a[j]);
    }
    a_new[i] = std::move(ai);
  }
  state.a = std::move(a_new);
  for (size_t i = 0; i < n; ++i) state.x[i] = state.t[i] - gamma * state.a[i];
}

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------

Estimator make_estimator_from(const EstimatorConfig& cfg, std::uint64_t seed) {
  switch (cfg.kind) {
    case EstimatorKind::Full:
      return Estimator::full();
    case EstimatorKind::Minibatch:
      return Estimator::minibatch(cfg.batch, seed);
    case EstimatorKind::LSVRG:
      return Estimator::lsvrg(cfg.lsvrg_p, seed);
    case EstimatorKind::SAGA:
      return Estimator::saga(seed);
  }
  throw Error("make_estimator: unreachable");
}

namespace {

// F + R + H(L .) with indicator terms counted as 0 (their violation shows up
// in the dual KKT residual).
double objective_value(const ProblemSpec& spec, const Vector& x) {
  double obj = spec.F.value(x);
  if (spec.R.kind() != ProxFn::Kind::IndicatorPoint) {
    const auto r = spec.R.value(x);
    obj += r ? *r : std::numeric_limits<double>::infinity();
  }
  if (spec.H.kind() != ProxFn::Kind::IndicatorPoint) {
    const auto h = spec.H.value(spec.L.apply(x));
    obj += h ? *h : std::numeric_limits<double>::infinity();
  }
  return obj;
}

}  // namespace

std::pair<double, double> default_stepsizes(const ProblemSpec& spec,
                                            const EstimatorConfig& est) {
  double gamma;
  if (est.kind == EstimatorKind::Minibatch) {
    gamma = 0.01 / spec.F.nu();  // benchmark preset; no admissible constants
  } else {
    gamma = max_stepsize(make_estimator_from(est, 0).constants(spec.F));
  }
  const double lsq = spec.spectral.op_norm_sq;
  const double tau = lsq > 0 ? 0.99 / (gamma * lsq) : 1.0;
  return {gamma, tau};
}

RunTrace run(SolverKind solver, const ProblemSpec& spec,
             const RunConfig& config) {
  RunTrace trace;
  trace.solver = solver;
  trace.estimator = config.estimator;
  trace.iters = config.iters;
  trace.seed = config.seed;
  trace.log_every = std::max<long>(1, config.log_every);

  const bool cv =
      solver == SolverKind::CondatVu31 || solver == SolverKind::CondatVu32;
  double gamma = config.gamma, tau = config.tau;
  if (gamma <= 0 || tau <= 0) {
    if (cv) {
      // Condat-Vu roles: primal prox step tau, dual prox step gamma with
      // nu/2 < 1/tau - gamma ||L||^2.
      const double nu = spec.F.nu();
      const double lsq = spec.spectral.op_norm_sq;
      if (tau <= 0) tau = 1.0 / nu;
      if (gamma <= 0)
        gamma = lsq > 0 ? 0.9 * (1.0 / tau - nu / 2.0) / lsq : 1.0;
    } else {
      auto [g, t] = default_stepsizes(spec, config.estimator);
      if (gamma <= 0) gamma = g;
      if (tau <= 0) tau = t;
    }
  }
  trace.gamma = gamma;
  trace.tau = tau;
  if (cv && config.estimator.kind != EstimatorKind::Full)
    throw Error("run: stochastic CV not supported");

  Estimator est = make_estimator_from(config.estimator, config.seed);
  Vector x0 = config.x0.value_or(Vector::Zero(spec.primal_dim()));
  Vector y0 = config.y0.value_or(Vector::Zero(spec.dual_dim()));
  check_dim("run x0", spec.primal_dim(), x0.size());
  check_dim("run y0", spec.dual_dim(), y0.size());
  trace.x0 = x0;
  trace.y0 = y0;
  est.init(spec.F, x0);

  if (config.estimator.kind == EstimatorKind::Minibatch) {
    trace.out_of_theorem = true;
  } else if (!cv) {
    const double cap = max_stepsize(est.constants(spec.F));
    if (gamma > cap * (1.0 + 1e-12) ||
        gamma * tau * spec.spectral.op_norm_sq >= 1.0)
      trace.out_of_theorem = true;
  }

  const bool is_pddy = solver == SolverKind::Pddy;
  const bool is_prilico = solver == SolverKind::PriLico;

  PddyState pddy;
  Pd3oState pd3o;
  CondatVuState cvs;
  LicoState lico;
  PriLicoState prili;
  LinOp w_op = LinOp::identity(1);
  Vector c_vec;
  Vector prev_x;  // x^k consumed by Lico/PriLico steps

  const bool enforce = config.enforce_stepsize;
  switch (solver) {
    case SolverKind::Pddy:
      pddy = make_pddy_state(spec, x0, y0, gamma, tau, enforce);
      break;
    case SolverKind::Pd3o:
      pd3o = make_pd3o_state(spec, x0, y0, gamma, tau, enforce);
      break;
    case SolverKind::CondatVu31:
    case SolverKind::CondatVu32:
      cvs = make_condat_vu_state(spec,
                                 solver == SolverKind::CondatVu31
                                     ? CondatVuForm::Alg31
                                     : CondatVuForm::Alg32,
                                 x0, y0, gamma, tau, enforce);
      break;
    case SolverKind::Lico:
      lico = make_lico_state(spec, x0, y0, gamma, tau, enforce);
      break;
    case SolverKind::PriLico:
      if (spec.R.kind() != ProxFn::Kind::Zero ||
          spec.H.kind() != ProxFn::Kind::IndicatorPoint)
        throw Error("prilico: requires R = 0 and H = indicator of {y = b}");
      if (gamma <= 0 || tau <= 0)
        throw Error("prilico: gamma and tau must be > 0");
      if (enforce && gamma * tau * spec.spectral.op_norm_sq >= 1.0)
        throw Error("prilico: gamma tau ||W|| must be < 1");
      if (spec.L.spectral_is_self()) {
        w_op = spec.L;  // gossip operators are already the Gram matrix W
        if (spec.H.point().size() > 0 &&
            spec.H.point().cwiseAbs().maxCoeff() != 0.0)
          throw Error("prilico: gossip form requires b = 0");
        c_vec = Vector::Zero(spec.primal_dim());
      } else {
        const Matrix ld = spec.L.to_dense();
        w_op = LinOp::dense(ld.transpose() * ld);
        c_vec = spec.L.adjoint(spec.H.point());
      }
      prili.x = x0;
      prili.a = spec.L.adjoint(y0);
      prili.gamma = gamma;
      prili.tau = tau;
      break;
  }

  auto step = [&] {
    switch (solver) {
      case SolverKind::Pddy:
        pddy_step(spec, est, pddy);
        break;
      case SolverKind::Pd3o:
        pd3o_step(spec, est, pd3o);
        break;
      case SolverKind::CondatVu31:
      case SolverKind::CondatVu32:
        condat_vu_step(spec, cvs);
        break;
      case SolverKind::Lico:
        prev_x = lico.x;
        licosgd_step(spec, est, lico);
        break;
      case SolverKind::PriLico:
        prev_x = prili.x;
        prilicosgd_step(spec.F, w_op, c_vec, est, prili);
        break;
    }
  };
  // x^j entering the ergodic average: the point the gradient was taken at
  // (PDDY/PD3O compute it mid-step; Lico forms consume the pre-step state;
  // CV contributes its fresh primal iterate).
  auto grad_point = [&]() -> const Vector& {
    switch (solver) {
      case SolverKind::Pddy:
        return pddy.last_x;
      case SolverKind::Pd3o:
        return pd3o.last_x;
      case SolverKind::CondatVu31:
      case SolverKind::CondatVu32:
        return cvs.x;
      case SolverKind::Lico:
      case SolverKind::PriLico:
        return prev_x;
    }
    throw Error("unreachable");
  };
  auto y_state = [&]() -> const Vector& {
    switch (solver) {
      case SolverKind::Pddy:
        return pddy.y;
      case SolverKind::Pd3o:
        return pd3o.y;
      case SolverKind::CondatVu31:
      case SolverKind::CondatVu32:
        return cvs.d;
      case SolverKind::Lico:
        return lico.y;
      case SolverKind::PriLico:
        return prili.a;  // a^k = L* y^k stands in for the dual state
    }
    throw Error("unreachable");
  };
  auto primal = [&]() -> const Vector& {
    switch (solver) {
      case SolverKind::Pddy:
        return pddy.last_x;
      case SolverKind::Pd3o:
        return pd3o.last_x;
      case SolverKind::CondatVu31:
      case SolverKind::CondatVu32:
        return cvs.x;
      case SolverKind::Lico:
        return lico.x;
      case SolverKind::PriLico:
        return prili.x;
    }
    throw Error("unreachable");
  };
  auto p_state = [&]() -> const Vector* {
    switch (solver) {
      case SolverKind::Pddy:
        return &pddy.p;
      case SolverKind::Pd3o:
        return &pd3o.p;
      default:
        return nullptr;
    }
  };

  Vector x_sum = Vector::Zero(spec.primal_dim());
  Vector y_sum = Vector::Zero(y_state().size());
  Vector s_sum = Vector::Zero(spec.primal_dim());

  const auto t0 = std::chrono::steady_clock::now();
  auto emit = [&](long k) {
    TraceRecord rec;
    rec.k = k;
    rec.x = primal();
    rec.y = y_state();
    if (const Vector* p = p_state()) rec.p = *p;
    rec.x_bar = k > 0 ? Vector(x_sum / static_cast<double>(k)) : rec.x;
    rec.y_bar = k > 0 ? Vector(y_sum / static_cast<double>(k)) : rec.y;
    if (is_pddy)
      rec.s_bar = k > 0 ? Vector(s_sum / static_cast<double>(k)) : rec.x;
    rec.objective = objective_value(spec, rec.x);
    if (is_prilico) {
      rec.kkt_primal = gamma * (spec.F.grad(rec.x) + prili.a).norm();
      if (spec.L.spectral_is_self())
        rec.kkt_dual =
            tau * std::sqrt(std::max(0.0, rec.x.dot(spec.L.apply(rec.x))));
      else
        rec.kkt_dual = tau * (spec.L.apply(rec.x) - spec.H.point()).norm();
      rec.duality_gap = kNaN;
    } else {
      auto [kp, kd] = kkt_residual(spec, rec.x, rec.y, gamma, tau);
      rec.kkt_primal = kp;
      rec.kkt_dual = kd;
      rec.duality_gap = kNaN;
      if (config.oracle) {
        const auto gap =
            duality_gap(spec, rec.x_bar, rec.y_bar, *config.oracle);
        if (gap) rec.duality_gap = *gap;
      }
    }
    rec.dist_to_oracle =
        config.oracle ? (rec.x - config.oracle->x_star).norm() : kNaN;
    if (est.kind() == EstimatorKind::Full) {
      rec.sigma_sq = 0.0;
    } else if (config.oracle && (est.kind() == EstimatorKind::LSVRG ||
                                 est.kind() == EstimatorKind::SAGA)) {
      rec.sigma_sq = est.sigma_sq(spec.F, config.oracle->x_star);
    } else {
      rec.sigma_sq = kNaN;
    }
    rec.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    trace.records.push_back(std::move(rec));
  };

  // Infeasible constraints (b outside ran(L)) are not detectable directly;
  // a constraint residual that fails to decrease over 1000 iterations
  // triggers a warning.
  const bool lico_like = solver == SolverKind::Lico || is_prilico;
  double stall_ref = std::numeric_limits<double>::infinity();
  auto constraint_residual = [&]() {
    if (solver == SolverKind::Lico)
      return (spec.L.apply(lico.x) - spec.H.point()).norm();
    if (spec.L.spectral_is_self())
      return std::sqrt(std::max(0.0, prili.x.dot(spec.L.apply(prili.x))));
    return (spec.L.apply(prili.x) - spec.H.point()).norm();
  };

  emit(0);
  for (long j = 0; j < config.iters; ++j) {
    step();
    x_sum += grad_point();
    y_sum += y_state();
    if (is_pddy) s_sum += pddy.last_s;
    const long k = j + 1;
    if (lico_like && trace.warning.empty() && k % 1000 == 0) {
      const double res = constraint_residual();
      const double floor =
          1e-10 * (1.0 + (spec.H.point().size() > 0 ? spec.H.point().norm()
                                                    : 0.0));
      if (res >= stall_ref && res > floor)
        trace.warning =
            "constraint residual non-decreasing over 1000 iterations "
            "(b outside range(L)?)";
      stall_ref = res;
    }
    const Vector& xc = primal();
    const Vector& yc = y_state();
    const bool bad = !xc.allFinite() || !yc.allFinite() ||
                     std::max(xc.norm(), yc.norm()) > config.divergence_norm;
    if (bad) {
      emit(k);
      trace.diverged = true;
      trace.diverged_at = k;
      trace.diagnostic =
          (!xc.allFinite() || !yc.allFinite())
              ? "NaN/Inf in iterate at iteration " + std::to_string(k)
              : "norm exceeded " + std::to_string(config.divergence_norm) +
                    " at iteration " + std::to_string(k);
      break;
    }
    if (k % trace.log_every == 0 || k == config.iters) emit(k);
  }
  return trace;
}

RunTrace run_destroy(const std::vector<SmoothFn>& local_fns,
                     const Matrix& what, const RunConfig& config) {
  const auto n = local_fns.size();
  if (n == 0) throw Error("run_destroy: no local objectives");
  if (static_cast<size_t>(what.rows()) != n)
    throw Error("run_destroy: gossip matrix size must match node count");
  const Index d = local_fns.front().dim();
  for (const auto& f : local_fns) check_dim("run_destroy", d, f.dim());
  const auto nd = static_cast<Index>(n) * d;

  RunTrace trace;
  trace.solver = SolverKind::PriLico;  // lifted identity; see docs
  trace.estimator = config.estimator;
  trace.iters = config.iters;
  trace.seed = config.seed;
  trace.log_every = std::max<long>(1, config.log_every);

  double nu_max = 0.0;
  for (const auto& f : local_fns) nu_max = std::max(nu_max, f.nu());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(what, Eigen::EigenvaluesOnly);
  const double w_norm = std::max(eig.eigenvalues().maxCoeff(), 0.0);

  double gamma = config.gamma, tau = config.tau;
  if (gamma <= 0) gamma = 1.0 / (2.0 * nu_max);
  if (tau <= 0) tau = w_norm > 0 ? 0.99 / (gamma * w_norm) : 1.0;
  trace.gamma = gamma;
  trace.tau = tau;
  if (config.enforce_stepsize && gamma * tau * w_norm >= 1.0 + 1e-12)
    throw Error("run_destroy: need gamma tau ||W|| <= 1");

  Vector x0 = config.x0.value_or(Vector::Zero(nd));
  Vector a0 = config.y0.value_or(Vector::Zero(nd));
  check_dim("run_destroy x0", nd, x0.size());
  check_dim("run_destroy a0", nd, a0.size());
  trace.x0 = x0;
  trace.y0 = a0;

  std::vector<Vector> xs(n), as(n);
  for (size_t i = 0; i < n; ++i) {
    xs[i] = x0.segment(static_cast<Index>(i) * d, d);
    as[i] = a0.segment(static_cast<Index>(i) * d, d);
  }
  DestroyState state = make_destroy_state(what, xs, as, gamma, tau);

  std::vector<Estimator> ests;
  ests.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    ests.push_back(make_estimator_from(
        config.estimator, rng::draw_u64(config.seed, 0xDE57ULL, i)));
    ests.back().init(local_fns[i], state.x[i]);
  }

  auto stack = [&](const std::vector<Vector>& vs) {
    Vector out(nd);
    for (size_t i = 0; i < n; ++i)
      out.segment(static_cast<Index>(i) * d, d) = vs[i];
    return out;
  };

  Vector x_sum = Vector::Zero(nd);
  const auto t0 = std::chrono::steady_clock::now();
  auto emit = [&](long k) {
    TraceRecord rec;
    rec.k = k;
    rec.x = stack(state.x);
    rec.p = stack(state.a);
    rec.y = Vector();
    rec.x_bar = k > 0 ? Vector(x_sum / static_cast<double>(k)) : rec.x;
    double obj = 0.0, kp = 0.0;
    for (size_t i = 0; i < n; ++i) {
      obj += local_fns[i].value(state.x[i]);
      kp += (local_fns[i].grad(state.x[i]) + state.a[i]).squaredNorm();
    }
    rec.objective = obj;
    rec.kkt_primal = gamma * std::sqrt(kp);
    // tau ||W^{1/2} x|| = tau sqrt(<x, W x>) on the lifted constraint.
    double xtwx = 0.0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) {
        const double wij = what(static_cast<Index>(i), static_cast<Index>(j));
        if (wij != 0.0) xtwx += wij * state.x[i].dot(state.x[j]);
      }
    rec.kkt_dual = tau * std::sqrt(std::max(0.0, xtwx));
    rec.duality_gap = kNaN;
    rec.dist_to_oracle =
        config.oracle ? (rec.x - config.oracle->x_star).norm() : kNaN;
    rec.sigma_sq =
        config.estimator.kind == EstimatorKind::Full ? 0.0 : kNaN;
    rec.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    trace.records.push_back(std::move(rec));
  };

  emit(0);
  for (long j = 0; j < config.iters; ++j) {
    Vector pre = stack(state.x);
    destroy_step(local_fns, ests, state);
    x_sum += pre;
    const long k = j + 1;
    Vector xc = stack(state.x);
    Vector ac = stack(state.a);
    const bool bad = !xc.allFinite() || !ac.allFinite() ||
                     std::max(xc.norm(), ac.norm()) > config.divergence_norm;
    if (bad) {
      emit(k);
      trace.diverged = true;
      trace.diverged_at = k;
      trace.diagnostic = "divergence at iteration " + std::to_string(k);
      break;
    }
    if (k % trace.log_every == 0 || k == config.iters) emit(k);
  }
  return trace;
}

// ---------------------------------------------------------------------------

std::string solver_name(SolverKind kind) {
  switch (kind) {
    case SolverKind::Pddy:
      return "pddy";
    case SolverKind::Pd3o:
      return "pd3o";
    case SolverKind::CondatVu31:
      return "cv31";
    case SolverKind::CondatVu32:
      return "cv32";
    case SolverKind::Lico:
      return "lico";
    case SolverKind::PriLico:
      return "prilico";
  }
  return "?";
}

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Full:
      return "full";
    case EstimatorKind::Minibatch:
      return "minibatch";
    case EstimatorKind::LSVRG:
      return "lsvrg";
    case EstimatorKind::SAGA:
      return "saga";
  }
  return "?";
}

void write_trace_csv(const RunTrace& trace, const std::string& csv_path,
                     const std::string& config_json_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw Error("write_trace_csv: cannot open " + csv_path);
  csv << "k,objective,duality_gap,kkt_primal,kkt_dual,dist_to_oracle,"
         "sigma_sq,wall_ns\n";
  char buf[512];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof(buf),
                  "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%lld\n", r.k,
                  r.objective, r.duality_gap, r.kkt_primal, r.kkt_dual,
                  r.dist_to_oracle, r.sigma_sq,
                  static_cast<long long>(r.wall_ns));
    csv << buf;
  }

  nlohmann::json cfg;
  cfg["solver"] = solver_name(trace.solver);
  cfg["estimator"] = estimator_name(trace.estimator.kind);
  if (trace.estimator.kind == EstimatorKind::LSVRG)
    cfg["lsvrg_p"] = trace.estimator.lsvrg_p;
  if (trace.estimator.kind == EstimatorKind::Minibatch)
    cfg["batch"] = trace.estimator.batch;
  cfg["gamma"] = trace.gamma;
  cfg["tau"] = trace.tau;
  cfg["iters"] = trace.iters;
  cfg["seed"] = trace.seed;
  cfg["log_every"] = trace.log_every;
  cfg["out_of_theorem"] = trace.out_of_theorem;
  cfg["diverged"] = trace.diverged;
  if (trace.diverged) {
    cfg["diverged_at"] = trace.diverged_at;
    cfg["diagnostic"] = trace.diagnostic;
  }
  std::ofstream js(config_json_path);
  if (!js) throw Error("write_trace_csv: cannot open " + config_json_path);
  js << cfg.dump(2) << "\n";
}

}  // namespace pdsplit
