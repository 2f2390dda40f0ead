#include "pdsplit/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace pdsplit {

namespace {
constexpr double kTiny = 1e-300;

Vector cat(const Vector& x, const Vector& y) {
  Vector v(x.size() + y.size());
  v << x, y;
  return v;
}
}  // namespace

OracleSolution solve_eq_qp(const Matrix& q_mat, const Vector& q_vec,
                           const LinOp& l, const Vector& b) {
  const Index p = l.in_dim();
  const Index m = l.out_dim();
  check_dim("solve_eq_qp Q", p, q_mat.rows());
  check_dim("solve_eq_qp q", p, q_vec.size());
  check_dim("solve_eq_qp b", m, b.size());
  const Matrix ld = l.to_dense();

  Matrix kkt = Matrix::Zero(p + m, p + m);
  kkt.topLeftCorner(p, p) = q_mat;
  kkt.topRightCorner(p, m) = ld.transpose();
  kkt.bottomLeftCorner(m, p) = ld;
  Vector rhs(p + m);
  rhs << -q_vec, b;

  Eigen::JacobiSVD<Matrix> l_svd(ld, Eigen::ComputeThinU);
  const double l_tol =
      1e-12 * std::max(1.0, l_svd.singularValues().size() > 0
                                ? l_svd.singularValues()[0]
                                : 0.0);
  Index l_rank = 0;
  for (Index i = 0; i < l_svd.singularValues().size(); ++i)
    if (l_svd.singularValues()[i] > l_tol) ++l_rank;

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
  if (cod.rank() < p + l_rank)
    throw Error("solve_eq_qp: singular KKT matrix (x not unique)");
  const Vector sol = cod.solve(rhs);
  if ((kkt * sol - rhs).norm() > 1e-8 * (1.0 + rhs.norm()))
    throw Error("solve_eq_qp: inconsistent KKT system (b not in range(L)?)");

  OracleSolution out;
  out.method = OracleMethod::DenseKKT;
  out.saddle.x_star = sol.head(p);
  // Project the multiplier onto ran(L): the Lagrangian rate analyses use
  // the unique representative there.
  const Matrix u_r = l_svd.matrixU().leftCols(l_rank);
  out.saddle.y_star = u_r * (u_r.transpose() * sol.tail(m));
  out.saddle.r_star = Vector::Zero(p);
  out.saddle.h_star = ld * out.saddle.x_star;
  out.certificate = {
      (q_mat * out.saddle.x_star + q_vec + ld.transpose() * out.saddle.y_star)
          .norm(),
      (ld * out.saddle.x_star - b).norm()};
  if (std::max(out.certificate.first, out.certificate.second) > 1e-8)
    throw Error("solve_eq_qp: certificate exceeds 1e-8");
  return out;
}

OracleSolution solve_composite_reference(const ProblemSpec& spec,
                                         long max_iters) {
  const double nu = spec.F.nu();
  const double lsq = spec.spectral.op_norm_sq;
  const double gamma = std::min(1.0 / std::max(nu, 1e-3), 1e3);
  const double tau = lsq > 0 ? 0.9 / (gamma * lsq) : 1.0;
  // Condat-Vu roles: primal prox step tau_cv, dual prox step gamma_cv,
  // condition nu/2 < 1/tau_cv - gamma_cv ||L||^2.
  const double tau_cv = std::min(1.0 / std::max(nu, 1e-3), 1e3);
  const double gamma_cv =
      lsq > 0 ? 0.45 * (1.0 / tau_cv) / lsq : 1.0;

  Estimator est_pd = Estimator::full();
  Estimator est_cv = Estimator::full();
  est_pd.init(spec.F, Vector::Zero(spec.primal_dim()));

  Pd3oState pd = make_pd3o_state(spec, Vector::Zero(spec.primal_dim()),
                                 Vector::Zero(spec.dual_dim()), gamma, tau);
  CondatVuState cv = make_condat_vu_state(
      spec, CondatVuForm::Alg31, Vector::Zero(spec.primal_dim()),
      Vector::Zero(spec.dual_dim()), gamma_cv, tau_cv);

  const long check_every = 500;
  const double stop_tol = 1e-10;
  bool pd_done = false, cv_done = false;
  for (long k = 0; k < max_iters && !(pd_done && cv_done); ++k) {
    if (!pd_done) pd3o_step(spec, est_pd, pd);
    if (!cv_done) condat_vu_step(spec, cv);
    if ((k + 1) % check_every == 0 || k + 1 == max_iters) {
      if (!pd_done) {
        auto [a1, a2] = kkt_residual(spec, pd.last_x, pd.y, gamma, tau);
        pd_done = std::max(a1, a2) <= stop_tol;
      }
      if (!cv_done) {
        auto [c1, c2] = kkt_residual(spec, cv.x, cv.d, tau_cv, gamma_cv);
        cv_done = std::max(c1, c2) <= stop_tol;
      }
      if (!pd.last_x.allFinite() || !cv.x.allFinite())
        throw Error("solve_composite_reference: diverged");
    }
  }

  if ((pd.last_x - cv.x).norm() > 1e-8 * (1.0 + pd.last_x.norm()))
    throw Error(
        "no certified reference: Condat-Vu and PD3O limits disagree");

  // One more PD3O pass to harvest the prox subgradients:
  // r* = (p - x)/gamma from prox_{gamma R}, h* = (arg - y')/tau from
  // prox_{tau H*}.
  const Vector x = spec.R.prox(pd.p, gamma);
  const Vector r_star = (pd.p - x) / gamma;
  const Vector w = 2.0 * x - pd.p - gamma * spec.F.grad(x);
  const Vector arg =
      pd.y + tau * spec.L.apply(w - gamma * spec.L.adjoint(pd.y));
  const Vector y = spec.H.prox_conjugate(arg, tau);
  const Vector h_star = (arg - y) / tau;

  OracleSolution out;
  out.method = OracleMethod::LongRunConsensus;
  out.saddle.x_star = x;
  out.saddle.y_star = y;
  out.saddle.r_star = r_star;
  out.saddle.h_star = h_star;
  out.certificate = kkt_residual(spec, x, y, 1.0, 1.0);
  if (std::max(out.certificate.first, out.certificate.second) > 1e-8)
    throw Error("no certified reference: kkt residual " +
                std::to_string(std::max(out.certificate.first,
                                        out.certificate.second)));
  return out;
}

// ---------------------------------------------------------------------------
// DYS views
// ---------------------------------------------------------------------------

namespace {

std::function<double(const Vector&, const Vector&)> p_inner(
    const ProblemSpec& spec, double gamma, double tau, Index nx, Index ny) {
  return [&spec, gamma, tau, nx, ny](const Vector& a, const Vector& b) {
    const Vector ya = a.tail(ny), yb = b.tail(ny);
    return a.head(nx).dot(b.head(nx)) + (gamma / tau) * ya.dot(yb) -
           gamma * gamma * spec.L.adjoint(ya).dot(spec.L.adjoint(yb));
  };
}

std::function<double(const Vector&, const Vector&)> q_inner(
    const ProblemSpec& spec, double gamma, double tau, Index nx, Index ny) {
  return [&spec, gamma, tau, nx, ny](const Vector& a, const Vector& b) {
    const Vector xa = a.head(nx), xb = b.head(nx);
    return (gamma / tau) * xa.dot(xb) -
           gamma * gamma * spec.L.apply(xa).dot(spec.L.apply(xb)) +
           a.tail(ny).dot(b.tail(ny));
  };
}

// J_{gamma P^{-1} A}: y' = prox_{tau H*}(y + tau L (x - gamma L* y)),
//                     x' = x - gamma L* y'.
Resolvent res_pd(const ProblemSpec& spec, double gamma, double tau, Index nx,
                 Index ny) {
  return [&spec, gamma, tau, nx, ny](const Vector& v, double) {
    const Vector x = v.head(nx), y = v.tail(ny);
    const Vector y2 = spec.H.prox_conjugate(
        y + tau * spec.L.apply(x - gamma * spec.L.adjoint(y)), tau);
    return cat(x - gamma * spec.L.adjoint(y2), y2);
  };
}

// J_{gamma P^{-1} B}: (prox_{gamma R}(x), y).
Resolvent res_prox_r(const ProblemSpec& spec, Index nx, Index ny) {
  return [&spec, nx, ny](const Vector& v, double g) {
    return cat(spec.R.prox(v.head(nx), g), v.tail(ny));
  };
}

// J_{gamma Q^{-1} A}: x' = prox_{tau R}((I - tau gamma L*L) x - tau L* y),
//                     y' = y + gamma L x'.
Resolvent res_cv(const ProblemSpec& spec, double gamma, double tau, Index nx,
                 Index ny) {
  return [&spec, gamma, tau, nx, ny](const Vector& v, double) {
    const Vector x = v.head(nx), y = v.tail(ny);
    const Vector x2 = spec.R.prox(
        x - tau * gamma * spec.L.adjoint(spec.L.apply(x)) -
            tau * spec.L.adjoint(y),
        tau);
    return cat(x2, y + gamma * spec.L.apply(x2));
  };
}

// J_{gamma Q^{-1} B}: (x, prox_{gamma H*}(y)).
Resolvent res_prox_hstar(const ProblemSpec& spec, Index nx, Index ny) {
  return [&spec, nx, ny](const Vector& v, double g) {
    return cat(v.head(nx), spec.H.prox_conjugate(v.tail(ny), g));
  };
}

ForwardOp fwd_grad(const ProblemSpec& spec, Index nx, Index ny) {
  return [&spec, nx, ny](const Vector& v) {
    return cat(spec.F.grad(v.head(nx)), Vector::Zero(ny));
  };
}

// Q^{-1} C = (K^{-1} grad F(x), 0) with K = (gamma/tau) I - gamma^2 L*L.
ForwardOp fwd_grad_kinv(const ProblemSpec& spec, double gamma, double tau,
                        Index nx, Index ny) {
  const Matrix ld = spec.L.to_dense();
  Matrix k = -gamma * gamma * (ld.transpose() * ld);
  k.diagonal().array() += gamma / tau;
  auto llt = std::make_shared<Eigen::LLT<Matrix>>(k);
  if (llt->info() != Eigen::Success)
    throw Error("dys_view_cv: K not positive definite (stepsizes)");
  return [&spec, llt, nx, ny](const Vector& v) {
    return cat(Vector(llt->solve(spec.F.grad(v.head(nx)))), Vector::Zero(ny));
  };
}

}  // namespace

DysProduct dys_view_pddy(const ProblemSpec& spec, double gamma, double tau) {
  DysProduct d;
  d.nx = spec.primal_dim();
  d.ny = spec.dual_dim();
  d.resolvent_b = res_pd(spec, gamma, tau, d.nx, d.ny);
  d.resolvent_a = res_prox_r(spec, d.nx, d.ny);
  d.apply_c = fwd_grad(spec, d.nx, d.ny);
  d.inner = p_inner(spec, gamma, tau, d.nx, d.ny);
  return d;
}

DysProduct dys_view_pd3o(const ProblemSpec& spec, double gamma, double tau) {
  DysProduct d;
  d.nx = spec.primal_dim();
  d.ny = spec.dual_dim();
  d.resolvent_b = res_prox_r(spec, d.nx, d.ny);
  d.resolvent_a = res_pd(spec, gamma, tau, d.nx, d.ny);
  d.apply_c = fwd_grad(spec, d.nx, d.ny);
  d.inner = p_inner(spec, gamma, tau, d.nx, d.ny);
  return d;
}

DysProduct dys_view_cv31(const ProblemSpec& spec, double gamma, double tau) {
  DysProduct d;
  d.nx = spec.primal_dim();
  d.ny = spec.dual_dim();
  d.resolvent_b = res_cv(spec, gamma, tau, d.nx, d.ny);
  d.resolvent_a = res_prox_hstar(spec, d.nx, d.ny);
  d.apply_c = fwd_grad_kinv(spec, gamma, tau, d.nx, d.ny);
  d.inner = q_inner(spec, gamma, tau, d.nx, d.ny);
  return d;
}

DysProduct dys_view_cv32(const ProblemSpec& spec, double gamma, double tau) {
  DysProduct d;
  d.nx = spec.primal_dim();
  d.ny = spec.dual_dim();
  d.resolvent_b = res_prox_hstar(spec, d.nx, d.ny);
  d.resolvent_a = res_cv(spec, gamma, tau, d.nx, d.ny);
  d.apply_c = fwd_grad_kinv(spec, gamma, tau, d.nx, d.ny);
  d.inner = q_inner(spec, gamma, tau, d.nx, d.ny);
  return d;
}

DysTrace run_dys_recording(const DysProduct& prod, Vector v0, double gamma,
                           int iters) {
  DysTrace tr;
  DysState st{std::move(v0), gamma};
  tr.v.reserve(static_cast<size_t>(iters));
  for (int k = 0; k < iters; ++k) {
    tr.v.push_back(st.v);
    DysStep s = dys_step(prod.resolvent_b, prod.resolvent_a, prod.apply_c, st);
    tr.cz.push_back(prod.apply_c(s.z));
    tr.z.push_back(std::move(s.z));
    tr.u.push_back(std::move(s.u));
  }
  tr.v_final = st.v;
  return tr;
}

namespace {

DysFixedPoint fixed_point_from(const Vector& z_star, const Vector& b_star,
                               double gamma) {
  DysFixedPoint f;
  f.z_star = z_star;
  f.u_star = z_star;
  f.v_star = z_star + gamma * b_star;
  return f;
}

}  // namespace

DysFixedPoint dys_fixed_point_pddy(const ProblemSpec& spec,
                                   const SaddlePoint& saddle, double gamma,
                                   double tau) {
  // b* = P^{-1} A(z*) selection = P^{-1} (L* y*, -L x* + h*).
  const Matrix ld = spec.L.to_dense();
  Matrix py = -gamma * gamma * (ld * ld.transpose());
  py.diagonal().array() += gamma / tau;
  Eigen::LLT<Matrix> llt(py);
  if (llt.info() != Eigen::Success)
    throw Error("dys_fixed_point_pddy: P not positive definite");
  const Vector dual_sel =
      llt.solve(saddle.h_star - spec.L.apply(saddle.x_star));
  return fixed_point_from(
      cat(saddle.x_star, saddle.y_star),
      cat(spec.L.adjoint(saddle.y_star), dual_sel), gamma);
}

DysFixedPoint dys_fixed_point_pd3o(const ProblemSpec& spec,
                                   const SaddlePoint& saddle, double gamma,
                                   double /*tau*/) {
  // b* = P^{-1} B(z*) = (r*, 0).
  return fixed_point_from(cat(saddle.x_star, saddle.y_star),
                          cat(saddle.r_star, Vector::Zero(spec.dual_dim())),
                          gamma);
}

DysFixedPoint dys_fixed_point_cv31(const ProblemSpec& spec,
                                   const SaddlePoint& saddle, double gamma,
                                   double tau) {
  // b* = Q^{-1} A(z*) = (K^{-1}(r* + L* y*), -L x*).
  const Matrix ld = spec.L.to_dense();
  Matrix k = -gamma * gamma * (ld.transpose() * ld);
  k.diagonal().array() += gamma / tau;
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success)
    throw Error("dys_fixed_point_cv31: K not positive definite");
  const Vector primal_sel =
      llt.solve(saddle.r_star + spec.L.adjoint(saddle.y_star));
  return fixed_point_from(cat(saddle.x_star, saddle.y_star),
                          cat(primal_sel, -spec.L.apply(saddle.x_star)),
                          gamma);
}

DysFixedPoint dys_fixed_point_cv32(const ProblemSpec& spec,
                                   const SaddlePoint& saddle, double gamma,
                                   double /*tau*/) {
  // b* = Q^{-1} B(z*) = (0, h*).
  return fixed_point_from(cat(saddle.x_star, saddle.y_star),
                          cat(Vector::Zero(spec.primal_dim()), saddle.h_star),
                          gamma);
}

double check_fundamental_equality(const DysProduct& prod, const DysTrace& tr,
                                  const DysFixedPoint& fix, double gamma,
                                  double perturb_a) {
  auto nsq = [&](const Vector& a) { return prod.inner(a, a); };
  const Vector b_star = (fix.v_star - fix.z_star) / gamma;
  const Vector cz_star = prod.apply_c(fix.z_star);
  const Vector a_star =
      (2.0 * fix.z_star - fix.v_star - gamma * cz_star - fix.u_star) / gamma;

  double worst = 0.0;
  const double scale0 = nsq(tr.v.front() - fix.v_star);
  for (size_t k = 0; k < tr.v.size(); ++k) {
    const Vector& v = tr.v[k];
    const Vector& z = tr.z[k];
    const Vector& u = tr.u[k];
    const Vector& cz = tr.cz[k];
    const Vector& v_next = k + 1 < tr.v.size() ? tr.v[k + 1] : tr.v_final;
    const Vector b = (v - z) / gamma;
    Vector a = (2.0 * z - v - gamma * cz - u) / gamma;
    if (perturb_a != 0.0) a.array() += perturb_a;
    const double lhs = nsq(v_next - fix.v_star);
    const double rhs =
        nsq(v - fix.v_star) - 2.0 * gamma * prod.inner(b - b_star, z - fix.z_star) -
        2.0 * gamma * prod.inner(cz - cz_star, z - fix.z_star) -
        2.0 * gamma * prod.inner(a - a_star, u - fix.u_star) -
        gamma * gamma * nsq(a + b - (a_star + b_star)) +
        gamma * gamma * nsq(cz - cz_star);
    const double denom =
        std::max(nsq(v - fix.v_star), 1e-12 * (1.0 + scale0));
    worst = std::max(worst, std::abs(lhs - rhs) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Rate verification
// ---------------------------------------------------------------------------

std::string guarantee_name(Guarantee g) {
  switch (g) {
    case Guarantee::ErgodicGapPd3o:
      return "ergodic_gap_pd3o";
    case Guarantee::ErgodicBregmanPddy:
      return "ergodic_bregman_pddy";
    case Guarantee::LinearLico:
      return "linear_lico";
    case Guarantee::LinearPd3o:
      return "linear_pd3o";
    case Guarantee::LinearPddy:
      return "linear_pddy";
  }
  return "?";
}

nlohmann::json rate_report_to_json(const RateReport& report) {
  return nlohmann::json{{"guarantee", guarantee_name(report.guarantee)},
                        {"r_theoretical", report.r_theoretical},
                        {"r_empirical", report.r_empirical},
                        {"bound_violations", report.bound_violations},
                        {"margin", report.margin},
                        {"points_checked", report.points_checked}};
}

namespace {

void check_trace_grid(const std::vector<RunTrace>& traces) {
  if (traces.empty()) throw Error("verify: no traces");
  const auto& first = traces.front();
  for (const auto& t : traces) {
    if (t.diverged) throw Error("verify: trace diverged: " + t.diagnostic);
    if (t.records.size() != first.records.size() ||
        t.gamma != first.gamma || t.tau != first.tau)
      throw Error("verify: traces have mismatched grids or stepsizes");
    for (size_t i = 0; i < t.records.size(); ++i)
      if (t.records[i].k != first.records[i].k)
        throw Error("verify: traces have mismatched log grids");
  }
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double stderr_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / (static_cast<double>(xs.size()) - 1.0) /
                   static_cast<double>(xs.size()));
}

double finite_or_throw(std::optional<double> v, const char* what) {
  if (!v) throw Error(std::string("verify: ") + what + " is undefined");
  return *v;
}

}  // namespace

RateReport verify_ergodic_bound(const std::vector<RunTrace>& traces,
                                const ProblemSpec& spec,
                                const SaddlePoint& saddle, Guarantee which) {
  if (which != Guarantee::ErgodicGapPd3o && which != Guarantee::ErgodicBregmanPddy)
    throw Error("verify_ergodic_bound: pass an ergodic guarantee");
  check_trace_grid(traces);
  if (!saddle.valid(spec))
    throw Error("verify_ergodic_bound: saddle certificate invalid");
  const auto& t0 = traces.front();
  const double gamma = t0.gamma, tau = t0.tau;

  // V0 = ||v0 - v*||_P^2 + gamma^2 kappa sigma_0^2 with v* = (p*, y*).
  Vector p_star;
  if (which == Guarantee::ErgodicGapPd3o)
    p_star = saddle.x_star + gamma * saddle.r_star;
  else
    p_star = saddle.x_star + gamma * spec.L.adjoint(saddle.y_star);
  double kappa = 0.0;
  double sigma0_sq = 0.0;
  if (t0.estimator.kind != EstimatorKind::Full) {
    Estimator probe = make_estimator_from(t0.estimator, 0);
    const AssumptionConstants c = probe.constants(spec.F);
    kappa = c.kappa;
    probe.init(spec.F, t0.x0);
    sigma0_sq = probe.sigma_sq(spec.F, saddle.x_star);
  }
  const double v0 = p_norm_sq(spec.L, gamma, tau, t0.x0 - p_star,
                              t0.y0 - saddle.y_star) +
                    gamma * gamma * kappa * sigma0_sq;

  RateReport rep;
  rep.guarantee = which;
  rep.r_theoretical = 1.0;
  rep.margin = std::numeric_limits<double>::infinity();

  for (size_t i = 0; i < t0.records.size(); ++i) {
    const long k = t0.records[i].k;
    if (k < 1) continue;
    std::vector<double> gaps;
    gaps.reserve(traces.size());
    for (const auto& t : traces) {
      const auto& r = t.records[i];
      double gap;
      if (which == Guarantee::ErgodicGapPd3o) {
        const double lx = finite_or_throw(
            lagrangian(spec, r.x_bar, saddle.y_star), "L(x_bar, y*)");
        const double ly = finite_or_throw(
            lagrangian(spec, saddle.x_star, r.y_bar), "L(x*, y_bar)");
        gap = lx - ly;
      } else {
        if (r.s_bar.size() == 0)
          throw Error("verify_ergodic_bound: trace lacks s_bar (need PDDY)");
        const double d_f = spec.F.value(r.x_bar) - spec.F.value(saddle.x_star) -
                           spec.F.grad(saddle.x_star).dot(r.x_bar - saddle.x_star);
        const double d_r =
            finite_or_throw(spec.R.value(r.s_bar), "R(s_bar)") -
            finite_or_throw(spec.R.value(saddle.x_star), "R(x*)") -
            saddle.r_star.dot(r.s_bar - saddle.x_star);
        const double d_h =
            finite_or_throw(spec.H.conjugate_value(r.y_bar), "H*(y_bar)") -
            finite_or_throw(spec.H.conjugate_value(saddle.y_star), "H*(y*)") -
            saddle.h_star.dot(r.y_bar - saddle.y_star);
        gap = d_f + d_r + d_h;
      }
      gaps.push_back(gap);
    }
    const double mean = mean_of(gaps);
    const double se = stderr_of(gaps, mean);
    const double bound = v0 / (static_cast<double>(k) * gamma);
    rep.points_checked += 1;
    if (mean > bound * (1.0 + 1e-9) + 3.0 * se) rep.bound_violations += 1;
    if (bound > kTiny) {
      rep.r_empirical = std::max(rep.r_empirical, mean / bound);
      rep.margin = std::min(rep.margin, (bound + 3.0 * se - mean) / bound);
    }
  }
  return rep;
}

RateReport verify_linear_rate(const std::vector<RunTrace>& traces,
                              const ProblemSpec& spec,
                              const SaddlePoint& saddle,
                              const AssumptionConstants& constants,
                              Guarantee which, double kappa) {
  check_trace_grid(traces);
  if (!saddle.valid(spec))
    throw Error("verify_linear_rate: saddle certificate invalid");
  const auto& t0 = traces.front();
  const double gamma = t0.gamma, tau = t0.tau;

  if (kappa <= 0.0)
    kappa = constants.beta > 0 ? 2.0 * constants.beta / constants.rho : 1.0;
  if (constants.beta > 0 && kappa <= constants.beta / constants.rho)
    throw Error("verify_linear_rate: kappa must exceed beta/rho");
  if (gamma > max_stepsize_with_kappa(constants, kappa, StepsizeMode::Linear) *
                  (1.0 + 1e-12))
    throw Error("verify_linear_rate: gamma exceeds 1/(alpha + kappa delta)");
  if (gamma * tau * spec.spectral.op_norm_sq >= 1.0)
    throw Error("verify_linear_rate: gamma tau ||L||^2 must be < 1");

  const double mid =
      1.0 - constants.rho +
      (constants.beta > 0 ? constants.beta / kappa : 0.0);

  double r = 0.0;
  double dual_weight = 1.0;   // multiplies ||y - y*||_{gamma,tau}^2
  double primal_weight = 1.0; // multiplies the primal distance
  Vector p_star;
  bool use_p = false;
  switch (which) {
    case Guarantee::LinearLico: {
      const double mu_f = spec.F.mu();
      if (mu_f <= 0) throw Error("verify_linear_rate: hypothesis unmet: mu_F");
      const double omega = spec.spectral.omega_or_throw();
      dual_weight = 1.0 + tau * gamma * omega;
      r = std::max({1.0 - gamma * mu_f, mid, 1.0 / (1.0 + tau * gamma * omega)});
      p_star = saddle.x_star;
      break;
    }
    case Guarantee::LinearPd3o: {
      const double mu = spec.F.mu() + 2.0 * spec.R.strong_convexity();
      if (mu <= 0)
        throw Error("verify_linear_rate: hypothesis unmet: mu_F + 2 mu_R");
      const double mu_h = spec.H.conjugate_strong_convexity();
      if (mu_h <= 0)
        throw Error("verify_linear_rate: hypothesis unmet: mu_{H*} (H smooth)");
      const auto lam = spec.R.smoothness();
      if (!lam)
        throw Error("verify_linear_rate: hypothesis unmet: lambda (R smooth)");
      dual_weight = 1.0 + 2.0 * tau * mu_h;
      r = std::max({1.0 - gamma * mu / ((1.0 + gamma * *lam) * (1.0 + gamma * *lam)),
                    mid, 1.0 / (1.0 + 2.0 * tau * mu_h)});
      p_star = saddle.x_star + gamma * saddle.r_star;
      use_p = true;
      break;
    }
    case Guarantee::LinearPddy: {
      const double mu_r = spec.R.strong_convexity();
      if (mu_r <= 0) throw Error("verify_linear_rate: hypothesis unmet: mu_R");
      const double mu_h = spec.H.conjugate_strong_convexity();
      if (mu_h <= 0)
        throw Error("verify_linear_rate: hypothesis unmet: mu_{H*} (H smooth)");
      const double eta =
          2.0 * (mu_h - gamma * gamma * spec.spectral.op_norm_sq * mu_r);
      if (eta < 0)
        throw Error(
            "verify_linear_rate: hypothesis unmet: gamma^2 <= mu_{H*}/"
            "(||L||^2 mu_R)");
      primal_weight = 1.0 + gamma * mu_r;
      dual_weight = 1.0 + tau * eta;
      r = std::max({1.0 / (1.0 + gamma * mu_r), mid, 1.0 / (1.0 + tau * eta)});
      p_star = saddle.x_star + gamma * spec.L.adjoint(saddle.y_star);
      use_p = true;
      break;
    }
    default:
      throw Error("verify_linear_rate: pass a linear-rate guarantee");
  }

  const bool needs_sigma = constants.beta > 0;
  auto lyapunov = [&](const TraceRecord& rec) {
    const Vector& primal = use_p ? rec.p : rec.x;
    if (primal.size() == 0)
      throw Error("verify_linear_rate: trace lacks the p coordinate");
    double v = primal_weight * (primal - p_star).squaredNorm() +
               dual_weight * dual_metric_norm_sq(spec.L, gamma, tau,
                                                 rec.y - saddle.y_star);
    if (needs_sigma) {
      if (!std::isfinite(rec.sigma_sq))
        throw Error(
            "verify_linear_rate: trace lacks sigma_sq diagnostics (run with "
            "an oracle)");
      v += kappa * gamma * gamma * rec.sigma_sq;
    }
    return v;
  };

  RateReport rep;
  rep.guarantee = which;
  rep.r_theoretical = r;
  rep.margin = std::numeric_limits<double>::infinity();

  std::vector<double> v0s;
  for (const auto& t : traces) {
    if (t.records.front().k != 0)
      throw Error("verify_linear_rate: trace must start at k = 0");
    v0s.push_back(lyapunov(t.records.front()));
  }
  const double v0 = mean_of(v0s);

  // Envelope check at every logged k.
  double prev_mean = v0;
  long prev_k = 0;
  const bool per_step = traces.size() == 1 && t0.log_every == 1 &&
                        t0.estimator.kind == EstimatorKind::Full;
  for (size_t i = 1; i < t0.records.size(); ++i) {
    const long k = t0.records[i].k;
    const double envelope = std::pow(r, static_cast<double>(k)) * v0;
    // Past ~1e-20 V0 the squared distances are dominated by rounding in the
    // iterates themselves; the bound is no longer falsifiable in doubles.
    if (envelope < 1e-20 * v0) break;
    std::vector<double> vs;
    for (const auto& t : traces) vs.push_back(lyapunov(t.records[i]));
    const double mean = mean_of(vs);
    const double se = stderr_of(vs, mean);
    rep.points_checked += 1;
    if (mean > envelope * (1.0 + 1e-9) + 3.0 * se) rep.bound_violations += 1;
    if (per_step && prev_mean > 1e-20 * v0 &&
        mean > r * prev_mean * (1.0 + 1e-9) + kTiny)
      rep.bound_violations += 1;
    if (envelope > kTiny)
      rep.margin = std::min(rep.margin, (envelope + 3.0 * se - mean) /
                                            envelope);
    if (mean > 1e-18 * v0 && prev_mean > 1e-18 * v0 && k > prev_k) {
      rep.r_empirical =
          std::max(rep.r_empirical,
                   std::pow(mean / prev_mean,
                            1.0 / static_cast<double>(k - prev_k)));
    }
    prev_mean = mean;
    prev_k = k;
  }
  return rep;
}

}  // namespace pdsplit
