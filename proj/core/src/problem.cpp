#include "pdsplit/problem.hpp"

#include <Eigen/Cholesky>

namespace pdsplit {

std::optional<double> lagrangian(const ProblemSpec& spec, const Vector& x,
                                 const Vector& y) {
  check_dim("lagrangian x", spec.primal_dim(), x.size());
  check_dim("lagrangian y", spec.dual_dim(), y.size());
  const auto rx = spec.R.value(x);
  if (!rx) return std::nullopt;
  const auto hy = spec.H.conjugate_value(y);
  if (!hy) return std::nullopt;
  return spec.F.value(x) + *rx - *hy + spec.L.apply(x).dot(y);
}

std::optional<double> duality_gap(const ProblemSpec& spec, const Vector& x,
                                  const Vector& y, const SaddlePoint& saddle) {
  if (!saddle.valid(spec)) throw Error("duality_gap: not a saddle point");
  const auto lhs = lagrangian(spec, x, saddle.y_star);
  const auto rhs = lagrangian(spec, saddle.x_star, y);
  if (!lhs || !rhs) return std::nullopt;
  return *lhs - *rhs;
}

std::pair<double, double> kkt_residual(const ProblemSpec& spec,
                                       const Vector& x, const Vector& y,
                                       double gamma, double tau) {
  if (gamma <= 0 || tau <= 0)
    throw Error("kkt_residual: gamma and tau must be > 0");
  const Vector primal_arg = x - gamma * (spec.F.grad(x) + spec.L.adjoint(y));
  const double primal = (x - spec.R.prox(primal_arg, gamma)).norm();
  const Vector dual_arg = y + tau * spec.L.apply(x);
  const double dual = (y - spec.H.prox_conjugate(dual_arg, tau)).norm();
  return {primal, dual};
}

std::optional<double> strong_primal_dual_gap(const ProblemSpec& spec,
                                             const Vector& x,
                                             const Vector& y) {
  if (spec.F.kind() != SmoothFn::Kind::Quadratic || spec.F.mu() <= 0 ||
      spec.R.kind() != ProxFn::Kind::Zero)
    return std::nullopt;
  const auto h_primal = spec.H.value(spec.L.apply(x));
  const auto h_dual = spec.H.conjugate_value(y);
  if (!h_primal || !h_dual) return std::nullopt;
  // F*(z) = 0.5 (z - q)' Q^{-1} (z - q) for F = 0.5 x'Qx + q'x, Q > 0.
  const Vector z = -spec.L.adjoint(y) - spec.F.quadratic_vector();
  const Vector sol = spec.F.quadratic_matrix().ldlt().solve(z);
  const double f_conj = 0.5 * z.dot(sol);
  return spec.F.value(x) + *h_primal + f_conj + *h_dual;
}

}  // namespace pdsplit
