#pragma once

#include <optional>
#include <utility>

#include "pdsplit/functions.hpp"
#include "pdsplit/linop.hpp"

namespace pdsplit {

/// Composite problem min_x F(x) + R(x) + H(Lx).
struct ProblemSpec {
  SmoothFn F;
  ProxFn R;
  ProxFn H;
  LinOp L;
  SpectralInfo spectral;

  static ProblemSpec make(SmoothFn f, ProxFn r, ProxFn h, LinOp l) {
    check_dim("ProblemSpec primal dim", f.dim(), l.in_dim());
    SpectralInfo s = spectral_info(l);
    return ProblemSpec{std::move(f), std::move(r), std::move(h), std::move(l),
                       s};
  }

  Index primal_dim() const { return L.in_dim(); }
  Index dual_dim() const { return L.out_dim(); }
};

/// Primal-dual solution with the subgradients witnessing optimality:
/// grad F(x*) + r* + L* y* = 0 and L x* = h*, both to 1e-6.
struct SaddlePoint {
  Vector x_star;
  Vector y_star;
  Vector r_star;  // in dR(x*)
  Vector h_star;  // in dH*(y*)

  std::pair<double, double> residuals(const ProblemSpec& spec) const {
    return {(spec.F.grad(x_star) + r_star + spec.L.adjoint(y_star)).norm(),
            (h_star - spec.L.apply(x_star)).norm()};
  }
  bool valid(const ProblemSpec& spec, double tol = 1e-6) const {
    auto [a, b] = residuals(spec);
    return a <= tol && b <= tol;
  }
};

/// L(x, y) = (F + R)(x) - H*(y) + <Lx, y>.
/// nullopt when x is outside dom R or y outside dom H*.
std::optional<double> lagrangian(const ProblemSpec& spec, const Vector& x,
                                 const Vector& y);

/// L(x, y*) - L(x*, y) >= 0. nullopt propagates domain sentinels.
std::optional<double> duality_gap(const ProblemSpec& spec, const Vector& x,
                                  const Vector& y, const SaddlePoint& saddle);

/// Fixed-point residuals of the optimality system:
/// ( ||x - prox_{gamma R}(x - gamma (grad F(x) + L*y))||,
///   ||y - prox_{tau H*}(y + tau L x)|| ). Both zero iff (x,y) is a saddle.
std::pair<double, double> kkt_residual(const ProblemSpec& spec,
                                       const Vector& x, const Vector& y,
                                       double gamma, double tau);

/// Stronger primal-dual gap (F+R+HoL)(x) + ((F+R)* o -L* + H*)(y),
/// evaluated only when (F+R)* has a closed form: F a positive-definite
/// quadratic and R = 0. Diagnostic only; nullopt otherwise or outside the
/// conjugate domains. Dominates the Lagrangian duality gap pointwise.
std::optional<double> strong_primal_dual_gap(const ProblemSpec& spec,
                                             const Vector& x,
                                             const Vector& y);

}  // namespace pdsplit
