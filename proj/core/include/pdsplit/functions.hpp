#pragma once

#include <optional>
#include <vector>

#include "pdsplit/linop.hpp"
#include "pdsplit/types.hpp"

namespace pdsplit {

/// Smooth convex term with an exact gradient oracle and known constants.
/// Finite-sum scaling is F = (1/n) sum_i f_i, so component gradients average
/// to the full gradient with no extra factor.
class SmoothFn {
 public:
  enum class Kind { Zero, LeastSquares, LogisticL2, Quadratic };

  static SmoothFn zero(Index dim);
  /// F(x) = 0.5 ||W x - a||^2 + 0.5 l2_reg ||x||^2, split row-wise into
  /// f_i(x) = (n/2)(w_i'x - a_i)^2 + 0.5 l2_reg ||x||^2.
  static SmoothFn least_squares(Matrix w, Vector a, double l2_reg = 0.0);
  /// F(x) = (1/n) sum_i [-(a_i log h(w_i'x) + (1-a_i) log(1-h(w_i'x)))]
  ///        + 0.5 l2_reg ||x||^2, labels in {0,1}.
  static SmoothFn logistic_l2(Matrix w, Vector labels, double l2_reg);
  /// F(x) = 0.5 x'Qx + q'x, Q symmetric PSD.
  static SmoothFn quadratic(Matrix q_mat, Vector q_vec);
  /// F = (1/n) sum_i (0.5 x'Q_i x + q_i'x).
  static SmoothFn quadratic_sum(std::vector<Matrix> q_mats,
                                std::vector<Vector> q_vecs);

  Kind kind() const { return kind_; }
  Index dim() const { return dim_; }
  int components() const { return n_; }

  double value(const Vector& x) const;
  Vector grad(const Vector& x) const;
  /// Gradient of the i-th summand f_i (0-based); (1/n) sum_i equals grad().
  Vector grad_component(int i, const Vector& x) const;
  double component_value(int i, const Vector& x) const;

  double nu() const { return nu_; }         // smoothness
  double mu() const { return mu_; }         // strong convexity (lower bound 0)
  double max_nu_i() const;
  const std::vector<double>& nu_is() const { return nu_i_; }

  /// Data matrix / offsets of LeastSquares and LogisticL2 terms.
  const Matrix& data_matrix() const;
  const Vector& data_vector() const;

  /// Aggregate (Q, q) of a Quadratic term.
  const Matrix& quadratic_matrix() const;
  const Vector& quadratic_vector() const;

  SmoothFn() = default;  // the zero function on the empty space

 private:
  Kind kind_ = Kind::Zero;
  Index dim_ = 0;
  int n_ = 1;
  Matrix w_;        // LeastSquares / LogisticL2 data, Quadratic Q
  Vector a_;        // labels / offsets, Quadratic q
  double l2_reg_ = 0.0;
  std::vector<Matrix> qs_;  // Quadratic components
  std::vector<Vector> qvs_;
  double nu_ = 0.0;
  double mu_ = 0.0;
  std::vector<double> nu_i_;
};

/// Proximable convex term: closed-form prox, function value, conjugate value
/// and the conjugate prox through the Moreau identity.
class ProxFn {
 public:
  enum class Kind { Zero, L1, SqL2, GroupL2, IndicatorPoint, L2NormSum };

  static ProxFn zero();
  static ProxFn l1(double lambda);
  static ProxFn sq_l2(double lambda);
  /// lambda1 * sum_g ||x_g||_2 over disjoint index groups.
  static ProxFn group_l2(std::vector<std::vector<Index>> groups,
                         double lambda1);
  static ProxFn indicator_point(Vector b);
  /// lambda1 * sum_b ||y_b||_2 over contiguous blocks of the given sizes.
  static ProxFn l2_norm_sum(std::vector<Index> block_sizes, double lambda1);

  Kind kind() const { return kind_; }

  /// prox_{gamma G}(v) = argmin_x G(x) + ||x - v||^2 / (2 gamma).
  Vector prox(const Vector& v, double gamma) const;
  /// prox_{tau G*}(v) = v - tau * prox_{G/tau}(v/tau) (Moreau identity).
  Vector prox_conjugate(const Vector& v, double tau) const;

  /// G(x); nullopt encodes the +infinity sentinel.
  std::optional<double> value(const Vector& x) const;
  /// G*(y); nullopt when y is outside dom G*.
  std::optional<double> conjugate_value(const Vector& y) const;

  double strong_convexity() const;            // mu_G
  std::optional<double> smoothness() const;   // lambda when G is smooth
  /// mu_{G*} = 1/smoothness when G is smooth (infinite for G = 0), else 0.
  double conjugate_strong_convexity() const;

  double lambda() const { return lambda_; }
  const Vector& point() const { return b_; }

  ProxFn() = default;  // the zero function

 private:
  Kind kind_ = Kind::Zero;
  double lambda_ = 0.0;
  Vector b_;
  std::vector<std::vector<Index>> groups_;
  Index min_group_dim_ = 0;  // largest group index + 1
  std::vector<Index> blocks_;
};

/// The three Bregman divergences whose sum equals the duality gap.
struct BregmanTriple {
  double d_f = 0.0;
  double d_r = 0.0;
  double d_hstar = 0.0;
  double sum() const { return d_f + d_r + d_hstar; }
};

/// Divergences D_F(x,x*), D_R(x,x*), D_{H*}(y,y*) taken with the saddle
/// subgradients (r*, h*). Throws when (x*, y*, r*, h*) fails the saddle
/// residual check (tolerance 1e-6).
BregmanTriple bregman_gap(const SmoothFn& f, const ProxFn& r, const ProxFn& h,
                          const LinOp& l, const Vector& x, const Vector& y,
                          const Vector& x_star, const Vector& y_star,
                          const Vector& r_star, const Vector& h_star);

}  // namespace pdsplit
