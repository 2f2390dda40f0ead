#include "pdsplit/functions.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace pdsplit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double softplus(double u) {
  return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

double sigmoid(double t) {
  return t >= 0 ? 1.0 / (1.0 + std::exp(-t))
                : std::exp(t) / (1.0 + std::exp(t));
}

// -a log h(t) - (1-a) log(1-h(t)) evaluated without overflow.
double logistic_loss(double t, double a) {
  return a * softplus(-t) + (1.0 - a) * softplus(t);
}

void check_symmetric(const Matrix& q, const char* ctx) {
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw Error(std::string(ctx) + ": matrix must be symmetric");
}

// Extreme eigenvalues of W'W. Dense at desk scale, power iteration above.
std::pair<double, double> gram_extremes(const Matrix& w) {
  if (w.cols() <= 500) {
    Matrix g = w.transpose() * w;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
    return {std::max(eig.eigenvalues().maxCoeff(), 0.0),
            std::max(eig.eigenvalues().minCoeff(), 0.0)};
  }
  const double top = spectral_info(LinOp::dense(w), 1e-9).op_norm_sq;
  return {top, 0.0};
}

}  // namespace

SmoothFn SmoothFn::zero(Index dim) {
  SmoothFn f;
  f.kind_ = Kind::Zero;
  f.dim_ = dim;
  f.n_ = 1;
  f.nu_ = 1e-12;  // positive floor; any alpha is admissible for F = 0
  f.mu_ = 0.0;
  f.nu_i_ = {f.nu_};
  return f;
}

SmoothFn SmoothFn::least_squares(Matrix w, Vector a, double l2_reg) {
  check_dim("least_squares labels", w.rows(), a.size());
  if (l2_reg < 0) throw Error("least_squares: l2_reg must be >= 0");
  SmoothFn f;
  f.kind_ = Kind::LeastSquares;
  f.dim_ = w.cols();
  f.n_ = static_cast<int>(w.rows());
  f.w_ = std::move(w);
  f.a_ = std::move(a);
  f.l2_reg_ = l2_reg;
  auto [top, bot] = gram_extremes(f.w_);
  f.nu_ = top + l2_reg;
  f.mu_ = bot + l2_reg;
  f.nu_i_.resize(static_cast<size_t>(f.n_));
  for (int i = 0; i < f.n_; ++i)
    f.nu_i_[static_cast<size_t>(i)] =
        f.n_ * f.w_.row(i).squaredNorm() + l2_reg;
  return f;
}

SmoothFn SmoothFn::logistic_l2(Matrix w, Vector labels, double l2_reg) {
  check_dim("logistic_l2 labels", w.rows(), labels.size());
  if (l2_reg < 0) throw Error("logistic_l2: l2_reg must be >= 0");
  for (Index i = 0; i < labels.size(); ++i)
    if (labels[i] != 0.0 && labels[i] != 1.0)
      throw Error("logistic_l2: labels must be in {0,1}");
  SmoothFn f;
  f.kind_ = Kind::LogisticL2;
  f.dim_ = w.cols();
  f.n_ = static_cast<int>(w.rows());
  f.w_ = std::move(w);
  f.a_ = std::move(labels);
  f.l2_reg_ = l2_reg;
  // Sigmoid curvature bound: nu = ||W||^2 / (4n) + lambda.
  const double top = spectral_info(LinOp::dense(f.w_), 1e-9).op_norm_sq;
  f.nu_ = top / (4.0 * f.n_) + l2_reg;
  f.mu_ = l2_reg;
  f.nu_i_.resize(static_cast<size_t>(f.n_));
  for (int i = 0; i < f.n_; ++i)
    f.nu_i_[static_cast<size_t>(i)] =
        f.w_.row(i).squaredNorm() / 4.0 + l2_reg;
  return f;
}

SmoothFn SmoothFn::quadratic(Matrix q_mat, Vector q_vec) {
  return quadratic_sum({std::move(q_mat)}, {std::move(q_vec)});
}

SmoothFn SmoothFn::quadratic_sum(std::vector<Matrix> q_mats,
                                 std::vector<Vector> q_vecs) {
  if (q_mats.empty() || q_mats.size() != q_vecs.size())
    throw Error("quadratic_sum: need matching nonempty component lists");
  const Index d = q_mats.front().cols();
  SmoothFn f;
  f.kind_ = Kind::Quadratic;
  f.dim_ = d;
  f.n_ = static_cast<int>(q_mats.size());
  f.qs_ = std::move(q_mats);
  f.qvs_ = std::move(q_vecs);
  Matrix mean_q = Matrix::Zero(d, d);
  Vector mean_v = Vector::Zero(d);
  f.nu_i_.reserve(f.qs_.size());
  for (size_t i = 0; i < f.qs_.size(); ++i) {
    check_dim("quadratic_sum Q", d, f.qs_[i].cols());
    check_dim("quadratic_sum q", d, f.qvs_[i].size());
    check_symmetric(f.qs_[i], "quadratic_sum");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(f.qs_[i],
                                              Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <
        -1e-10 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff()))
      throw Error("quadratic_sum: components must be PSD");
    f.nu_i_.push_back(std::max(eig.eigenvalues().maxCoeff(), 0.0));
    mean_q += f.qs_[i];
    mean_v += f.qvs_[i];
  }
  mean_q /= static_cast<double>(f.n_);
  mean_v /= static_cast<double>(f.n_);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(mean_q, Eigen::EigenvaluesOnly);
  f.nu_ = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
  f.mu_ = std::max(eig.eigenvalues().minCoeff(), 0.0);
  f.w_ = std::move(mean_q);  // aggregate quadratic for value/grad
  f.a_ = std::move(mean_v);
  return f;
}

double SmoothFn::value(const Vector& x) const {
  check_dim("SmoothFn::value", dim_, x.size());
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::LeastSquares:
      return 0.5 * (w_ * x - a_).squaredNorm() +
             0.5 * l2_reg_ * x.squaredNorm();
    case Kind::LogisticL2: {
      double s = 0.0;
      const Vector t = w_ * x;
      for (Index i = 0; i < t.size(); ++i) s += logistic_loss(t[i], a_[i]);
      return s / n_ + 0.5 * l2_reg_ * x.squaredNorm();
    }
    case Kind::Quadratic:
      return 0.5 * x.dot(w_ * x) + a_.dot(x);
  }
  throw Error("SmoothFn::value: unreachable");
}

Vector SmoothFn::grad(const Vector& x) const {
  check_dim("SmoothFn::grad", dim_, x.size());
  switch (kind_) {
    case Kind::Zero:
      return Vector::Zero(dim_);
    case Kind::LeastSquares:
      return w_.transpose() * (w_ * x - a_) + l2_reg_ * x;
    case Kind::LogisticL2: {
      Vector t = w_ * x;
      for (Index i = 0; i < t.size(); ++i) t[i] = sigmoid(t[i]) - a_[i];
      return w_.transpose() * t / n_ + l2_reg_ * x;
    }
    case Kind::Quadratic:
      return w_ * x + a_;
  }
  throw Error("SmoothFn::grad: unreachable");
}

Vector SmoothFn::grad_component(int i, const Vector& x) const {
  check_dim("SmoothFn::grad_component", dim_, x.size());
  if (i < 0 || i >= n_)
    throw Error("grad_component: index " + std::to_string(i) +
                " out of range [0," + std::to_string(n_) + ")");
  switch (kind_) {
    case Kind::Zero:
      return Vector::Zero(dim_);
    case Kind::LeastSquares:
      return n_ * (w_.row(i).dot(x) - a_[i]) * w_.row(i).transpose() +
             l2_reg_ * x;
    case Kind::LogisticL2:
      return (sigmoid(w_.row(i).dot(x)) - a_[i]) * w_.row(i).transpose() +
             l2_reg_ * x;
    case Kind::Quadratic: {
      const auto ui = static_cast<size_t>(i);
      return qs_[ui] * x + qvs_[ui];
    }
  }
  throw Error("SmoothFn::grad_component: unreachable");
}

double SmoothFn::component_value(int i, const Vector& x) const {
  check_dim("SmoothFn::component_value", dim_, x.size());
  if (i < 0 || i >= n_) throw Error("component_value: index out of range");
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::LeastSquares: {
      const double r = w_.row(i).dot(x) - a_[i];
      return 0.5 * n_ * r * r + 0.5 * l2_reg_ * x.squaredNorm();
    }
    case Kind::LogisticL2:
      return logistic_loss(w_.row(i).dot(x), a_[i]) +
             0.5 * l2_reg_ * x.squaredNorm();
    case Kind::Quadratic: {
      const auto ui = static_cast<size_t>(i);
      return 0.5 * x.dot(qs_[ui] * x) + qvs_[ui].dot(x);
    }
  }
  throw Error("SmoothFn::component_value: unreachable");
}

double SmoothFn::max_nu_i() const {
  double m = 0.0;
  for (double v : nu_i_) m = std::max(m, v);
  return m;
}

const Matrix& SmoothFn::data_matrix() const {
  if (kind_ != Kind::LeastSquares && kind_ != Kind::LogisticL2)
    throw Error("SmoothFn::data_matrix: no data matrix for this kind");
  return w_;
}

const Vector& SmoothFn::data_vector() const {
  if (kind_ != Kind::LeastSquares && kind_ != Kind::LogisticL2)
    throw Error("SmoothFn::data_vector: no data vector for this kind");
  return a_;
}

const Matrix& SmoothFn::quadratic_matrix() const {
  if (kind_ != Kind::Quadratic)
    throw Error("SmoothFn::quadratic_matrix: not a quadratic");
  return w_;
}

const Vector& SmoothFn::quadratic_vector() const {
  if (kind_ != Kind::Quadratic)
    throw Error("SmoothFn::quadratic_vector: not a quadratic");
  return a_;
}

// ---------------------------------------------------------------------------

ProxFn ProxFn::zero() { return ProxFn(); }

ProxFn ProxFn::l1(double lambda) {
  if (lambda < 0) throw Error("l1: lambda must be >= 0");
  ProxFn g;
  g.kind_ = Kind::L1;
  g.lambda_ = lambda;
  return g;
}

ProxFn ProxFn::sq_l2(double lambda) {
  if (lambda <= 0) throw Error("sq_l2: lambda must be > 0");
  ProxFn g;
  g.kind_ = Kind::SqL2;
  g.lambda_ = lambda;
  return g;
}

ProxFn ProxFn::group_l2(std::vector<std::vector<Index>> groups,
                        double lambda1) {
  if (lambda1 < 0) throw Error("group_l2: lambda1 must be >= 0");
  std::vector<char> seen;
  Index max_index = -1;
  for (const auto& grp : groups) {
    if (grp.empty()) throw Error("group_l2: empty group");
    for (Index i : grp) {
      if (i < 0) throw Error("group_l2: negative index");
      if (static_cast<size_t>(i) >= seen.size())
        seen.resize(static_cast<size_t>(i) + 1, 0);
      if (seen[static_cast<size_t>(i)])
        throw Error("group_l2: groups must be disjoint");
      seen[static_cast<size_t>(i)] = 1;
      max_index = std::max(max_index, i);
    }
  }
  ProxFn g;
  g.kind_ = Kind::GroupL2;
  g.lambda_ = lambda1;
  g.groups_ = std::move(groups);
  g.min_group_dim_ = max_index + 1;
  return g;
}

ProxFn ProxFn::indicator_point(Vector b) {
  ProxFn g;
  g.kind_ = Kind::IndicatorPoint;
  g.b_ = std::move(b);
  return g;
}

ProxFn ProxFn::l2_norm_sum(std::vector<Index> block_sizes, double lambda1) {
  if (lambda1 < 0) throw Error("l2_norm_sum: lambda1 must be >= 0");
  for (Index s : block_sizes)
    if (s <= 0) throw Error("l2_norm_sum: block sizes must be positive");
  ProxFn g;
  g.kind_ = Kind::L2NormSum;
  g.lambda_ = lambda1;
  g.blocks_ = std::move(block_sizes);
  return g;
}

namespace {

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// max(0, 1 - t/||v||) * v; zero-norm blocks shrink to 0 exactly.
void shrink_block(Eigen::Ref<Vector> v, double t) {
  if (t <= 0) return;
  const double n = v.norm();
  if (n <= t) {
    v.setZero();
  } else {
    v *= (1.0 - t / n);
  }
}

}  // namespace

Vector ProxFn::prox(const Vector& v, double gamma) const {
  if (gamma <= 0) throw Error("prox: gamma must be > 0");
  switch (kind_) {
    case Kind::Zero:
      return v;
    case Kind::L1: {
      Vector x = v;
      const double t = gamma * lambda_;
      for (Index i = 0; i < x.size(); ++i) x[i] = soft_threshold(x[i], t);
      return x;
    }
    case Kind::SqL2:
      return v / (1.0 + gamma * lambda_);
    case Kind::GroupL2: {
      if (v.size() < min_group_dim_)
        throw DimensionError("prox group_l2", min_group_dim_, v.size());
      Vector x = v;
      const double t = gamma * lambda_;
      for (const auto& grp : groups_) {
        double n2 = 0.0;
        for (Index i : grp) n2 += x[i] * x[i];
        const double n = std::sqrt(n2);
        const double factor = (n <= t) ? 0.0 : 1.0 - t / n;
        for (Index i : grp) x[i] *= factor;
      }
      return x;
    }
    case Kind::IndicatorPoint:
      check_dim("prox indicator", b_.size(), v.size());
      return b_;
    case Kind::L2NormSum: {
      Index total = 0;
      for (Index s : blocks_) total += s;
      check_dim("prox l2_norm_sum", total, v.size());
      Vector x = v;
      Index at = 0;
      for (Index s : blocks_) {
        shrink_block(x.segment(at, s), gamma * lambda_);
        at += s;
      }
      return x;
    }
  }
  throw Error("ProxFn::prox: unreachable");
}

Vector ProxFn::prox_conjugate(const Vector& v, double tau) const {
  if (tau <= 0) throw Error("prox_conjugate: tau must be > 0");
  return v - tau * prox(v / tau, 1.0 / tau);
}

std::optional<double> ProxFn::value(const Vector& x) const {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::L1:
      return lambda_ * x.lpNorm<1>();
    case Kind::SqL2:
      return 0.5 * lambda_ * x.squaredNorm();
    case Kind::GroupL2: {
      if (x.size() < min_group_dim_)
        throw DimensionError("ProxFn::value group_l2", min_group_dim_,
                             x.size());
      double s = 0.0;
      for (const auto& grp : groups_) {
        double n2 = 0.0;
        for (Index i : grp) n2 += x[i] * x[i];
        s += std::sqrt(n2);
      }
      return lambda_ * s;
    }
    case Kind::IndicatorPoint: {
      check_dim("ProxFn::value indicator", b_.size(), x.size());
      const double tol = 1e-9 * (1.0 + b_.cwiseAbs().maxCoeff());
      if ((x - b_).cwiseAbs().maxCoeff() > tol) return std::nullopt;
      return 0.0;
    }
    case Kind::L2NormSum: {
      double s = 0.0;
      Index at = 0;
      for (Index bs : blocks_) {
        s += x.segment(at, bs).norm();
        at += bs;
      }
      return lambda_ * s;
    }
  }
  throw Error("ProxFn::value: unreachable");
}

std::optional<double> ProxFn::conjugate_value(const Vector& y) const {
  // Ball memberships use a small slack so prox outputs that land exactly on
  // the boundary (up to rounding) stay feasible.
  const double slack = 1e-9;
  switch (kind_) {
    case Kind::Zero:
      if (y.size() > 0 && y.cwiseAbs().maxCoeff() > slack) return std::nullopt;
      return 0.0;
    case Kind::L1:
      if (y.size() > 0 &&
          y.cwiseAbs().maxCoeff() > lambda_ * (1.0 + slack) + 1e-12)
        return std::nullopt;
      return 0.0;
    case Kind::SqL2:
      return 0.5 * y.squaredNorm() / lambda_;
    case Kind::GroupL2: {
      if (y.size() < min_group_dim_)
        throw DimensionError("conjugate_value group_l2", min_group_dim_,
                             y.size());
      std::vector<char> covered(static_cast<size_t>(y.size()), 0);
      for (const auto& grp : groups_) {
        double n2 = 0.0;
        for (Index i : grp) {
          n2 += y[i] * y[i];
          covered[static_cast<size_t>(i)] = 1;
        }
        if (std::sqrt(n2) > lambda_ * (1.0 + slack) + 1e-12)
          return std::nullopt;
      }
      for (Index i = 0; i < y.size(); ++i)
        if (!covered[static_cast<size_t>(i)] && std::abs(y[i]) > slack)
          return std::nullopt;
      return 0.0;
    }
    case Kind::IndicatorPoint:
      check_dim("conjugate_value indicator", b_.size(), y.size());
      return b_.dot(y);
    case Kind::L2NormSum: {
      Index at = 0;
      for (Index bs : blocks_) {
        if (y.segment(at, bs).norm() > lambda_ * (1.0 + slack) + 1e-12)
          return std::nullopt;
        at += bs;
      }
      return 0.0;
    }
  }
  throw Error("ProxFn::conjugate_value: unreachable");
}

double ProxFn::strong_convexity() const {
  return kind_ == Kind::SqL2 ? lambda_ : 0.0;
}

std::optional<double> ProxFn::smoothness() const {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::SqL2:
      return lambda_;
    default:
      return std::nullopt;
  }
}

double ProxFn::conjugate_strong_convexity() const {
  auto lam = smoothness();
  if (!lam) return 0.0;
  return *lam > 0 ? 1.0 / *lam : kInf;
}

// ---------------------------------------------------------------------------

BregmanTriple bregman_gap(const SmoothFn& f, const ProxFn& r, const ProxFn& h,
                          const LinOp& l, const Vector& x, const Vector& y,
                          const Vector& x_star, const Vector& y_star,
                          const Vector& r_star, const Vector& h_star) {
  const double res_primal =
      (f.grad(x_star) + r_star + l.adjoint(y_star)).norm();
  const double res_dual = (h_star - l.apply(x_star)).norm();
  if (std::max(res_primal, res_dual) > 1e-6)
    throw Error("bregman_gap: not a saddle point (residuals " +
                std::to_string(res_primal) + ", " + std::to_string(res_dual) +
                ")");

  BregmanTriple t;
  t.d_f = f.value(x) - f.value(x_star) - f.grad(x_star).dot(x - x_star);

  const auto rx = r.value(x);
  const auto rxs = r.value(x_star);
  if (!rxs) throw Error("bregman_gap: x_star outside dom R");
  t.d_r = rx ? *rx - *rxs - r_star.dot(x - x_star) : kInf;

  const auto hy = h.conjugate_value(y);
  const auto hys = h.conjugate_value(y_star);
  if (!hys) throw Error("bregman_gap: y_star outside dom H*");
  t.d_hstar = hy ? *hy - *hys - h_star.dot(y - y_star) : kInf;
  return t;
}

}  // namespace pdsplit
