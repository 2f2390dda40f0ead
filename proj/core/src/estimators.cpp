#include "pdsplit/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "pdsplit/rng.hpp"

namespace pdsplit {

double max_stepsize(const AssumptionConstants& c, StepsizeMode mode) {
  return max_stepsize_with_kappa(c, c.kappa, mode);
}

double max_stepsize_with_kappa(const AssumptionConstants& c, double kappa,
                               StepsizeMode mode) {
  const double denom = c.alpha + kappa * c.delta;
  if (denom <= 0) throw Error("max_stepsize: alpha + kappa*delta must be > 0");
  return mode == StepsizeMode::Ergodic ? 1.0 / (2.0 * denom) : 1.0 / denom;
}

Estimator Estimator::full() { return Estimator(); }

Estimator Estimator::minibatch(int batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw Error("minibatch: batch size must be >= 1");
  Estimator e;
  e.kind_ = EstimatorKind::Minibatch;
  e.batch_ = batch_size;
  e.seed_ = seed;
  return e;
}

Estimator Estimator::lsvrg(double p, std::uint64_t seed) {
  if (p <= 0 || p >= 1) throw Error("lsvrg: p must be in (0,1)");
  Estimator e;
  e.kind_ = EstimatorKind::LSVRG;
  e.p_ = p;
  e.seed_ = seed;
  return e;
}

Estimator Estimator::saga(std::uint64_t seed) {
  Estimator e;
  e.kind_ = EstimatorKind::SAGA;
  e.seed_ = seed;
  return e;
}

void Estimator::init(const SmoothFn& f, const Vector& x0) {
  check_dim("Estimator::init", f.dim(), x0.size());
  switch (kind_) {
    case EstimatorKind::Full:
    case EstimatorKind::Minibatch:
      break;
    case EstimatorKind::LSVRG:
      ref_point_ = x0;
      ref_grad_ = f.grad(x0);
      break;
    case EstimatorKind::SAGA: {
      const int n = f.components();
      table_.resize(static_cast<size_t>(n));
      table_mean_ = Vector::Zero(f.dim());
      for (int i = 0; i < n; ++i) {
        table_[static_cast<size_t>(i)] = f.grad_component(i, x0);
        table_mean_ += table_[static_cast<size_t>(i)];
      }
      table_mean_ /= static_cast<double>(n);
      break;
    }
  }
  initialized_ = true;
  count_ = 0;
}

Vector Estimator::sample(const SmoothFn& f, const Vector& x) {
  check_dim("Estimator::sample", f.dim(), x.size());
  if (kind_ != EstimatorKind::Full && !initialized_)
    throw Error("Estimator::sample: estimator not initialized");
  RngStream rs(seed_, count_);
  ++count_;
  switch (kind_) {
    case EstimatorKind::Full:
      return f.grad(x);
    case EstimatorKind::Minibatch: {
      const int n = f.components();
      const int b = std::min(batch_, n);
      // Partial Fisher-Yates: b distinct indices.
      std::vector<int> idx(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
      Vector g = Vector::Zero(f.dim());
      for (int j = 0; j < b; ++j) {
        const auto pick =
            j + static_cast<int>(rs.index(static_cast<std::uint64_t>(n - j)));
        std::swap(idx[static_cast<size_t>(j)], idx[static_cast<size_t>(pick)]);
        g += f.grad_component(idx[static_cast<size_t>(j)], x);
      }
      return g / static_cast<double>(b);
    }
    case EstimatorKind::LSVRG: {
      const int n = f.components();
      const int zeta = static_cast<int>(rs.index(static_cast<std::uint64_t>(n)));
      const bool flip = rs.bernoulli(p_);
      Vector g = f.grad_component(zeta, x) - f.grad_component(zeta, ref_point_)
                 + ref_grad_;
      if (flip) {
        ref_point_ = x;
        ref_grad_ = f.grad(x);
      }
      return g;
    }
    case EstimatorKind::SAGA: {
      const int n = f.components();
      if (table_.size() != static_cast<size_t>(n))
        throw Error("Estimator::sample: SAGA table does not match f");
      const auto zeta = static_cast<size_t>(rs.index(static_cast<std::uint64_t>(n)));
      Vector gi = f.grad_component(static_cast<int>(zeta), x);
      Vector g = gi - table_[zeta] + table_mean_;
      table_mean_ += (gi - table_[zeta]) / static_cast<double>(n);
      table_[zeta] = std::move(gi);
      if (count_ % 1024 == 0) {
        Vector fresh = Vector::Zero(table_mean_.size());
        for (const auto& t : table_) fresh += t;
        fresh /= static_cast<double>(n);
        drift_ = std::max(drift_, (fresh - table_mean_).norm());
        table_mean_ = std::move(fresh);
      }
      return g;
    }
  }
  throw Error("Estimator::sample: unreachable");
}

AssumptionConstants Estimator::constants(const SmoothFn& f) const {
  AssumptionConstants c;
  switch (kind_) {
    case EstimatorKind::Full:
      c.alpha = f.nu();
      c.beta = 0.0;
      c.rho = 1.0;
      c.delta = 0.0;
      c.kappa = 0.0;
      return c;
    case EstimatorKind::LSVRG:
      c.alpha = 2.0 * f.max_nu_i();
      c.beta = 2.0;
      c.rho = p_;
      c.delta = c.alpha * p_ / 2.0;
      c.kappa = c.beta / c.rho;
      return c;
    case EstimatorKind::SAGA: {
      const int n = f.components();
      c.alpha = 2.0 * f.max_nu_i();
      c.beta = 2.0;
      c.rho = 1.0 / n;
      c.delta = f.max_nu_i() / n;
      c.kappa = c.beta / c.rho;
      c.derived = true;
      return c;
    }
    case EstimatorKind::Minibatch:
      throw Error(
          "constants: minibatch SGD has no admissible constants; set gamma "
          "explicitly (benchmark mode)");
  }
  throw Error("Estimator::constants: unreachable");
}

double Estimator::sigma_sq(const SmoothFn& f, const Vector& x_star) const {
  check_dim("Estimator::sigma_sq", f.dim(), x_star.size());
  const int n = f.components();
  switch (kind_) {
    case EstimatorKind::Full:
      return 0.0;
    case EstimatorKind::LSVRG: {
      if (!initialized_)
        throw Error("sigma_sq: estimator not initialized");
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        s += (f.grad_component(i, ref_point_) - f.grad_component(i, x_star))
                 .squaredNorm();
      return s / n;
    }
    case EstimatorKind::SAGA: {
      if (!initialized_)
        throw Error("sigma_sq: estimator not initialized");
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        s += (table_[static_cast<size_t>(i)] - f.grad_component(i, x_star))
                 .squaredNorm();
      return s / n;
    }
    case EstimatorKind::Minibatch:
      throw Error("sigma_sq: not defined for minibatch SGD");
  }
  throw Error("Estimator::sigma_sq: unreachable");
}

}  // namespace pdsplit
