#pragma once

#include <cstdint>
#include <vector>

#include "pdsplit/functions.hpp"
#include "pdsplit/types.hpp"

namespace pdsplit {

/// Constants (alpha, beta, rho, delta) of the stochastic gradient bounds
///   E_k g^{k+1} = grad F(x^k),
///   E_k ||g^{k+1} - grad F(x*)||^2 <= 2 alpha D_F(x^k, x*) + beta sigma_k^2,
///   E_k sigma_{k+1}^2 <= (1 - rho) sigma_k^2 + 2 delta D_F(x^k, x*).
struct AssumptionConstants {
  double alpha = 0.0;  // > 0
  double beta = 0.0;   // >= 0
  double rho = 1.0;    // in (0, 1]
  double delta = 0.0;  // >= 0
  double kappa = 0.0;  // beta / rho
  bool derived = false;  // true when not stated by the analysis (SAGA)
};

enum class StepsizeMode {
  Ergodic,  // gamma <= 1 / (2 (alpha + kappa delta))
  Linear,   // gamma <= 1 / (alpha + kappa delta)
};

double max_stepsize(const AssumptionConstants& c,
                    StepsizeMode mode = StepsizeMode::Ergodic);
/// Linear-rate theorems allow any kappa > beta/rho; the stepsize cap then
/// uses that kappa.
double max_stepsize_with_kappa(const AssumptionConstants& c, double kappa,
                               StepsizeMode mode);

enum class EstimatorKind { Full, Minibatch, LSVRG, SAGA };

/// Stochastic gradient oracle. All randomness is a pure function of
/// (seed, sample index), so identical seeds and call sequences produce
/// bit-identical gradient streams.
class Estimator {
 public:
  static Estimator full();
  static Estimator minibatch(int batch_size, std::uint64_t seed);
  static Estimator lsvrg(double p, std::uint64_t seed);
  static Estimator saga(std::uint64_t seed);

  EstimatorKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t sample_count() const { return count_; }
  bool initialized() const { return initialized_; }

  /// Redirects future draws to a fresh stream while keeping the state
  /// (reference point, table). Used for seed-parallel sampling from a
  /// common state.
  void reseed(std::uint64_t seed) { seed_ = seed; }

  /// Builds the reference point / gradient table at x0. Required for
  /// LSVRG and SAGA before sampling.
  void init(const SmoothFn& f, const Vector& x0);

  /// One stochastic gradient at x; advances the estimator state.
  Vector sample(const SmoothFn& f, const Vector& x);

  /// Assumption constants for this estimator on f. Full and LSVRG values
  /// are the stated ones; SAGA values are derived (flagged) and validated
  /// empirically by the moment property tests. Minibatch has no admissible
  /// constants and throws.
  AssumptionConstants constants(const SmoothFn& f) const;

  /// sigma_k^2 at the current reference state; needs the oracle solution.
  double sigma_sq(const SmoothFn& f, const Vector& x_star) const;

  const Vector& ref_point() const { return ref_point_; }
  const Vector& ref_full_grad() const { return ref_grad_; }
  const std::vector<Vector>& grad_table() const { return table_; }
  const Vector& table_mean() const { return table_mean_; }
  double lsvrg_p() const { return p_; }
  int batch_size() const { return batch_; }
  /// Worst incremental-mean drift observed at the periodic recomputations.
  double table_mean_drift() const { return drift_; }

 private:
  friend struct SerdeAccess;
  Estimator() = default;

  EstimatorKind kind_ = EstimatorKind::Full;
  std::uint64_t seed_ = 0;
  std::uint64_t count_ = 0;
  bool initialized_ = false;
  double p_ = 0.0;  // LSVRG reference-update probability
  int batch_ = 0;
  Vector ref_point_;
  Vector ref_grad_;
  std::vector<Vector> table_;
  Vector table_mean_;
  double drift_ = 0.0;
};

}  // namespace pdsplit
