#include <doctest.h>

#include <cmath>

#include "pdsplit/estimators.hpp"
#include "pdsplit/rng.hpp"
#include "pdsplit/serialize.hpp"

#include "helpers.hpp"

using namespace pdsplit;
using namespace pdsplit::testing;

namespace {

SmoothFn quad_sum(std::uint64_t seed, int n, Index d) {
  RngStream rs(seed, 0);
  std::vector<Matrix> qs;
  std::vector<Vector> vs;
  for (int i = 0; i < n; ++i) {
    qs.push_back(spd_matrix(rs, d, 0.3));
    vs.push_back(random_vector(rs, d));
  }
  return SmoothFn::quadratic_sum(qs, vs);
}

}  // namespace

TEST_CASE("constants: full gradient") {
  RngStream rs(41, 0);
  Matrix q = Matrix::Identity(3, 3) * 4.0;
  SmoothFn f = SmoothFn::quadratic(q, Vector::Zero(3));
  AssumptionConstants c = Estimator::full().constants(f);
  CHECK(c.alpha == doctest::Approx(4.0));
  CHECK(c.beta == 0.0);
  CHECK(c.rho == 1.0);
  CHECK(c.delta == 0.0);
  CHECK(c.kappa == 0.0);
  CHECK(!c.derived);
}

TEST_CASE("constants: lsvrg from the stated formulas") {
  // Components with max nu_i = 5 -> alpha = 10, beta = 2, rho = p,
  // delta = alpha p / 2.
  std::vector<Matrix> qs = {Matrix::Identity(2, 2) * 5.0,
                            Matrix::Identity(2, 2) * 1.0};
  std::vector<Vector> vs = {Vector::Zero(2), Vector::Zero(2)};
  SmoothFn f = SmoothFn::quadratic_sum(qs, vs);
  AssumptionConstants c = Estimator::lsvrg(0.1, 0).constants(f);
  CHECK(c.alpha == doctest::Approx(10.0));
  CHECK(c.beta == 2.0);
  CHECK(c.rho == doctest::Approx(0.1));
  CHECK(c.delta == doctest::Approx(0.5));
  CHECK(c.kappa == doctest::Approx(20.0));
  CHECK(!c.derived);

  CHECK(max_stepsize(c) == doctest::Approx(1.0 / 40.0));
}

TEST_CASE("constants: saga flagged derived; minibatch refuses") {
  SmoothFn f = quad_sum(42, 4, 3);
  AssumptionConstants c = Estimator::saga(0).constants(f);
  CHECK(c.derived);
  CHECK(c.rho == doctest::Approx(1.0 / 4.0));
  CHECK(c.beta == 2.0);
  CHECK(c.alpha == doctest::Approx(2.0 * f.max_nu_i()));
  CHECK(c.delta == doctest::Approx(f.max_nu_i() / 4.0));
  CHECK_THROWS_WITH_AS(Estimator::minibatch(16, 0).constants(f),
                       doctest::Contains("benchmark"), Error);
}

TEST_CASE("constants: zero objective uses the epsilon floor") {
  SmoothFn f = SmoothFn::zero(3);
  AssumptionConstants c = Estimator::full().constants(f);
  CHECK(c.alpha > 0.0);
  Estimator e = Estimator::full();
  e.init(f, Vector::Zero(3));
  CHECK(e.sample(f, Vector::Ones(3)).norm() == 0.0);
}

TEST_CASE("max_stepsize: modes and monotonicity") {
  AssumptionConstants full{4.0, 0.0, 1.0, 0.0, 0.0, false};
  CHECK(max_stepsize(full, StepsizeMode::Ergodic) == doctest::Approx(0.125));
  CHECK(max_stepsize(full, StepsizeMode::Linear) == doctest::Approx(0.25));
  double prev = max_stepsize(full);
  for (double alpha : {8.0, 16.0, 1e6}) {
    AssumptionConstants c{alpha, 0.0, 1.0, 0.0, 0.0, false};
    const double g = max_stepsize(c);
    CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("lsvrg: exact at the reference point") {
  SmoothFn f = quad_sum(43, 5, 4);
  Estimator e = Estimator::lsvrg(0.3, 7);
  Vector x0 = Vector::Ones(4);
  e.init(f, x0);
  // At x = ref the two component terms cancel for every zeta.
  for (int t = 0; t < 10; ++t) {
    Estimator clone = e;
    clone.reseed(1000 + t);
    CHECK((clone.sample(f, x0) - f.grad(x0)).norm() == 0.0);
  }
}

TEST_CASE("lsvrg: Monte-Carlo unbiasedness on two quadratic components") {
  SmoothFn f = quad_sum(44, 2, 3);
  Estimator base = Estimator::lsvrg(0.2, 5);
  base.init(f, Vector::Zero(3));
  RngStream rs(45, 0);
  Vector x = random_vector(rs, 3);
  const int n = 100000;
  Vector mean = Vector::Zero(3);
  Vector m2 = Vector::Zero(3);
  for (int s = 0; s < n; ++s) {
    Estimator e = base;
    e.reseed(rng::draw_u64(9, 0, static_cast<std::uint64_t>(s)));
    Vector g = e.sample(f, x);
    mean += g;
    m2 += g.cwiseProduct(g);
  }
  mean /= n;
  Vector var = m2 / n - mean.cwiseProduct(mean);
  const double se = std::sqrt(std::max(0.0, var.sum()) / n);
  CHECK((mean - f.grad(x)).norm() <= 3.0 * se + 1e-9);
}

TEST_CASE("determinism: identical seeds give bit-identical streams") {
  SmoothFn f = quad_sum(46, 6, 4);
  RngStream rs(47, 0);
  Vector x = random_vector(rs, 4);
  for (auto make : {+[] { return Estimator::lsvrg(0.25, 11); },
                    +[] { return Estimator::saga(11); },
                    +[] { return Estimator::minibatch(3, 11); }}) {
    Estimator a = make(), b = make();
    a.init(f, Vector::Zero(4));
    b.init(f, Vector::Zero(4));
    for (int t = 0; t < 50; ++t) {
      Vector ga = a.sample(f, x);
      Vector gb = b.sample(f, x);
      CHECK((ga - gb).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("uninitialized table raises") {
  SmoothFn f = quad_sum(48, 3, 2);
  Estimator e = Estimator::saga(0);
  CHECK_THROWS_WITH_AS(e.sample(f, Vector::Zero(2)),
                       doctest::Contains("not initialized"), Error);
  Estimator l = Estimator::lsvrg(0.5, 0);
  CHECK_THROWS_AS(l.sample(f, Vector::Zero(2)), Error);
}

TEST_CASE("sigma_sq: reference-point diagnostics") {
  SmoothFn f = quad_sum(49, 4, 3);
  // Dense solve for x*.
  Vector q0 = f.grad(Vector::Zero(3));
  Matrix q(3, 3);
  for (Index j = 0; j < 3; ++j) {
    Vector e = Vector::Zero(3);
    e[j] = 1.0;
    q.col(j) = f.grad(e) - q0;
  }
  Vector x_star = q.ldlt().solve(-q0);

  Estimator e = Estimator::lsvrg(0.4, 3);
  e.init(f, x_star);
  CHECK(e.sigma_sq(f, x_star) <= 1e-20);  // ref point at the solution

  e.init(f, Vector::Ones(3));
  double direct = 0.0;
  for (int i = 0; i < 4; ++i)
    direct += (f.grad_component(i, Vector::Ones(3)) -
               f.grad_component(i, x_star))
                  .squaredNorm();
  direct /= 4.0;
  CHECK(e.sigma_sq(f, x_star) == doctest::Approx(direct).epsilon(1e-12));

  // Single-component sum: sigma^2 = ||grad f_1(ref) - grad f_1(x*)||^2.
  SmoothFn f1 = quad_sum(50, 1, 3);
  Estimator e1 = Estimator::lsvrg(0.4, 3);
  e1.init(f1, Vector::Ones(3));
  Vector xs = Vector::Zero(3);
  CHECK(e1.sigma_sq(f1, xs) ==
        doctest::Approx((f1.grad_component(0, Vector::Ones(3)) -
                         f1.grad_component(0, xs))
                            .squaredNorm()));
  CHECK(Estimator::full().sigma_sq(f, x_star) == 0.0);
}

TEST_CASE("saga: incremental mean stays on top of the table") {
  SmoothFn f = quad_sum(51, 6, 4);
  Estimator e = Estimator::saga(13);
  e.init(f, Vector::Zero(4));
  RngStream rs(52, 0);
  for (int t = 0; t < 3000; ++t) (void)e.sample(f, random_vector(rs, 4));
  Vector fresh = Vector::Zero(4);
  for (const auto& g : e.grad_table()) fresh += g;
  fresh /= double(e.grad_table().size());
  CHECK((fresh - e.table_mean()).norm() <= 1e-10 * (1.0 + fresh.norm()));
  CHECK(e.table_mean_drift() <= 1e-10);
}

TEST_CASE("minibatch without replacement averages distinct components") {
  SmoothFn f = quad_sum(53, 8, 3);
  // Batch = n must reproduce the full gradient exactly up to summation order.
  Estimator e = Estimator::minibatch(8, 1);
  e.init(f, Vector::Zero(3));
  RngStream rs(54, 0);
  Vector x = random_vector(rs, 3);
  CHECK((e.sample(f, x) - f.grad(x)).norm() <= 1e-12 * (1.0 + f.grad(x).norm()));
}

TEST_CASE("estimator state serializes losslessly") {
  SmoothFn f = quad_sum(55, 5, 3);
  Estimator e = Estimator::saga(21);
  e.init(f, Vector::Ones(3));
  RngStream rs(56, 0);
  for (int t = 0; t < 7; ++t) (void)e.sample(f, random_vector(rs, 3));
  Estimator back = estimator_from_json(to_json(e));
  CHECK(back.sample_count() == e.sample_count());
  Vector x = random_vector(rs, 3);
  Estimator e2 = e;
  Vector ga = e2.sample(f, x);
  Vector gb = back.sample(f, x);
  CHECK((ga - gb).cwiseAbs().maxCoeff() == 0.0);
}
