#include <doctest.h>

#include <cmath>

#include "pdsplit/functions.hpp"
#include "pdsplit/rng.hpp"

#include "helpers.hpp"

using namespace pdsplit;
using namespace pdsplit::testing;

namespace {

std::vector<SmoothFn> smooth_catalog(RngStream& rs) {
  std::vector<SmoothFn> fns;
  fns.push_back(SmoothFn::zero(4));
  fns.push_back(SmoothFn::least_squares(random_matrix(rs, 6, 4),
                                        random_vector(rs, 6), 0.3));
  Vector labels(5);
  for (Index i = 0; i < 5; ++i) labels[i] = rs.bernoulli(0.5) ? 1.0 : 0.0;
  fns.push_back(SmoothFn::logistic_l2(random_matrix(rs, 5, 4), labels, 0.1));
  fns.push_back(SmoothFn::quadratic(spd_matrix(rs, 4, 0.2),
                                    random_vector(rs, 4)));
  std::vector<Matrix> qs;
  std::vector<Vector> vs;
  for (int i = 0; i < 3; ++i) {
    qs.push_back(spd_matrix(rs, 4, 0.1));
    vs.push_back(random_vector(rs, 4));
  }
  fns.push_back(SmoothFn::quadratic_sum(qs, vs));
  return fns;
}

std::vector<ProxFn> prox_catalog(RngStream& rs) {
  std::vector<ProxFn> fns;
  fns.push_back(ProxFn::zero());
  fns.push_back(ProxFn::l1(0.8));
  fns.push_back(ProxFn::sq_l2(1.7));
  fns.push_back(ProxFn::group_l2({{0, 1, 2}, {3, 4}}, 0.6));
  fns.push_back(ProxFn::indicator_point(random_vector(rs, 5)));
  fns.push_back(ProxFn::l2_norm_sum({2, 2, 1}, 0.9));
  return fns;
}

}  // namespace

TEST_CASE("grad: trivial and closed-form examples") {
  CHECK(SmoothFn::zero(3).grad(Vector::Ones(3)).norm() == 0.0);

  Vector x(2);
  x << 1, -2;
  SmoothFn half_sq = SmoothFn::quadratic(Matrix::Identity(2, 2),
                                         Vector::Zero(2));
  CHECK((half_sq.grad(x) - x).norm() == 0.0);

  Matrix w(2, 2);
  w << 1, 0, 0, 2;
  Vector a = Vector::Ones(2);
  SmoothFn ls = SmoothFn::least_squares(w, a, 0.0);
  Vector g = ls.grad(Vector::Ones(2));
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1] == doctest::Approx(2.0));
}

TEST_CASE("grad matches central finite differences (20 points, 1e-5)") {
  RngStream rs(11, 0);
  for (const auto& f : smooth_catalog(rs)) {
    for (int t = 0; t < 20; ++t) {
      Vector x = random_vector(rs, f.dim());
      Vector g = f.grad(x);
      Vector fd = fd_gradient([&](const Vector& v) { return f.value(v); }, x);
      CHECK((g - fd).norm() <= 1e-5 * (1.0 + g.norm()));
    }
  }
}

TEST_CASE("component gradients average to the full gradient (1e-12)") {
  RngStream rs(12, 0);
  for (const auto& f : smooth_catalog(rs)) {
    Vector x = random_vector(rs, f.dim());
    Vector mean = Vector::Zero(f.dim());
    for (int i = 0; i < f.components(); ++i) mean += f.grad_component(i, x);
    mean /= double(f.components());
    CHECK((mean - f.grad(x)).norm() <= 1e-12 * (1.0 + f.grad(x).norm()));
    // value consistency: F = (1/n) sum f_i
    double vsum = 0.0;
    for (int i = 0; i < f.components(); ++i) vsum += f.component_value(i, x);
    CHECK(vsum / f.components() ==
          doctest::Approx(f.value(x)).epsilon(1e-10));
  }
}

TEST_CASE("least-squares row gradient follows the n-scaled form") {
  RngStream rs(13, 0);
  Matrix w = random_matrix(rs, 5, 3);
  Vector a = random_vector(rs, 5);
  SmoothFn f = SmoothFn::least_squares(w, a, 0.0);
  Vector x = random_vector(rs, 3);
  const int i = 2;
  Vector expect = 5.0 * (w.row(i).dot(x) - a[i]) * w.row(i).transpose();
  CHECK((f.grad_component(i, x) - expect).norm() <= 1e-12);
  CHECK_THROWS_AS(f.grad_component(7, x), Error);
}

TEST_CASE("logistic component gradient: (h(w'x) - a) w + lambda x") {
  RngStream rs(14, 0);
  Matrix w = random_matrix(rs, 4, 3);
  Vector labels(4);
  labels << 1, 0, 1, 0;
  const double lam = 0.2;
  SmoothFn f = SmoothFn::logistic_l2(w, labels, lam);
  Vector x = random_vector(rs, 3);
  const int i = 1;
  const double t = w.row(i).dot(x);
  const double h = 1.0 / (1.0 + std::exp(-t));
  Vector expect = (h - labels[i]) * w.row(i).transpose() + lam * x;
  CHECK((f.grad_component(i, x) - expect).norm() <= 1e-12);
  // and against finite differences of the component value
  Vector fd = fd_gradient(
      [&](const Vector& v) { return f.component_value(i, v); }, x, 1e-6);
  CHECK((f.grad_component(i, x) - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
}

TEST_CASE("n=1 component gradient equals the gradient") {
  RngStream rs(15, 0);
  SmoothFn f = SmoothFn::quadratic(spd_matrix(rs, 3, 0.5),
                                   random_vector(rs, 3));
  Vector x = random_vector(rs, 3);
  CHECK((f.grad_component(0, x) - f.grad(x)).norm() == 0.0);
}

TEST_CASE("prox: trivial examples") {
  Vector v(2);
  v << 7, -3;
  CHECK(ProxFn::zero().prox(v, 5.0) == v);

  Vector b(2);
  b << 1, 2;
  CHECK(ProxFn::indicator_point(b).prox(v, 0.3) == b);
}

TEST_CASE("prox L1 equals soft thresholding (ternary-search oracle)") {
  // 1-D oracle: minimize lambda|z| + (z-v)^2/(2 gamma) by ternary search.
  auto scalar_prox = [](double v, double lambda, double gamma) {
    double lo = -std::abs(v) - 1.0, hi = std::abs(v) + 1.0;
    for (int it = 0; it < 200; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      auto obj = [&](double z) {
        return lambda * std::abs(z) + (z - v) * (z - v) / (2.0 * gamma);
      };
      if (obj(m1) < obj(m2)) hi = m2; else lo = m1;
    }
    return 0.5 * (lo + hi);
  };
  Vector v(3);
  v << 3, -0.5, 0;
  Vector out = ProxFn::l1(1.0).prox(v, 1.0);
  CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 0.0);
  RngStream rs(16, 0);
  for (int t = 0; t < 20; ++t) {
    const double vi = 3.0 * rs.normal(), gamma = 0.1 + rs.uniform();
    const double got = ProxFn::l1(0.7).prox(Vector::Constant(1, vi), gamma)[0];
    CHECK(got == doctest::Approx(scalar_prox(vi, 0.7, gamma)).epsilon(1e-6));
  }
}

TEST_CASE("prox optimality by subgradient membership") {
  RngStream rs(17, 0);
  // For x = prox_{gamma G}(v): (v - x)/gamma must lie in dG(x).
  for (int t = 0; t < 50; ++t) {
    Vector v = random_vector(rs, 5);
    const double gamma = 0.2 + rs.uniform();
    {
      ProxFn g = ProxFn::l1(0.8);
      Vector x = g.prox(v, gamma);
      Vector sub = (v - x) / gamma;
      for (Index i = 0; i < 5; ++i) {
        if (x[i] > 0) CHECK(sub[i] == doctest::Approx(0.8).epsilon(1e-10));
        else if (x[i] < 0) CHECK(sub[i] == doctest::Approx(-0.8).epsilon(1e-10));
        else CHECK(std::abs(sub[i]) <= 0.8 + 1e-10);
      }
    }
    {
      ProxFn g = ProxFn::sq_l2(1.7);
      Vector x = g.prox(v, gamma);
      CHECK(((v - x) / gamma - 1.7 * x).norm() <= 1e-10);
    }
  }
}

TEST_CASE("group prox shrinks blocks; zero-norm blocks stay zero") {
  ProxFn g = ProxFn::group_l2({{0, 1}, {2, 3}}, 1.0);
  Vector v(4);
  v << 3, 4, 0, 0;  // first block norm 5
  Vector out = g.prox(v, 1.0);
  CHECK(out[0] == doctest::Approx(3.0 * 0.8));
  CHECK(out[1] == doctest::Approx(4.0 * 0.8));
  CHECK(out[2] == 0.0);
  CHECK(out[3] == 0.0);
  // gamma lambda = 0 acts as the identity
  ProxFn g0 = ProxFn::group_l2({{0, 1}}, 0.0);
  CHECK(g0.prox(v, 1.0) == v);
  CHECK_THROWS_WITH_AS(ProxFn::group_l2({{0, 1}, {1, 2}}, 1.0),
                       doctest::Contains("disjoint"), Error);
}

TEST_CASE("prox_conjugate: closed-form cases") {
  Vector v(2);
  v << 0, 0;
  Vector b(2);
  b << 1, 1;
  // G = indicator of b: prox_{tau G*}(v) = v - tau b.
  Vector out = ProxFn::indicator_point(b).prox_conjugate(v, 2.0);
  CHECK(out[0] == doctest::Approx(-2.0));
  CHECK(out[1] == doctest::Approx(-2.0));

  // G = indicator of 0: G* = 0, conjugate prox is the identity.
  Vector w(2);
  w << 3, -4;
  CHECK(ProxFn::indicator_point(Vector::Zero(2)).prox_conjugate(w, 0.7) == w);

  // G = lambda ||.||_1: clamp to [-lambda, lambda].
  Vector u(3);
  u << 3, -0.2, -9;
  Vector clamped = ProxFn::l1(0.5).prox_conjugate(u, 2.0);
  CHECK(clamped[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(clamped[1] == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(clamped[2] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("Moreau identity across the catalog, tau in {0.1, 1, 10}") {
  RngStream rs(18, 0);
  for (const auto& g : prox_catalog(rs)) {
    for (double tau : {0.1, 1.0, 10.0}) {
      for (int t = 0; t < 30; ++t) {
        Vector v = random_vector(rs, 5);
        Vector lhs = g.prox_conjugate(v, tau) + tau * g.prox(v / tau, 1.0 / tau);
        CHECK((lhs - v).norm() <= 1e-10 * (1.0 + v.norm()));
      }
    }
  }
}

TEST_CASE("firm nonexpansiveness on 100 random pairs") {
  RngStream rs(19, 0);
  for (const auto& g : prox_catalog(rs)) {
    for (int t = 0; t < 100; ++t) {
      Vector v = random_vector(rs, 5), w = random_vector(rs, 5);
      Vector pv = g.prox(v, 1.3), pw = g.prox(w, 1.3);
      CHECK((pv - pw).squaredNorm() <= (pv - pw).dot(v - w) + 1e-10);
    }
  }
}

TEST_CASE("conjugate values: balls and linear forms") {
  ProxFn l1 = ProxFn::l1(0.5);
  Vector in(2);
  in << 0.5, -0.5;
  CHECK(l1.conjugate_value(in).value() == 0.0);
  Vector out(2);
  out << 0.6, 0.0;
  CHECK(!l1.conjugate_value(out).has_value());

  Vector b(2);
  b << 2, -1;
  Vector y(2);
  y << 3, 3;
  CHECK(ProxFn::indicator_point(b).conjugate_value(y).value() ==
        doctest::Approx(3.0));

  ProxFn sq = ProxFn::sq_l2(2.0);
  CHECK(sq.conjugate_value(y).value() == doctest::Approx(18.0 / 4.0));
  CHECK(sq.strong_convexity() == 2.0);
  CHECK(sq.smoothness().value() == 2.0);
  CHECK(sq.conjugate_strong_convexity() == doctest::Approx(0.5));
}

TEST_CASE("bregman_gap: trivial identities and saddle validation") {
  const Index d = 3;
  SmoothFn f = SmoothFn::quadratic(Matrix::Identity(d, d), Vector::Zero(d));
  ProxFn r = ProxFn::zero();
  ProxFn h = ProxFn::zero();
  LinOp l = LinOp::zero(d, d);
  // Saddle of 0.5||x||^2: x* = 0, y* = 0 (H = 0 fixes the dual at 0).
  Vector zero = Vector::Zero(d);
  RngStream rs(20, 0);
  Vector x = random_vector(rs, d);

  BregmanTriple at_star =
      bregman_gap(f, r, h, l, zero, zero, zero, zero, zero, zero);
  CHECK(at_star.sum() == 0.0);

  BregmanTriple t =
      bregman_gap(f, r, h, l, x, zero, zero, zero, zero, zero);
  CHECK(t.d_f == doctest::Approx(0.5 * x.squaredNorm()).epsilon(1e-12));
  CHECK(t.d_r == 0.0);
  CHECK(t.d_hstar == 0.0);
  CHECK(t.d_f >= -1e-12);

  // A non-saddle star point must be rejected.
  Vector bad = Vector::Ones(d);
  CHECK_THROWS_WITH_AS(
      bregman_gap(f, r, h, l, x, zero, bad, zero, zero, zero),
      doctest::Contains("not a saddle point"), Error);
}

TEST_CASE("smoothness constants: nu >= mu and nu >= max nu_i / n") {
  RngStream rs(21, 0);
  for (const auto& f : smooth_catalog(rs)) {
    CHECK(f.nu() >= f.mu() - 1e-12);
    CHECK(f.nu() >= f.max_nu_i() / f.components() - 1e-9 * f.nu());
    CHECK(f.nu() > 0.0);
  }
}

TEST_CASE("group prox rejects vectors shorter than the group span") {
  ProxFn g = ProxFn::group_l2({{0, 4}}, 0.5);
  CHECK_THROWS_AS(g.prox(Vector::Zero(3), 1.0), DimensionError);
  CHECK_THROWS_AS(g.value(Vector::Zero(3)), DimensionError);
  CHECK_THROWS_AS(g.conjugate_value(Vector::Zero(3)), DimensionError);
  CHECK(g.prox(Vector::Zero(5), 1.0).size() == 5);
}
