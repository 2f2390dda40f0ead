#pragma once

#include <cmath>

#include "pdsplit/functions.hpp"
#include "pdsplit/rng.hpp"
#include "pdsplit/types.hpp"

namespace pdsplit::testing {

inline Matrix random_matrix(RngStream& rs, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rs.normal();
  return m;
}

inline Vector random_vector(RngStream& rs, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rs.normal();
  return v;
}

// Central finite differences, step h (1 + ||x||).
template <typename F>
Vector fd_gradient(const F& f, const Vector& x, double h = 1e-5) {
  const double step = h * (1.0 + x.norm());
  Vector g(x.size());
  Vector e = x;
  for (Index i = 0; i < x.size(); ++i) {
    e[i] = x[i] + step;
    const double up = f(e);
    e[i] = x[i] - step;
    const double dn = f(e);
    e[i] = x[i];
    g[i] = (up - dn) / (2.0 * step);
  }
  return g;
}

inline Matrix spd_matrix(RngStream& rs, Index d, double ridge) {
  Matrix m = random_matrix(rs, d, d);
  Matrix q = m.transpose() * m / double(d);
  q.diagonal().array() += ridge;
  return q;
}

}  // namespace pdsplit::testing
