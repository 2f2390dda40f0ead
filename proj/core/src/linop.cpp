#include "pdsplit/linop.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

#include "pdsplit/rng.hpp"

namespace pdsplit {

LinOp LinOp::identity(Index n) {
  LinOp op;
  op.kind_ = Kind::Identity;
  op.in_dim_ = op.out_dim_ = n;
  return op;
}

LinOp LinOp::zero(Index in_dim, Index out_dim) {
  LinOp op;
  op.kind_ = Kind::Zero;
  op.in_dim_ = in_dim;
  op.out_dim_ = out_dim;
  return op;
}

LinOp LinOp::dense(Matrix m) {
  LinOp op;
  op.kind_ = Kind::Dense;
  op.in_dim_ = m.cols();
  op.out_dim_ = m.rows();
  op.mat_ = std::move(m);
  return op;
}

LinOp LinOp::first_difference(Index p) {
  if (p < 2) throw Error("first_difference: need p >= 2");
  LinOp op;
  op.kind_ = Kind::FirstDifference;
  op.in_dim_ = p;
  op.out_dim_ = p - 1;
  return op;
}

LinOp LinOp::group_selector(std::vector<std::vector<Index>> groups, Index p) {
  Index total = 0;
  for (const auto& g : groups) {
    if (g.empty()) throw Error("group_selector: empty group");
    for (Index i : g) {
      if (i < 0 || i >= p)
        throw Error("group_selector: index " + std::to_string(i) +
                    " out of range [0," + std::to_string(p) + ")");
    }
    total += static_cast<Index>(g.size());
  }
  LinOp op;
  op.kind_ = Kind::GroupSelector;
  op.in_dim_ = p;
  op.out_dim_ = total;
  op.groups_ = std::move(groups);
  return op;
}

LinOp LinOp::gossip_kron(Matrix what, Index block_dim) {
  const Index n = what.rows();
  if (what.cols() != n) throw Error("gossip_kron: matrix must be square");
  if (block_dim < 1) throw Error("gossip_kron: block_dim must be >= 1");
  const double scale = std::max(1.0, what.cwiseAbs().maxCoeff());
  if ((what - what.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw Error("gossip_kron: matrix must be symmetric");
  if ((what * Vector::Ones(n)).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error("gossip_kron: all-ones direction must be in the kernel");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(what, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
    throw Error("gossip_kron: matrix must be positive semidefinite");
  LinOp op;
  op.kind_ = Kind::GossipKron;
  op.in_dim_ = op.out_dim_ = n * block_dim;
  op.mat_ = std::move(what);
  op.block_dim_ = block_dim;
  return op;
}

LinOp LinOp::vstack(std::vector<LinOp> children) {
  if (children.empty()) throw Error("vstack: no children");
  const Index in = children.front().in_dim();
  Index out = 0;
  for (const auto& c : children) {
    check_dim("vstack child in_dim", in, c.in_dim());
    out += c.out_dim();
  }
  LinOp op;
  op.kind_ = Kind::VStack;
  op.in_dim_ = in;
  op.out_dim_ = out;
  op.children_ = std::move(children);
  return op;
}

LinOp LinOp::dense_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("dense_from_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error("dense_from_csv: bad cell '" + cell + "' in " + path);
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error("dense_from_csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("dense_from_csv: empty file " + path);
  Matrix m(rows.size(), rows.front().size());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return dense(std::move(m));
}

const Matrix& LinOp::matrix() const {
  if (kind_ != Kind::Dense) throw Error("LinOp::matrix: not a dense operator");
  return mat_;
}

const Matrix& LinOp::gossip_matrix() const {
  if (kind_ != Kind::GossipKron)
    throw Error("LinOp::gossip_matrix: not a gossip operator");
  return mat_;
}

Index LinOp::gossip_nodes() const {
  if (kind_ != Kind::GossipKron)
    throw Error("LinOp::gossip_nodes: not a gossip operator");
  return mat_.rows();
}

Vector LinOp::apply(const Vector& x) const {
  check_dim("LinOp::apply", in_dim_, x.size());
  switch (kind_) {
    case Kind::Identity:
      return x;
    case Kind::Zero:
      return Vector::Zero(out_dim_);
    case Kind::Dense:
      return mat_ * x;
    case Kind::FirstDifference: {
      Vector y(out_dim_);
      for (Index i = 0; i < out_dim_; ++i) y[i] = x[i] - x[i + 1];
      return y;
    }
    case Kind::GroupSelector: {
      Vector y(out_dim_);
      Index at = 0;
      for (const auto& g : groups_)
        for (Index i : g) y[at++] = x[i];
      return y;
    }
    case Kind::GossipKron: {
      const Index n = mat_.rows(), d = block_dim_;
      Vector y = Vector::Zero(out_dim_);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
          const double w = mat_(i, j);
          if (w != 0.0) y.segment(i * d, d) += w * x.segment(j * d, d);
        }
      return y;
    }
    case Kind::VStack: {
      Vector y(out_dim_);
      Index at = 0;
      for (const auto& c : children_) {
        y.segment(at, c.out_dim()) = c.apply(x);
        at += c.out_dim();
      }
      return y;
    }
  }
  throw Error("LinOp::apply: unreachable");
}

Vector LinOp::adjoint(const Vector& y) const {
  check_dim("LinOp::adjoint", out_dim_, y.size());
  switch (kind_) {
    case Kind::Identity:
      return y;
    case Kind::Zero:
      return Vector::Zero(in_dim_);
    case Kind::Dense:
      return mat_.transpose() * y;
    case Kind::FirstDifference: {
      Vector x = Vector::Zero(in_dim_);
      for (Index i = 0; i < out_dim_; ++i) {
        x[i] += y[i];
        x[i + 1] -= y[i];
      }
      return x;
    }
    case Kind::GroupSelector: {
      Vector x = Vector::Zero(in_dim_);
      Index at = 0;
      for (const auto& g : groups_)
        for (Index i : g) x[i] += y[at++];
      return x;
    }
    case Kind::GossipKron:
      return apply(y);  // symmetric
    case Kind::VStack: {
      Vector x = Vector::Zero(in_dim_);
      Index at = 0;
      for (const auto& c : children_) {
        x += c.adjoint(y.segment(at, c.out_dim()));
        at += c.out_dim();
      }
      return x;
    }
  }
  throw Error("LinOp::adjoint: unreachable");
}

Matrix LinOp::to_dense() const {
  Matrix m(out_dim_, in_dim_);
  Vector e = Vector::Zero(in_dim_);
  for (Index j = 0; j < in_dim_; ++j) {
    e[j] = 1.0;
    m.col(j) = apply(e);
    e[j] = 0.0;
  }
  return m;
}

namespace {

// Power iteration on a symmetric PSD map `gram`, stopping on the residual
// ||G v - rho v|| <= 0.1 * tol * rho so the Rayleigh quotient is within
// relative tol of the top eigenvalue even for clustered spectra.
std::pair<double, int> power_iteration(
    const std::function<Vector(const Vector&)>& gram, Index dim, double tol,
    int max_iter) {
  RngStream rs(0x5eedULL, 0);
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = rs.normal();
  double nv = v.norm();
  if (nv == 0.0) v[0] = 1.0; else v /= nv;
  double rho = 0.0;
  int it = 0;
  for (it = 1; it <= max_iter; ++it) {
    Vector w = gram(v);
    rho = v.dot(w);
    const double res = (w - rho * v).norm();
    if (res <= 0.1 * tol * std::max(rho, 1e-300)) break;
    const double nw = w.norm();
    if (nw == 0.0) return {0.0, it};  // v in the kernel of a rank-0 map
    v = w / nw;
  }
  return {std::max(rho, 0.0), std::min(it, max_iter)};
}

}  // namespace

SpectralInfo spectral_info(const LinOp& op, double tol, int max_iter,
                           Index dense_limit) {
  if (tol <= 0) throw Error("spectral_info: tol must be > 0");
  SpectralInfo info;
  info.tol = tol;

  if (max_iter == 0 && op.kind() == LinOp::Kind::VStack) {
    // Safe bound ||L||^2 <= sum_i ||L_i||^2; omega not computed.
    double sum = 0.0;
    for (const auto& c : op.children())
      sum += spectral_info(c, tol, 100000, dense_limit).op_norm_sq;
    info.op_norm_sq = sum;
    info.exact = false;
    return info;
  }

  const bool self = op.spectral_is_self();
  auto gram = [&](const Vector& v) {
    return self ? op.apply(v) : op.adjoint(op.apply(v));
  };
  auto [lam, iters] = power_iteration(gram, op.in_dim(), tol,
                                      max_iter > 0 ? max_iter : 100000);
  info.op_norm_sq = lam;
  info.iterations_used = iters;

  // Dense eigendecomposition for omega at desk scale. Gossip operators use
  // the N x N gossip matrix spectrum directly (Kron blocks share it).
  const Index eig_dim = self ? op.gossip_nodes() : op.in_dim();
  if (eig_dim <= dense_limit) {
    Matrix g;
    if (self) {
      g = op.gossip_matrix();
    } else {
      Matrix d = op.to_dense();
      g = d.transpose() * d;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
    const Vector& ev = eig.eigenvalues();
    const double lam_max = std::max(ev.maxCoeff(), 0.0);
    info.op_norm_sq = lam_max;  // exact at desk scale
    const double thresh = 1e-10 * lam_max;
    double omega = 0.0;
    bool found = false;
    for (Index i = 0; i < ev.size(); ++i) {
      if (ev[i] > thresh && (!found || ev[i] < omega)) {
        omega = ev[i];
        found = true;
      }
    }
    if (found) info.omega = omega;
  }
  return info;
}

}  // namespace pdsplit
