#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdsplit/types.hpp"

namespace pdsplit {

/// Spectral quantities of a linear operator that enter the stepsize rules:
/// `op_norm_sq` is the largest eigenvalue of L*L and `omega` the smallest
/// positive one. For gossip operators both refer to the gossip matrix itself,
/// which plays the role of the Gram matrix of the implicit constraint map.
struct SpectralInfo {
  double op_norm_sq = 0.0;
  std::optional<double> omega;  // unset when the operator has rank zero
  double tol = 0.0;
  int iterations_used = 0;
  bool exact = true;  // false when op_norm_sq is only an upper bound

  double omega_or_throw() const {
    if (!omega) throw Error("spectral_info: rank zero, omega undefined");
    return *omega;
  }
};

/// Linear operator with structured forward/adjoint application. Structured
/// kinds are never densified in the apply paths; `to_dense` exists for
/// desk-scale spectral computations and oracles.
class LinOp {
 public:
  enum class Kind {
    Identity,
    Zero,
    Dense,
    FirstDifference,
    GroupSelector,
    GossipKron,
    VStack,
  };

  static LinOp identity(Index n);
  static LinOp zero(Index in_dim, Index out_dim);
  static LinOp dense(Matrix m);
  /// D in R^{(p-1) x p} with D(i,i) = 1, D(i,i+1) = -1.
  static LinOp first_difference(Index p);
  /// Stack of row selectors: x -> (x[G_1], ..., x[G_m]). Groups may overlap.
  static LinOp group_selector(std::vector<std::vector<Index>> groups, Index p);
  /// W = What (x) I_d for a gossip matrix What (symmetric PSD, ones-kernel).
  static LinOp gossip_kron(Matrix what, Index block_dim);
  static LinOp vstack(std::vector<LinOp> children);

  /// Row per line, comma-separated decimals.
  static LinOp dense_from_csv(const std::string& path);

  Kind kind() const { return kind_; }
  Index in_dim() const { return in_dim_; }
  Index out_dim() const { return out_dim_; }

  Vector apply(const Vector& x) const;
  Vector adjoint(const Vector& y) const;

  Matrix to_dense() const;

  /// True when spectral quantities describe the operator matrix itself
  /// rather than L*L (gossip kinds, by convention: the stepsize conditions
  /// for decentralized runs use ||W|| and omega(W)).
  bool spectral_is_self() const { return kind_ == Kind::GossipKron; }

  const Matrix& matrix() const;  // Dense payload
  const Matrix& gossip_matrix() const;
  Index gossip_block_dim() const { return block_dim_; }
  Index gossip_nodes() const;
  const std::vector<std::vector<Index>>& groups() const { return groups_; }
  const std::vector<LinOp>& children() const { return children_; }

  LinOp() = default;  // Identity on the empty space; reassign before use

 private:
  Kind kind_ = Kind::Identity;
  Index in_dim_ = 0;
  Index out_dim_ = 0;
  Matrix mat_;                               // Dense / GossipKron payload
  std::vector<std::vector<Index>> groups_;   // GroupSelector
  Index block_dim_ = 0;                      // GossipKron
  std::vector<LinOp> children_;              // VStack
};

/// Largest (and smallest positive) eigenvalue of L*L. `op_norm_sq` comes
/// from matrix-free power iteration to relative `tol`; `omega` from a dense
/// eigendecomposition when in_dim <= dense_limit (rank threshold
/// 1e-10 * op_norm_sq), and is left unset above that size.
/// max_iter == 0 requests the cheap VStack sum bound instead of iterating.
SpectralInfo spectral_info(const LinOp& op, double tol = 1e-9,
                           int max_iter = 100000, Index dense_limit = 500);

}  // namespace pdsplit
