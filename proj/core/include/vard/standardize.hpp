#pragma once

#include <utility>

#include <Eigen/Core>

#include "vard/basis.hpp"

namespace vard::standardize {

enum class BlockKind { kNonlinear, kLinear };

/**
 * Composite map from centered raw basis evaluations to block coordinates:
 *   Z = (H - x * projection^T) * whitening * rotation.
 * `projection` is empty for linear blocks.
 */
struct Transform {
  Eigen::VectorXd projection;
  Eigen::MatrixXd whitening;
  Eigen::MatrixXd rotation;
};

/// One design block with a diagonal Gram matrix Z^T Z = diag(v).
struct StandardizedTerm {
  Eigen::MatrixXd Z;
  Eigen::VectorXd v;
  BlockKind kind = BlockKind::kNonlinear;
  Transform transform;

  Eigen::Index dim() const noexcept { return Z.cols(); }
  Eigen::Index rows() const noexcept { return Z.rows(); }
};

struct OrthogonalizedBasis {
  Eigen::MatrixXd H;
  Eigen::VectorXd projection;  // <x, h_k> / ||x||^2 per column
};

/// Removes each column's projection onto the centered linear column `x`.
OrthogonalizedBasis orthogonalize_to_linear(const Eigen::MatrixXd& H, const Eigen::VectorXd& x);

enum class FloorPolicy {
  kThrow,  // ErrorCode::kIllConditionedPenalty names the offending eigenvalue
  kDrop,   // directions below the floor are removed from the block
};

struct WhitenedBasis {
  Eigen::MatrixXd H;
  Eigen::MatrixXd whitening;  // d_in x d_out; symmetric S^{-1/2} when nothing is dropped
};

/// Eigenvalue floor used by whiten_by_penalty: 1e-10 * trace(S) / d.
double penalty_floor(const Eigen::MatrixXd& S);

WhitenedBasis whiten_by_penalty(const Eigen::MatrixXd& H, const Eigen::MatrixXd& S,
                                FloorPolicy policy = FloorPolicy::kThrow);

/**
 * Rotates H onto the eigenvectors of H^T H. Eigenvalues are sorted in
 * descending order and each eigenvector's first non-negligible entry is
 * positive. The returned term has an identity whitening and empty projection.
 */
StandardizedTerm diagonalize_gram(const Eigen::MatrixXd& H);

/// Orthogonalize, whiten and diagonalize one feature. Returns {nonlinear, linear}.
std::pair<StandardizedTerm, StandardizedTerm> standardize_term(const basis::RawBasis& raw);

/// Linear block: Z is the centered column itself.
StandardizedTerm linear_term(const Eigen::VectorXd& centered);

/**
 * Maps centered raw basis values at new points into block coordinates.
 * For linear blocks `raw_eval` is ignored and the centered column is used.
 */
Eigen::MatrixXd apply_transform(const StandardizedTerm& term, const Eigen::MatrixXd& raw_eval,
                                const Eigen::VectorXd& linear);
Eigen::MatrixXd apply_transform(const Transform& transform, BlockKind kind,
                                const Eigen::MatrixXd& raw_eval, const Eigen::VectorXd& linear);

}  // namespace vard::standardize
