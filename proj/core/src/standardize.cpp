#include "vard/standardize.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "vard/error.hpp"

namespace vard::standardize {

namespace {

// Makes the first entry that is not negligible in each column positive.
void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    const double scale = vectors.col(c).cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      if (std::abs(vectors(r, c)) > 1e-12 * scale) {
        if (vectors(r, c) < 0.0) vectors.col(c) *= -1.0;
        break;
      }
    }
  }
}

}  // namespace

OrthogonalizedBasis orthogonalize_to_linear(const Eigen::MatrixXd& H, const Eigen::VectorXd& x) {
  if (H.rows() != x.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "orthogonalize_to_linear: row mismatch");
  }
  const double xx = x.squaredNorm();
  if (!(xx > 0.0)) {
    throw Error(ErrorCode::kDegenerateFeature, "linear column has zero norm");
  }
  OrthogonalizedBasis out;
  out.projection = (H.transpose() * x) / xx;
  out.H = H - x * out.projection.transpose();
  // One re-orthogonalization pass tightens <x, h_k> to rounding level.
  const Eigen::VectorXd correction = (out.H.transpose() * x) / xx;
  out.H -= x * correction.transpose();
  out.projection += correction;
  return out;
}

double penalty_floor(const Eigen::MatrixXd& S) {
  return 1e-10 * S.trace() / static_cast<double>(S.rows());
}

WhitenedBasis whiten_by_penalty(const Eigen::MatrixXd& H, const Eigen::MatrixXd& S,
                                FloorPolicy policy) {
  if (S.rows() != S.cols() || S.rows() != H.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "whiten_by_penalty: penalty shape mismatch");
  }
  const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double floor = penalty_floor(sym);

  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    if (values(k) > floor) {
      keep.push_back(k);
    } else if (policy == FloorPolicy::kThrow) {
      std::ostringstream msg;
      msg << "penalty eigenvalue " << values(k) << " is below the floor " << floor;
      throw Error(ErrorCode::kIllConditionedPenalty, msg.str());
    }
  }
  if (keep.empty()) {
    throw Error(ErrorCode::kIllConditionedPenalty, "penalty matrix has no usable directions");
  }

  WhitenedBasis out;
  const Eigen::MatrixXd& Q = eig.eigenvectors();
  if (static_cast<Eigen::Index>(keep.size()) == values.size()) {
    out.whitening = Q * values.cwiseSqrt().cwiseInverse().asDiagonal() * Q.transpose();
  } else {
    out.whitening.resize(S.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      out.whitening.col(static_cast<Eigen::Index>(i)) = Q.col(keep[i]) / std::sqrt(values(keep[i]));
    }
  }
  out.H = H * out.whitening;
  return out;
}

StandardizedTerm diagonalize_gram(const Eigen::MatrixXd& H) {
  const Eigen::MatrixXd gram = H.transpose() * H;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (gram + gram.transpose()));
  const auto d = H.cols();

  // Eigen returns ascending order; flip to descending.
  Eigen::MatrixXd U(d, d);
  Eigen::VectorXd values(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    U.col(k) = eig.eigenvectors().col(d - 1 - k);
    values(k) = eig.eigenvalues()(d - 1 - k);
  }
  fix_signs(U);

  StandardizedTerm term;
  term.kind = BlockKind::kNonlinear;
  term.Z = H * U;
  // Gram diagonal recomputed from Z so that v matches the stored columns.
  term.v = term.Z.colwise().squaredNorm().transpose();
  const double top = term.v.size() > 0 ? term.v.maxCoeff() : 0.0;
  for (Eigen::Index k = 0; k < term.v.size(); ++k) {
    if (values(k) <= 1e-12 * top) {
      term.v(k) = 0.0;
      term.Z.col(k).setZero();
      U.col(k).setZero();
    }
  }
  term.transform.whitening = Eigen::MatrixXd::Identity(d, d);
  term.transform.rotation = std::move(U);
  return term;
}

StandardizedTerm linear_term(const Eigen::VectorXd& centered) {
  StandardizedTerm term;
  term.kind = BlockKind::kLinear;
  term.Z = centered;
  term.v = Eigen::VectorXd::Constant(1, centered.squaredNorm());
  term.transform.whitening = Eigen::MatrixXd::Identity(1, 1);
  term.transform.rotation = Eigen::MatrixXd::Identity(1, 1);
  return term;
}

std::pair<StandardizedTerm, StandardizedTerm> standardize_term(const basis::RawBasis& raw) {
  const OrthogonalizedBasis orth = orthogonalize_to_linear(raw.nonlinear, raw.linear);
  // Subtracting multiples of x leaves second derivatives, hence S, unchanged.
  const basis::PenaltyMatrix penalty = basis::penalty_matrix(raw.descriptor);
  const WhitenedBasis white = whiten_by_penalty(orth.H, penalty.S, FloorPolicy::kDrop);
  StandardizedTerm nonlinear = diagonalize_gram(white.H);
  nonlinear.transform.projection = orth.projection;
  nonlinear.transform.whitening = white.whitening;
  return {std::move(nonlinear), linear_term(raw.linear)};
}

Eigen::MatrixXd apply_transform(const Transform& transform, BlockKind kind,
                                const Eigen::MatrixXd& raw_eval, const Eigen::VectorXd& linear) {
  if (kind == BlockKind::kLinear) return linear;
  if (raw_eval.rows() != linear.size() || raw_eval.cols() != transform.projection.size() ||
      transform.whitening.rows() != raw_eval.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "apply_transform: raw evaluation shape mismatch");
  }
  const Eigen::MatrixXd orth = raw_eval - linear * transform.projection.transpose();
  return (orth * transform.whitening) * transform.rotation;
}

Eigen::MatrixXd apply_transform(const StandardizedTerm& term, const Eigen::MatrixXd& raw_eval,
                                const Eigen::VectorXd& linear) {
  return apply_transform(term.transform, term.kind, raw_eval, linear);
}

}  // namespace vard::standardize
