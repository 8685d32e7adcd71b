#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace vard::basis {

/// Strictly increasing knot locations taken from one training column.
struct KnotSet {
  std::vector<double> knots;

  std::size_t size() const noexcept { return knots.size(); }
  double front() const { return knots.front(); }
  double back() const { return knots.back(); }
};

/**
 * Empirical quantiles of `x` at probabilities i/(k-1), i = 0..k-1, using
 * linear interpolation between order statistics. Tied quantiles are merged,
 * so the result may hold fewer than `k` knots.
 *
 * Throws ErrorCode::kDegenerateFeature when `x` has fewer than `k` distinct
 * values or fewer than three knots survive deduplication.
 */
KnotSet place_knots(std::span<const double> x, int k);

/**
 * Natural cubic spline basis without its constant and linear directions.
 *
 * With K knots the basis has K-2 functions
 *   N_k(t) = d_k(t) - d_{K-1}(t),
 *   d_k(t) = ((t - t_k)_+^3 - (t - t_K)_+^3) / (t_K - t_k),
 * evaluated in the unit coordinate t = (x - knot_1) / (knot_K - knot_1).
 * Each function is linear outside [knot_1, knot_K].
 */
class NaturalSplineBasis {
 public:
  NaturalSplineBasis() = default;
  explicit NaturalSplineBasis(KnotSet knots);

  const KnotSet& knots() const noexcept { return knots_; }
  int dim() const noexcept { return static_cast<int>(knots_.size()) - 2; }

  double value(int k, double x) const;
  double second_derivative(int k, double x) const;

  /// m x dim matrix of uncentered basis values.
  Eigen::MatrixXd evaluate(std::span<const double> x) const;
  /// m x dim matrix of second derivatives with respect to x.
  Eigen::MatrixXd evaluate_second_derivative(std::span<const double> x) const;

 private:
  double unit(double x) const { return (x - origin_) / span_; }

  KnotSet knots_;
  std::vector<double> unit_knots_;
  double origin_ = 0.0;
  double span_ = 1.0;
};

/// Training-time evaluation of a feature's basis plus the centering it used.
struct RawBasis {
  Eigen::VectorXd linear;        // x - mean(x)
  Eigen::MatrixXd nonlinear;     // H with training column means removed
  double linear_mean = 0.0;
  Eigen::RowVectorXd column_means;
  NaturalSplineBasis descriptor;

  /// Basis columns at new points, centered by the stored training means.
  Eigen::MatrixXd evaluate_nonlinear(std::span<const double> x) const;
  Eigen::VectorXd evaluate_linear(std::span<const double> x) const;
};

RawBasis natural_cubic_basis(const KnotSet& knots, std::span<const double> x);

struct PenaltyMatrix {
  Eigen::MatrixXd S;
};

/**
 * Exact Gram matrix of piecewise-linear functions: entry (a, b) is the
 * integral over [breaks.front(), breaks.back()] of f_a(x) f_b(x). Row i of
 * `left` and `right` holds the function values at the start and end of
 * interval [breaks[i], breaks[i+1]], so jumps at breakpoints are allowed.
 */
PenaltyMatrix penalty_from_piecewise_linear(std::span<const double> breaks,
                                            const Eigen::MatrixXd& left,
                                            const Eigen::MatrixXd& right);

/// Roughness penalty [integral of h_a''(x) h_b''(x) dx] for the basis.
PenaltyMatrix penalty_matrix(const NaturalSplineBasis& basis);

}  // namespace vard::basis
