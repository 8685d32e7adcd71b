#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "vard/solver.hpp"

namespace vard::modelselect {

/// Strictly increasing candidate values of alpha.
struct AlphaGrid {
  std::vector<double> alphas;

  std::size_t size() const noexcept { return alphas.size(); }
};

/// `count` log-evenly spaced values from alpha_max * 10^-span_decades to alpha_max * 1.001.
AlphaGrid make_alpha_grid(double alpha_max, int count = 100, double span_decades = 6.0);
AlphaGrid make_alpha_grid(const solver::Problem& problem, int count = 100, double span_decades = 6.0);

/// Fits in ascending alpha, each fit warm-started from the previous solution.
std::vector<solver::FitResult> path_fit(const solver::Problem& problem, const AlphaGrid& grid,
                                        const solver::FitConfig& config);

/**
 * Fit at `alpha` warm-started through the values of the problem's own grid
 * that lie below it, i.e. the solution path_fit would reach at `alpha`.
 */
solver::FitResult fit_via_path(const solver::Problem& problem, double alpha, const solver::FitConfig& config,
                               int count = 100, double span_decades = 6.0);

/// Seeded shuffle of 0..n-1 cut into `folds` contiguous chunks whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, int folds, std::uint64_t seed);

enum class SpreadRule {
  kStandardDeviation,  // sd of the fold MSEs
  kStandardError,      // sd / sqrt(folds)
};

struct CvOptions {
  int folds = 10;
  std::uint64_t seed = 1;
  double se_multiplier = 0.15;
  SpreadRule spread = SpreadRule::kStandardDeviation;
};

struct CvResult {
  AlphaGrid grid;
  std::vector<double> mean_mse;
  std::vector<double> sd_mse;
  std::vector<std::vector<double>> fold_mse;  // [fold][alpha]
  int folds = 0;
  std::uint64_t seed = 0;
  std::size_t index_min = 0;
  std::size_t index_se = 0;
  double alpha_min = 0.0;
  double alpha_se = 0.0;  // the 0.15-spread choice with default options
};

/// Training problem and held-out blocks for one fold, built from training rows only.
struct FoldData {
  solver::Problem train;
  std::vector<Eigen::MatrixXd> test_blocks;
  Eigen::VectorXd test_y;
};

using FoldBuilder =
    std::function<FoldData(std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows)>;

/**
 * k-fold cross-validation over `grid`. Each fold's preprocessing is delegated
 * to `build`, which must derive every statistic from the training rows.
 * alpha_min is the argmin of the mean held-out MSE (ties toward larger
 * alpha); alpha_se is the largest alpha whose mean is within
 * se_multiplier * spread(alpha_min) of the minimum.
 */
CvResult cross_validate(std::size_t n, const FoldBuilder& build, const AlphaGrid& grid,
                        const CvOptions& options, const solver::FitConfig& config);

/// Selection step of cross_validate, exposed for reuse on precomputed fold errors.
void select_alphas(CvResult& result, const CvOptions& options);

}  // namespace vard::modelselect
