#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "vard/standardize.hpp"

namespace vard::solver {

/**
 * Variational state of one block: prior variance r2, variational mean mu and
 * the diagonal of the variational covariance. r2 == 0 exactly means the
 * block is a point mass at zero, in which case mu and phi are exactly zero.
 */
struct BlockState {
  double r2 = 0.0;
  Eigen::VectorXd mu;
  Eigen::VectorXd phi;

  bool is_zero() const noexcept { return r2 == 0.0; }

  static BlockState zero(Eigen::Index dim) {
    return {0.0, Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim)};
  }
};

struct FitConfig {
  double alpha = 1.0;             // consolidated tuning parameter (KL weight times noise variance)
  int grid_points_per_dim = 1000;
  double rel_tol = 1e-6;          // RSS change threshold relative to ||y - mean(y)||^2
  int max_sweeps = 1000;
  bool active_set = true;
};

enum class FeatureClass { kZero, kLinear, kNonlinear };

const char* to_string(FeatureClass c) noexcept;

/// Which blocks belong to one input feature.
struct FeatureBlocks {
  std::optional<std::size_t> nonlinear;
  std::vector<std::size_t> linear;  // one entry for numeric features, one per level for categorical
};

/// Standardized design plus centered response.
struct Problem {
  std::vector<standardize::StandardizedTerm> terms;
  Eigen::VectorXd y;
  double intercept = 0.0;
  std::vector<FeatureBlocks> features;

  std::size_t blocks() const noexcept { return terms.size(); }
  Eigen::Index rows() const noexcept { return y.size(); }

  /// Layout for terms ordered as p nonlinear blocks followed by p linear blocks.
  static std::vector<FeatureBlocks> paired_layout(std::size_t p);
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct FitResult {
  std::vector<BlockState> blocks;
  double intercept = 0.0;
  double alpha = 0.0;
  double objective = 0.0;
  double rss = 0.0;
  int sweeps_used = 0;
  bool converged = false;
  std::vector<FeatureClass> classifications;
};

/// sum_k alpha log(v_k r2 + alpha) - eta_k^2 r2 / (v_k r2 + alpha), over coordinates with v_k > 0.
double univariate_G(double r2, double alpha, std::span<const double> eta, std::span<const double> v);

/// Analytic derivative of one summand of univariate_G with respect to r2.
double univariate_g_derivative(double r2, double alpha, double eta, double v);

/**
 * Bracket [l, u] that contains every global minimizer of univariate_G:
 * l = min_k ((eta_k^2 - alpha v_k) / v_k^2)_+, u = the corresponding max.
 * Coordinates with v_k == 0 are skipped; throws kEmptyBlock if none remain.
 */
Interval interval_bounds(double alpha, std::span<const double> eta, std::span<const double> v);

/**
 * Global minimizer of univariate_G over r2 >= 0. Collapsed brackets return
 * l directly; otherwise the exact minimum over a uniform grid of
 * grid_points_per_dim * d points on [l, u] (both ends included) is found by
 * branch and bound, compared with the per-coordinate stationary points, and
 * the most promising grid cells are polished by bisection on G'. Ties resolve
 * toward the smaller r2.
 */
double minimize_G(double alpha, std::span<const double> eta, std::span<const double> v,
                  int grid_points_per_dim);

/// Closed-form block optimum given eta = Z_j^T y_(-j).
BlockState block_update(std::span<const double> eta, std::span<const double> v, double alpha,
                        const FitConfig& config);

/// Blocks plus the running residual y - sum_j Z_j mu_j.
struct FitState {
  std::vector<BlockState> blocks;
  Eigen::VectorXd residual;
  int sweeps = 0;
};

FitState initial_state(const Problem& problem);
FitState initial_state(const Problem& problem, std::span<const BlockState> warm);

/// Recomputes the residual from scratch.
void refresh_residual(FitState& state, const Problem& problem);

/// Optimizes block j with all other blocks fixed; the residual is updated in place.
void update_block(FitState& state, const Problem& problem, std::size_t j, const FitConfig& config);

/// One pass over all blocks in index order.
void sweep(FitState& state, const Problem& problem, const FitConfig& config);

/**
 * Variational objective
 *   (1/alpha) {||y - sum Z_j mu_j||^2 + sum_j tr(Phi_j V_j)}
 *   + sum_j {d_j log r_j^2 - log det Phi_j + (||mu_j||^2 + tr Phi_j) / r_j^2 - d_j}.
 * The trailing -d_j makes each bracket twice the Gaussian KL divergence, so a
 * point-mass block contributes exactly 0. Coordinates with v == 0 are ignored.
 * Throws kInconsistentState when r2 > 0 but some active phi is not positive.
 */
double objective(std::span<const BlockState> blocks, const Problem& problem, double alpha);

FitResult fit(const Problem& problem, const FitConfig& config,
              std::span<const BlockState> warm_start = {});

/// max over blocks and coordinates with v > 0 of (Z_j^T y)_k^2 / v_k.
double alpha_max(std::span<const standardize::StandardizedTerm> terms, const Eigen::VectorXd& y);

std::vector<FeatureClass> classify(std::span<const BlockState> blocks,
                                   std::span<const FeatureBlocks> features);

/// intercept + sum_j Z_j mu_j, with `new_blocks` in the same block order as the fit.
Eigen::VectorXd predict(const FitResult& fit, std::span<const Eigen::MatrixXd> new_blocks);

}  // namespace vard::solver
