#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vard/datakit.hpp"
#include "vard/solver.hpp"

namespace vard::simbench {

/// phi_1(x) = 10 exp(-4.6 x^2), phi_2(x) = 4 cos(1.7 x), phi_3(x) = 5 (x + 1.3)^2, phi_4(x) = 6 (x + 5).
double test_function(int id, double x);

enum class Marginal { kUniform, kNormal };

struct Assignment {
  int function = 1;  // 1..4
  double multiplier = 1.0;
};

struct SyntheticSpec {
  std::size_t n = 0;
  std::size_t p = 0;
  double sigma2 = 1.0;
  std::map<std::size_t, Assignment> assignments;  // 1-based feature index; absent means zero
  Marginal marginal = Marginal::kUniform;
  double rho = 0.0;  // equicorrelation, normal marginal only
  std::uint64_t seed = 1;
  int knot_count = 10;

  void validate() const;
};

struct SyntheticData {
  Eigen::MatrixXd X;            // n x p
  Eigen::VectorXd y;            // uncentered
  Eigen::MatrixXd f;            // n x p true contributions multiplier * phi(x_ij)
  std::vector<solver::FeatureClass> truth;
};

/**
 * Seeded draw. Uniform rows are i.i.d. U(-1, 1); normal rows are
 * sqrt(1 - rho) z + sqrt(rho) w 1 with z ~ N(0, I) and scalar w ~ N(0, 1).
 * y_i = sum_j f_ij + eps_i with eps_i ~ N(0, sigma2).
 */
SyntheticData generate(const SyntheticSpec& spec);

/// Features named x1..xp (numeric, `knot_count` knots) plus response y.
datakit::Dataset to_dataset(const SyntheticData& data, int knot_count);
datakit::TableSpec table_spec(std::size_t p, int knot_count);

/// Confusion order for rows (truth) and columns (prediction).
inline constexpr std::array<solver::FeatureClass, 3> kClassOrder = {
    solver::FeatureClass::kNonlinear, solver::FeatureClass::kLinear, solver::FeatureClass::kZero};

struct MetricReport {
  double in_sample_mse = 0.0;
  double fdr = 0.0;
  double tpr = 0.0;
  std::array<std::array<int, 3>, 3> confusion{};  // [truth][predicted] in kClassOrder
};

/// Per-feature fitted contributions at the training rows (n x p, one column per feature).
Eigen::MatrixXd fitted_contributions(const solver::Problem& problem, const solver::FitResult& fit);

/**
 * In-sample MSE (1/n) sum_i sum_j (f_ij - fhat_ij)^2 after centering each
 * true column by its sample mean; FDR = FP / max(1, FP + TP); TPR = TP / (TP + FN),
 * taken as 1 when there are no true positives.
 */
MetricReport evaluate(const solver::Problem& problem, const solver::FitResult& fit, const SyntheticData& data);

/// Hard-coded experiment cases (experiment 1: cases 1-6, experiment 2: cases 1-5).
SyntheticSpec catalog(int experiment, int case_id, std::uint64_t seed = 1);

struct ExperimentOptions {
  int replicates = 100;
  std::uint64_t seed = 1;
  bool per_replicate_cv = false;
  int folds = 10;
  int grid_count = 100;
  double span_decades = 6.0;
  solver::FitConfig config;
};

struct ReplicateResult {
  double alpha_min = 0.0;
  double alpha_se = 0.0;
  MetricReport at_min;
  MetricReport at_se;
};

struct ExperimentReport {
  int experiment = 0;
  int case_id = 0;
  std::vector<ReplicateResult> replicates;

  /// Experiment 1: metric,mean,sd. Experiment 2: truth,predicted,mean,sd at alpha_0.15se.
  std::string to_csv() const;
};

/// Seed of replicate r (0-based) derived from the base seed.
std::uint64_t replicate_seed(std::uint64_t base, int r);

/**
 * Generates each replicate, runs cross-validation on the first one and keeps
 * its alpha_min and alpha_0.15se for the rest (unless per_replicate_cv), fits
 * at both values and evaluates.
 */
ExperimentReport run_experiment(int experiment, int case_id, const ExperimentOptions& options);

}  // namespace vard::simbench
