#include "vard/modelselect.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "vard/error.hpp"
#include "vard/parallel.hpp"

namespace vard::modelselect {

namespace {

// Unbiased draw in [0, bound) that does not depend on the standard library's
// distribution implementations.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % bound;
}

}  // namespace

AlphaGrid make_alpha_grid(double alpha_max, int count, double span_decades) {
  if (count < 2) throw Error(ErrorCode::kInvalidArgument, "alpha grid needs at least 2 points");
  if (!(alpha_max > 0.0)) {
    throw Error(ErrorCode::kEmptyModel, "alpha_max is zero: the response is orthogonal to the design");
  }
  if (!(span_decades > 0.0)) throw Error(ErrorCode::kInvalidArgument, "span_decades must be positive");
  const double hi = std::log10(alpha_max * 1.001);
  const double lo = std::log10(alpha_max) - span_decades;
  AlphaGrid grid;
  grid.alphas.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    grid.alphas[static_cast<std::size_t>(i)] = std::pow(10.0, lo + (hi - lo) * i / (count - 1));
  }
  grid.alphas.back() = alpha_max * 1.001;
  return grid;
}

AlphaGrid make_alpha_grid(const solver::Problem& problem, int count, double span_decades) {
  return make_alpha_grid(solver::alpha_max(problem.terms, problem.y), count, span_decades);
}

std::vector<solver::FitResult> path_fit(const solver::Problem& problem, const AlphaGrid& grid,
                                        const solver::FitConfig& config) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid.alphas[i] > grid.alphas[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument, "alpha grid must be strictly increasing");
    }
  }
  std::vector<solver::FitResult> out;
  out.reserve(grid.size());
  solver::FitConfig step = config;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    step.alpha = grid.alphas[i];
    if (out.empty()) {
      out.push_back(solver::fit(problem, step));
    } else {
      out.push_back(solver::fit(problem, step, out.back().blocks));
    }
  }
  return out;
}

solver::FitResult fit_via_path(const solver::Problem& problem, double alpha, const solver::FitConfig& config,
                               int count, double span_decades) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be positive");
  const AlphaGrid full = make_alpha_grid(problem, count, span_decades);
  AlphaGrid grid;
  for (const double a : full.alphas) {
    if (a < alpha) grid.alphas.push_back(a);
  }
  grid.alphas.push_back(alpha);
  return path_fit(problem, grid, config).back();
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 folds");
  const auto k = static_cast<std::size_t>(folds);
  if (n < k) throw Error(ErrorCode::kInvalidArgument, "fewer rows than folds");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[bounded(rng, i + 1)]);
  }

  std::vector<std::vector<std::size_t>> out(k);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                  order.begin() + static_cast<std::ptrdiff_t>(start + size));
    start += size;
  }
  return out;
}

void select_alphas(CvResult& result, const CvOptions& options) {
  const std::size_t m = result.grid.size();
  std::size_t best = 0;
  for (std::size_t i = 1; i < m; ++i) {
    if (result.mean_mse[i] <= result.mean_mse[best]) best = i;  // ties go to the larger alpha
  }
  double spread = result.sd_mse[best];
  if (options.spread == SpreadRule::kStandardError) {
    spread /= std::sqrt(static_cast<double>(result.folds));
  }
  const double limit = result.mean_mse[best] + options.se_multiplier * spread;
  std::size_t chosen = best;
  for (std::size_t i = m; i-- > best;) {
    if (result.mean_mse[i] <= limit) {
      chosen = i;
      break;
    }
  }
  result.index_min = best;
  result.index_se = chosen;
  result.alpha_min = result.grid.alphas[best];
  result.alpha_se = result.grid.alphas[chosen];
}

CvResult cross_validate(std::size_t n, const FoldBuilder& build, const AlphaGrid& grid,
                        const CvOptions& options, const solver::FitConfig& config) {
  if (grid.size() == 0) throw Error(ErrorCode::kInvalidArgument, "empty alpha grid");
  const auto folds = kfold_split(n, options.folds, options.seed);
  const auto k = folds.size();

  CvResult result;
  result.grid = grid;
  result.folds = options.folds;
  result.seed = options.seed;
  result.fold_mse.assign(k, std::vector<double>(grid.size(), 0.0));

  parallel_for(k, [&](std::size_t f) {
    std::vector<std::size_t> train;
    train.reserve(n - folds[f].size());
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
    }
    FoldData data;
    try {
      data = build(train, folds[f]);
    } catch (const Error& e) {
      throw Error(ErrorCode::kDegenerateFold,
                  "fold " + std::to_string(f + 1) + ": " + e.what());
    }
    const auto path = path_fit(data.train, grid, config);
    for (std::size_t i = 0; i < path.size(); ++i) {
      const Eigen::VectorXd yhat = solver::predict(path[i], data.test_blocks);
      result.fold_mse[f][i] = (data.test_y - yhat).squaredNorm() / static_cast<double>(data.test_y.size());
    }
  });

  result.mean_mse.assign(grid.size(), 0.0);
  result.sd_mse.assign(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double mean = 0.0;
    for (std::size_t f = 0; f < k; ++f) mean += result.fold_mse[f][i];
    mean /= static_cast<double>(k);
    double ss = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      const double dev = result.fold_mse[f][i] - mean;
      ss += dev * dev;
    }
    result.mean_mse[i] = mean;
    result.sd_mse[i] = std::sqrt(ss / static_cast<double>(k - 1));
  }
  select_alphas(result, options);
  return result;
}

}  // namespace vard::modelselect
