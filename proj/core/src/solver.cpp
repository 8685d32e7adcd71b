#include "vard/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "vard/error.hpp"

namespace vard::solver {

namespace {

constexpr int kRefreshEvery = 50;
constexpr int kPolishedCells = 8;
constexpr int kBisections = 64;

// Active coordinates of a block (v_k > 0) packed contiguously.
struct Coordinates {
  Eigen::ArrayXd eta2;
  Eigen::ArrayXd v;
};

Coordinates active_coordinates(std::span<const double> eta, std::span<const double> v) {
  if (eta.size() != v.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "eta and v lengths differ");
  }
  Eigen::Index count = 0;
  for (double vk : v) count += vk > 0.0 ? 1 : 0;
  Coordinates c{Eigen::ArrayXd(count), Eigen::ArrayXd(count)};
  Eigen::Index i = 0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] > 0.0) {
      c.eta2(i) = eta[k] * eta[k];
      c.v(i) = v[k];
      ++i;
    }
  }
  return c;
}

double G_at(double r2, double alpha, const Coordinates& c) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < c.v.size(); ++k) {
    const double denom = c.v(k) * r2 + alpha;
    total += alpha * std::log(denom) - c.eta2(k) * r2 / denom;
  }
  return total;
}

// Lower bound of G on [a, b] given G(a). Each summand falls until its own
// stationary point t_k and rises after it, so evaluating it at t_k clamped
// into [a, b] bounds it from below. Separately, G(a) plus the most negative
// slope times (b - a) bounds G from below; the larger bound is returned.
double G_lower_bound(double a, double b, double G_a, double alpha, const Coordinates& c,
                     const Eigen::ArrayXd& t) {
  double clamped = 0.0;
  double slope = 0.0;
  for (Eigen::Index k = 0; k < c.v.size(); ++k) {
    const double x = std::clamp(t(k), a, b);
    const double denom = c.v(k) * x + alpha;
    clamped += alpha * std::log(denom) - c.eta2(k) * x / denom;
    const double edge = c.v(k) * (a < t(k) ? a : b) + alpha;
    slope += alpha * c.v(k) * c.v(k) * (a - t(k)) / (edge * edge);
  }
  return std::max(clamped, G_a + std::min(0.0, slope) * (b - a));
}

struct Candidate {
  double r2;
  double value;
};

bool better(const Candidate& a, const Candidate& b) {
  return a.value < b.value || (a.value == b.value && a.r2 < b.r2);
}

double G_slope(double r2, double alpha, const Coordinates& c, const Eigen::ArrayXd& t) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < c.v.size(); ++k) {
    const double denom = c.v(k) * r2 + alpha;
    total += alpha * c.v(k) * c.v(k) * (r2 - t(k)) / (denom * denom);
  }
  return total;
}

// Local minimizer of G inside one grid cell: an endpoint when G is monotone
// there, otherwise the sign change of G' located by bisection.
Candidate polish_cell(double lo, double hi, double alpha, const Coordinates& c, const Eigen::ArrayXd& t) {
  if (G_slope(lo, alpha, c, t) >= 0.0) return {lo, G_at(lo, alpha, c)};
  if (G_slope(hi, alpha, c, t) <= 0.0) return {hi, G_at(hi, alpha, c)};
  for (int it = 0; it < kBisections; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (G_slope(mid, alpha, c, t) < 0.0 ? lo : hi) = mid;
  }
  const Candidate left{lo, G_at(lo, alpha, c)};
  const Candidate right{hi, G_at(hi, alpha, c)};
  return better(right, left) ? right : left;
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::kNonFinite, std::string(what) + " contains non-finite values");
  }
}

bool has_active(const Eigen::VectorXd& v) { return (v.array() > 0.0).any(); }

}  // namespace

const char* to_string(FeatureClass c) noexcept {
  switch (c) {
    case FeatureClass::kZero: return "zero";
    case FeatureClass::kLinear: return "linear";
    case FeatureClass::kNonlinear: return "nonlinear";
  }
  return "unknown";
}

std::vector<FeatureBlocks> Problem::paired_layout(std::size_t p) {
  std::vector<FeatureBlocks> out(p);
  for (std::size_t j = 0; j < p; ++j) {
    out[j].nonlinear = j;
    out[j].linear = {p + j};
  }
  return out;
}

double univariate_G(double r2, double alpha, std::span<const double> eta,
                    std::span<const double> v) {
  return G_at(r2, alpha, active_coordinates(eta, v));
}

double univariate_g_derivative(double r2, double alpha, double eta, double v) {
  const double denom = v * r2 + alpha;
  return alpha * (v * v * r2 - (eta * eta - alpha * v)) / (denom * denom);
}

Interval interval_bounds(double alpha, std::span<const double> eta, std::span<const double> v) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be positive");
  if (eta.size() != v.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "eta and v lengths differ");
  }
  Interval out{std::numeric_limits<double>::infinity(), 0.0};
  bool any = false;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!(v[k] > 0.0)) continue;
    any = true;
    const double t = std::max(0.0, (eta[k] * eta[k] - alpha * v[k]) / (v[k] * v[k]));
    out.lower = std::min(out.lower, t);
    out.upper = std::max(out.upper, t);
  }
  if (!any) throw Error(ErrorCode::kEmptyBlock, "block has no coordinate with positive Gram entry");
  return out;
}

double minimize_G(double alpha, std::span<const double> eta, std::span<const double> v,
                  int grid_points_per_dim) {
  const Interval bracket = interval_bounds(alpha, eta, v);
  if (bracket.lower == bracket.upper) return bracket.lower;

  const Coordinates c = active_coordinates(eta, v);
  const double l = bracket.lower;
  const double u = bracket.upper;
  const auto points = std::max<Eigen::Index>(
      2, static_cast<Eigen::Index>(grid_points_per_dim) * static_cast<Eigen::Index>(v.size()));
  const double step = (u - l) / static_cast<double>(points - 1);
  const auto at = [&](Eigen::Index i) { return i == points - 1 ? u : l + step * static_cast<double>(i); };

  Eigen::ArrayXd t(c.v.size());
  for (Eigen::Index k = 0; k < c.v.size(); ++k) t(k) = (c.eta2(k) - alpha * c.v(k)) / (c.v(k) * c.v(k));

  // Exact grid argmin by branch and bound over index ranges; ranges whose
  // lower bound exceeds the incumbent cannot hold the argmin.
  Candidate best{l, G_at(l, alpha, c)};
  const auto slack = [&] { return 1e-12 * (1.0 + std::abs(best.value)); };
  struct Range {
    Eigen::Index i0, i1;
    double G0;
  };
  struct Cell {
    Eigen::Index left;
    double bound;
  };
  std::vector<Cell> cells;
  std::vector<Range> stack{{0, points - 1, best.value}};
  while (!stack.empty()) {
    const Range r = stack.back();
    stack.pop_back();
    const double bound = G_lower_bound(at(r.i0), at(r.i1), r.G0, alpha, c, t);
    if (bound > best.value + slack()) continue;
    if (r.i1 - r.i0 == 1) {
      const Candidate right{at(r.i1), G_at(at(r.i1), alpha, c)};
      if (better(right, best)) best = right;
      cells.push_back({r.i0, bound});
      continue;
    }
    const Eigen::Index mid = r.i0 + (r.i1 - r.i0) / 2;
    const double G_mid = G_at(at(mid), alpha, c);
    const Candidate middle{at(mid), G_mid};
    if (better(middle, best)) best = middle;
    // Lower-index half on top of the stack: visited first.
    stack.push_back({mid, r.i1, G_mid});
    stack.push_back({r.i0, mid, r.G0});
  }

  // Stationary points of single summands are frequent minimizers of G.
  for (Eigen::Index k = 0; k < c.v.size(); ++k) {
    if (t(k) > l && t(k) < u) {
      const Candidate here{t(k), G_at(t(k), alpha, c)};
      if (better(here, best)) best = here;
    }
  }

  // Polish the cells that may still hold a value below the incumbent.
  std::sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) { return x.bound < y.bound; });
  int polished = 0;
  for (const Cell& cell : cells) {
    if (polished == kPolishedCells || cell.bound >= best.value) break;
    const Candidate p = polish_cell(at(cell.left), at(cell.left + 1), alpha, c, t);
    if (better(p, best)) best = p;
    ++polished;
  }
  return best.r2;
}

BlockState block_update(std::span<const double> eta, std::span<const double> v, double alpha,
                        const FitConfig& config) {
  const auto d = static_cast<Eigen::Index>(v.size());
  const double r2 = minimize_G(alpha, eta, v, config.grid_points_per_dim);
  BlockState out = BlockState::zero(d);
  if (r2 == 0.0) return out;
  out.r2 = r2;
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto i = static_cast<std::size_t>(k);
    if (!(v[i] > 0.0)) continue;
    const double denom = v[i] * r2 + alpha;
    out.mu(k) = eta[i] * r2 / denom;
    out.phi(k) = alpha * r2 / denom;
  }
  return out;
}

FitState initial_state(const Problem& problem) {
  FitState state;
  state.blocks.reserve(problem.blocks());
  for (const auto& term : problem.terms) state.blocks.push_back(BlockState::zero(term.dim()));
  state.residual = problem.y;
  return state;
}

FitState initial_state(const Problem& problem, std::span<const BlockState> warm) {
  if (warm.empty()) return initial_state(problem);
  if (warm.size() != problem.blocks()) {
    throw Error(ErrorCode::kDimensionMismatch, "warm start has the wrong number of blocks");
  }
  FitState state;
  state.blocks.assign(warm.begin(), warm.end());
  for (std::size_t j = 0; j < warm.size(); ++j) {
    if (state.blocks[j].mu.size() != problem.terms[j].dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "warm start block dimension mismatch");
    }
  }
  refresh_residual(state, problem);
  return state;
}

void refresh_residual(FitState& state, const Problem& problem) {
  state.residual = problem.y;
  for (std::size_t j = 0; j < problem.blocks(); ++j) {
    if (!state.blocks[j].is_zero()) state.residual.noalias() -= problem.terms[j].Z * state.blocks[j].mu;
  }
}

void update_block(FitState& state, const Problem& problem, std::size_t j, const FitConfig& config) {
  const auto& term = problem.terms[j];
  BlockState& block = state.blocks[j];
  if (!has_active(term.v)) return;

  const bool was_zero = block.is_zero();
  if (!was_zero) state.residual.noalias() += term.Z * block.mu;
  const Eigen::VectorXd eta = term.Z.transpose() * state.residual;
  block = block_update(std::span<const double>(eta.data(), static_cast<std::size_t>(eta.size())),
                       std::span<const double>(term.v.data(), static_cast<std::size_t>(term.v.size())),
                       config.alpha, config);
  if (!block.is_zero()) state.residual.noalias() -= term.Z * block.mu;
}

void sweep(FitState& state, const Problem& problem, const FitConfig& config) {
  for (std::size_t j = 0; j < problem.blocks(); ++j) update_block(state, problem, j, config);
  ++state.sweeps;
  if (state.sweeps % kRefreshEvery == 0) refresh_residual(state, problem);
}

double objective(std::span<const BlockState> blocks, const Problem& problem, double alpha) {
  if (blocks.size() != problem.blocks()) {
    throw Error(ErrorCode::kDimensionMismatch, "objective: block count mismatch");
  }
  Eigen::VectorXd residual = problem.y;
  double trace_term = 0.0;
  double kl_term = 0.0;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const BlockState& b = blocks[j];
    const auto& term = problem.terms[j];
    if (b.is_zero()) continue;
    residual.noalias() -= term.Z * b.mu;
    for (Eigen::Index k = 0; k < term.v.size(); ++k) {
      if (!(term.v(k) > 0.0)) continue;
      if (!(b.phi(k) > 0.0)) {
        throw Error(ErrorCode::kInconsistentState,
                    "block " + std::to_string(j) + " has r2 > 0 with a non-positive phi");
      }
      trace_term += b.phi(k) * term.v(k);
      kl_term += std::log(b.r2) - std::log(b.phi(k)) + (b.mu(k) * b.mu(k) + b.phi(k)) / b.r2 - 1.0;
    }
  }
  return (residual.squaredNorm() + trace_term) / alpha + kl_term;
}

std::vector<FeatureClass> classify(std::span<const BlockState> blocks,
                                   std::span<const FeatureBlocks> features) {
  std::vector<FeatureClass> out;
  out.reserve(features.size());
  for (const auto& f : features) {
    if (f.nonlinear && !blocks[*f.nonlinear].is_zero()) {
      out.push_back(FeatureClass::kNonlinear);
      continue;
    }
    const bool any_linear = std::any_of(f.linear.begin(), f.linear.end(),
                                        [&](std::size_t j) { return !blocks[j].is_zero(); });
    out.push_back(any_linear ? FeatureClass::kLinear : FeatureClass::kZero);
  }
  return out;
}

FitResult fit(const Problem& problem, const FitConfig& config, std::span<const BlockState> warm_start) {
  if (!(config.alpha > 0.0) || !std::isfinite(config.alpha)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must be positive and finite");
  }
  require_finite(problem.y, "response");
  for (const auto& term : problem.terms) {
    if (term.rows() != problem.rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "term row count differs from the response");
    }
    require_finite(term.Z, "design block");
  }

  FitState state = initial_state(problem, warm_start);
  const double tol = config.rel_tol * problem.y.squaredNorm();
  double rss_prev = state.residual.squaredNorm();
  bool converged = false;

  auto rss_change = [&] {
    const double rss = state.residual.squaredNorm();
    const double change = std::abs(rss - rss_prev);
    rss_prev = rss;
    return change;
  };
  auto zero_pattern = [&] {
    std::vector<bool> pattern(state.blocks.size());
    for (std::size_t j = 0; j < pattern.size(); ++j) pattern[j] = state.blocks[j].is_zero();
    return pattern;
  };

  if (!config.active_set) {
    while (state.sweeps < config.max_sweeps) {
      sweep(state, problem, config);
      if (rss_change() <= tol) {
        converged = true;
        break;
      }
    }
  } else {
    std::vector<std::size_t> active;
    while (state.sweeps < config.max_sweeps) {
      const auto before = zero_pattern();
      sweep(state, problem, config);
      const double change = rss_change();
      if (change <= tol && zero_pattern() == before) {
        converged = true;
        break;
      }
      active.clear();
      for (std::size_t j = 0; j < state.blocks.size(); ++j) {
        if (!state.blocks[j].is_zero()) active.push_back(j);
      }
      while (state.sweeps < config.max_sweeps) {
        for (std::size_t j : active) update_block(state, problem, j, config);
        ++state.sweeps;
        if (state.sweeps % kRefreshEvery == 0) refresh_residual(state, problem);
        if (rss_change() <= tol) break;
      }
    }
  }

  refresh_residual(state, problem);
  FitResult result;
  result.blocks = std::move(state.blocks);
  result.intercept = problem.intercept;
  result.alpha = config.alpha;
  result.rss = state.residual.squaredNorm();
  result.sweeps_used = state.sweeps;
  result.converged = converged;
  result.objective = objective(result.blocks, problem, config.alpha);
  result.classifications = classify(result.blocks, problem.features);
  return result;
}

double alpha_max(std::span<const standardize::StandardizedTerm> terms, const Eigen::VectorXd& y) {
  double best = 0.0;
  bool any = false;
  for (const auto& term : terms) {
    if (term.rows() != y.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "alpha_max: term row count differs from y");
    }
    const Eigen::VectorXd eta = term.Z.transpose() * y;
    for (Eigen::Index k = 0; k < term.v.size(); ++k) {
      if (!(term.v(k) > 0.0)) continue;
      any = true;
      best = std::max(best, eta(k) * eta(k) / term.v(k));
    }
  }
  if (!any) throw Error(ErrorCode::kEmptyModel, "design has no column with positive norm");
  return best;
}

Eigen::VectorXd predict(const FitResult& fit, std::span<const Eigen::MatrixXd> new_blocks) {
  if (new_blocks.size() != fit.blocks.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "predict: block count mismatch");
  }
  const Eigen::Index m = new_blocks.empty() ? 0 : new_blocks.front().rows();
  Eigen::VectorXd out = Eigen::VectorXd::Constant(m, fit.intercept);
  for (std::size_t j = 0; j < new_blocks.size(); ++j) {
    const auto& Z = new_blocks[j];
    if (Z.rows() != m || Z.cols() != fit.blocks[j].mu.size()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "predict: block " + std::to_string(j) + " has the wrong shape");
    }
    if (!fit.blocks[j].is_zero()) out.noalias() += Z * fit.blocks[j].mu;
  }
  return out;
}

}  // namespace vard::solver
