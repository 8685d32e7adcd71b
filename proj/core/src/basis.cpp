#include "vard/basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vard/error.hpp"

namespace vard {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDegenerateFeature: return "degenerate feature";
    case ErrorCode::kIllConditionedPenalty: return "ill-conditioned penalty";
    case ErrorCode::kEmptyBlock: return "empty block";
    case ErrorCode::kEmptyModel: return "empty model";
    case ErrorCode::kInconsistentState: return "inconsistent state";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kDegenerateFold: return "degenerate fold";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kMissingColumn: return "missing column";
    case ErrorCode::kUnknownCase: return "unknown case";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown error";
}

namespace basis {

namespace {

double cube_plus(double t) { return t > 0.0 ? t * t * t : 0.0; }
double pos(double t) { return t > 0.0 ? t : 0.0; }

}  // namespace

KnotSet place_knots(std::span<const double> x, int k) {
  if (k < 3) {
    throw Error(ErrorCode::kInvalidArgument, "knot count must be at least 3");
  }
  std::vector<double> sorted(x.begin(), x.end());
  if (!std::all_of(sorted.begin(), sorted.end(), [](double v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::kNonFinite, "feature column contains non-finite values");
  }
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> uniq = sorted;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::kDegenerateFeature,
                "feature has " + std::to_string(uniq.size()) +
                    " distinct values, fewer than the " + std::to_string(k) +
                    " knots requested");
  }

  const auto n = sorted.size();
  KnotSet out;
  out.knots.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double h = static_cast<double>(n - 1) * i / (k - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    double q = sorted[lo];
    if (lo + 1 < n) q += (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
    if (i == k - 1) q = sorted.back();
    if (out.knots.empty() || q > out.knots.back()) out.knots.push_back(q);
  }
  if (out.knots.size() < 3) {
    throw Error(ErrorCode::kDegenerateFeature,
                "only " + std::to_string(out.knots.size()) +
                    " distinct quantile knots remain after deduplication");
  }
  return out;
}

NaturalSplineBasis::NaturalSplineBasis(KnotSet knots) : knots_(std::move(knots)) {
  if (knots_.size() < 3) {
    throw Error(ErrorCode::kInvalidArgument, "natural spline basis needs at least 3 knots");
  }
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_.knots[i] > knots_.knots[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument, "knots must be strictly increasing");
    }
  }
  origin_ = knots_.front();
  span_ = knots_.back() - knots_.front();
  unit_knots_.reserve(knots_.size());
  for (double k : knots_.knots) unit_knots_.push_back((k - origin_) / span_);
  unit_knots_.back() = 1.0;
}

double NaturalSplineBasis::value(int k, double x) const {
  const double t = unit(x);
  const auto K = unit_knots_.size();
  const double tK = unit_knots_[K - 1];
  const double tail = cube_plus(t - tK);
  auto d = [&](std::size_t i) {
    return (cube_plus(t - unit_knots_[i]) - tail) / (tK - unit_knots_[i]);
  };
  return d(static_cast<std::size_t>(k)) - d(K - 2);
}

double NaturalSplineBasis::second_derivative(int k, double x) const {
  const double t = unit(x);
  const auto K = unit_knots_.size();
  const double tK = unit_knots_[K - 1];
  const double tail = pos(t - tK);
  auto d2 = [&](std::size_t i) {
    return 6.0 * (pos(t - unit_knots_[i]) - tail) / (tK - unit_knots_[i]);
  };
  // chain rule: d^2/dx^2 = (1/span^2) d^2/dt^2
  return (d2(static_cast<std::size_t>(k)) - d2(K - 2)) / (span_ * span_);
}

Eigen::MatrixXd NaturalSplineBasis::evaluate(std::span<const double> x) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(x.size()), dim());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (int k = 0; k < dim(); ++k) out(i, k) = value(k, x[static_cast<std::size_t>(i)]);
  }
  return out;
}

Eigen::MatrixXd NaturalSplineBasis::evaluate_second_derivative(std::span<const double> x) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(x.size()), dim());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (int k = 0; k < dim(); ++k) {
      out(i, k) = second_derivative(k, x[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

Eigen::MatrixXd RawBasis::evaluate_nonlinear(std::span<const double> x) const {
  Eigen::MatrixXd h = descriptor.evaluate(x);
  h.rowwise() -= column_means;
  return h;
}

Eigen::VectorXd RawBasis::evaluate_linear(std::span<const double> x) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(x.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out(i) = x[static_cast<std::size_t>(i)] - linear_mean;
  }
  return out;
}

RawBasis natural_cubic_basis(const KnotSet& knots, std::span<const double> x) {
  if (x.empty()) throw Error(ErrorCode::kInvalidArgument, "empty feature column");
  RawBasis raw;
  raw.descriptor = NaturalSplineBasis(knots);
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
  raw.linear_mean = xv.mean();
  raw.linear = xv.array() - raw.linear_mean;
  Eigen::MatrixXd h = raw.descriptor.evaluate(x);
  raw.column_means = h.colwise().mean();
  h.rowwise() -= raw.column_means;
  raw.nonlinear = std::move(h);
  return raw;
}

PenaltyMatrix penalty_from_piecewise_linear(std::span<const double> breaks,
                                            const Eigen::MatrixXd& left,
                                            const Eigen::MatrixXd& right) {
  const auto intervals = static_cast<Eigen::Index>(breaks.size()) - 1;
  if (intervals < 1 || left.rows() != intervals || right.rows() != intervals ||
      left.cols() != right.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "piecewise-linear penalty: shape mismatch");
  }
  const auto d = left.cols();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < intervals; ++i) {
    const double len = breaks[static_cast<std::size_t>(i) + 1] - breaks[static_cast<std::size_t>(i)];
    const auto a = left.row(i);
    const auto b = right.row(i);
    // integral of (a_p + (b_p - a_p) s)(a_q + (b_q - a_q) s) over s in [0, 1]
    S.noalias() += (len / 6.0) * (2.0 * a.transpose() * a + a.transpose() * b +
                                  b.transpose() * a + 2.0 * b.transpose() * b);
  }
  S = 0.5 * (S + S.transpose()).eval();
  return {std::move(S)};
}

PenaltyMatrix penalty_matrix(const NaturalSplineBasis& basis) {
  const auto& knots = basis.knots().knots;
  // Second derivatives are continuous and piecewise linear between knots.
  const Eigen::MatrixXd at_knots = basis.evaluate_second_derivative(knots);
  const auto intervals = static_cast<Eigen::Index>(knots.size()) - 1;
  return penalty_from_piecewise_linear(knots, at_knots.topRows(intervals),
                                       at_knots.bottomRows(intervals));
}

}  // namespace basis
}  // namespace vard
