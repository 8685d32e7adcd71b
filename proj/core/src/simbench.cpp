#include "vard/simbench.hpp"

#include <algorithm>
#include <optional>
#include <cmath>
#include <random>
#include <sstream>

#include "vard/error.hpp"
#include "vard/modelselect.hpp"
#include "vard/parallel.hpp"

namespace vard::simbench {

namespace {

// Sampling built on raw 64-bit draws so streams do not depend on the
// standard library's distribution implementations.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Marsaglia polar method; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::size_t class_index(solver::FeatureClass c) {
  for (std::size_t i = 0; i < kClassOrder.size(); ++i) {
    if (kClassOrder[i] == c) return i;
  }
  return 2;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::map<std::size_t, Assignment> assign(std::initializer_list<std::pair<std::size_t, Assignment>> items) {
  return {items.begin(), items.end()};
}

}  // namespace

double test_function(int id, double x) {
  switch (id) {
    case 1: return 10.0 * std::exp(-4.6 * x * x);
    case 2: return 4.0 * std::cos(1.7 * x);
    case 3: return 5.0 * (x + 1.3) * (x + 1.3);
    case 4: return 6.0 * (x + 5.0);
    default: throw Error(ErrorCode::kInvalidArgument, "unknown test function id " + std::to_string(id));
  }
}

void SyntheticSpec::validate() const {
  if (n == 0 || p == 0) throw Error(ErrorCode::kInvalidArgument, "n and p must be positive");
  if (!(sigma2 >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma2 must be non-negative");
  if (!(rho >= 0.0 && rho < 1.0)) throw Error(ErrorCode::kInvalidArgument, "rho must lie in [0, 1)");
  if (rho > 0.0 && marginal != Marginal::kNormal) {
    throw Error(ErrorCode::kInvalidArgument, "correlated features need the normal marginal");
  }
  for (const auto& [j, a] : assignments) {
    if (j < 1 || j > p) throw Error(ErrorCode::kInvalidArgument, "assignment index out of range");
    if (a.function < 1 || a.function > 4) throw Error(ErrorCode::kInvalidArgument, "unknown test function id");
  }
}

SyntheticData generate(const SyntheticSpec& spec) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto p = static_cast<Eigen::Index>(spec.p);
  Sampler rng(spec.seed);
  SyntheticData out;
  out.X.resize(n, p);
  out.f = Eigen::MatrixXd::Zero(n, p);
  out.y.resize(n);
  const double noise_sd = std::sqrt(spec.sigma2);
  const double a = std::sqrt(1.0 - spec.rho);
  const double b = std::sqrt(spec.rho);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (spec.marginal == Marginal::kUniform) {
      for (Eigen::Index j = 0; j < p; ++j) out.X(i, j) = rng.uniform(-1.0, 1.0);
    } else {
      for (Eigen::Index j = 0; j < p; ++j) out.X(i, j) = rng.normal();
      const double w = rng.normal();
      out.X.row(i) = a * out.X.row(i).array() + b * w;
    }
    double yi = 0.0;
    for (const auto& [j1, as] : spec.assignments) {
      const auto j = static_cast<Eigen::Index>(j1 - 1);
      out.f(i, j) = as.multiplier * test_function(as.function, out.X(i, j));
      yi += out.f(i, j);
    }
    out.y(i) = yi + noise_sd * rng.normal();
  }
  out.truth.assign(spec.p, solver::FeatureClass::kZero);
  for (const auto& [j1, as] : spec.assignments) {
    out.truth[j1 - 1] = as.function == 4 ? solver::FeatureClass::kLinear : solver::FeatureClass::kNonlinear;
  }
  return out;
}

datakit::TableSpec table_spec(std::size_t p, int knot_count) {
  datakit::TableSpec spec;
  for (std::size_t j = 0; j < p; ++j) {
    spec.columns.push_back({"x" + std::to_string(j + 1), datakit::Role::kNumeric, datakit::ColumnTransform::kNone,
                            knot_count});
  }
  spec.columns.push_back({"y", datakit::Role::kResponse, datakit::ColumnTransform::kNone, knot_count});
  return spec;
}

datakit::Dataset to_dataset(const SyntheticData& data, int knot_count) {
  datakit::Dataset out;
  out.row_count = static_cast<std::size_t>(data.X.rows());
  out.response_name = "y";
  out.response.assign(data.y.data(), data.y.data() + data.y.size());
  for (Eigen::Index j = 0; j < data.X.cols(); ++j) {
    datakit::FeatureColumn col;
    col.spec = {"x" + std::to_string(j + 1), datakit::Role::kNumeric, datakit::ColumnTransform::kNone, knot_count};
    col.values.resize(out.row_count);
    for (Eigen::Index i = 0; i < data.X.rows(); ++i) col.values[static_cast<std::size_t>(i)] = data.X(i, j);
    out.features.push_back(std::move(col));
  }
  return out;
}

Eigen::MatrixXd fitted_contributions(const solver::Problem& problem, const solver::FitResult& fit) {
  if (fit.blocks.size() != problem.blocks()) throw Error(ErrorCode::kDimensionMismatch, "fit/problem block mismatch");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(problem.rows(), static_cast<Eigen::Index>(problem.features.size()));
  for (std::size_t f = 0; f < problem.features.size(); ++f) {
    const auto& fb = problem.features[f];
    auto add = [&](std::size_t j) {
      if (!fit.blocks[j].is_zero()) out.col(static_cast<Eigen::Index>(f)) += problem.terms[j].Z * fit.blocks[j].mu;
    };
    if (fb.nonlinear) add(*fb.nonlinear);
    for (const auto j : fb.linear) add(j);
  }
  return out;
}

MetricReport evaluate(const solver::Problem& problem, const solver::FitResult& fit, const SyntheticData& data) {
  const auto p = static_cast<std::size_t>(data.f.cols());
  if (problem.features.size() != p || fit.classifications.size() != p || data.truth.size() != p ||
      problem.rows() != data.f.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "evaluate: fit and truth disagree on n or p");
  }
  const Eigen::MatrixXd fhat = fitted_contributions(problem, fit);
  const Eigen::MatrixXd truth_centered = data.f.rowwise() - data.f.colwise().mean();
  MetricReport report;
  report.in_sample_mse = (truth_centered - fhat).squaredNorm() / static_cast<double>(data.f.rows());

  int tp = 0, fp = 0, fn = 0;
  for (std::size_t j = 0; j < p; ++j) {
    const bool relevant = data.truth[j] != solver::FeatureClass::kZero;
    const bool selected = fit.classifications[j] != solver::FeatureClass::kZero;
    tp += relevant && selected;
    fp += !relevant && selected;
    fn += relevant && !selected;
    ++report.confusion[class_index(data.truth[j])][class_index(fit.classifications[j])];
  }
  report.fdr = static_cast<double>(fp) / std::max(1, fp + tp);
  report.tpr = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 1.0;
  return report;
}

SyntheticSpec catalog(int experiment, int case_id, std::uint64_t seed) {
  SyntheticSpec s;
  s.seed = seed;
  s.sigma2 = 1.0;
  const Assignment p1{1, 1.0}, p2{2, 1.0}, p3{3, 1.0}, p4{4, 1.0};
  auto scaled = [](Assignment a, double m) { return Assignment{a.function, m}; };

  if (experiment == 1) {
    switch (case_id) {
      case 1:
        s.n = 500, s.p = 10;
        s.assignments = assign({{2, p1}, {5, p2}, {7, p3}, {8, p4}});
        return s;
      case 2:
        s.n = 800, s.p = 15, s.sigma2 = 4.0;
        s.assignments = assign({{1, p1}, {2, scaled(p1, -1)}, {3, p2}, {4, scaled(p2, -1)},
                                {7, p3}, {11, scaled(p3, -1)}, {12, p4}, {13, scaled(p4, -1)}});
        return s;
      case 3:
        s.n = 500, s.p = 150;
        s.assignments = assign({{1, p2}, {4, p3}, {6, p4}});
        return s;
      case 4:
        s.n = 1000, s.p = 1000;
        s.assignments = assign({{10, p1}, {13, p2}, {18, p3}, {120, p4}});
        return s;
      case 5:
      case 6:
        s.n = 500, s.p = 30;
        s.marginal = Marginal::kNormal;
        s.rho = case_id == 5 ? 0.3 : 0.7;
        s.assignments = assign({{1, p1}, {3, p2}, {4, p3}, {5, p4}, {12, p1}, {20, p2},
                                {21, p3}, {23, p4}, {24, p1}, {25, p2}, {26, p3}, {28, p4}});
        return s;
      default: break;
    }
  } else if (experiment == 2) {
    switch (case_id) {
      case 1:
        s.n = 600, s.p = 18;
        s.assignments = assign({{2, p1}, {3, scaled(p1, 2)}, {5, p2}, {6, scaled(p2, 2)}, {8, p3},
                                {10, scaled(p3, 2)}, {11, p4}, {12, scaled(p4, 2)}, {14, scaled(p4, 3)},
                                {15, scaled(p4, -1)}, {17, scaled(p4, -2)}, {18, scaled(p4, -3)}});
        return s;
      case 2:
        s.n = 2000, s.p = 100;
        for (std::size_t k = 0; k < 25; ++k) {
          const double m = 1.0 + 4.0 * static_cast<double>(k) / 24.0;
          s.assignments[k + 1] = scaled(p1, m);
          s.assignments[k + 26] = scaled(p4, m);
        }
        return s;
      case 3:
        s.n = 1000, s.p = 1200;
        s.assignments = assign({{12, p1}, {123, p2}, {810, p3}, {90, scaled(p4, -1)},
                                {500, scaled(p4, -1)}, {811, scaled(p4, -1)}});
        return s;
      case 4:
      case 5:
        s.n = 600, s.p = 30;
        s.marginal = Marginal::kNormal;
        s.rho = case_id == 4 ? 0.3 : 0.7;
        for (std::size_t j = 21; j <= 25; ++j) s.assignments[j] = p3;
        for (std::size_t j = 26; j <= 30; ++j) s.assignments[j] = scaled(p3, -1);
        for (std::size_t j = 11; j <= 15; ++j) s.assignments[j] = p4;
        for (std::size_t j = 16; j <= 20; ++j) s.assignments[j] = scaled(p4, -1);
        return s;
      default: break;
    }
  }
  throw Error(ErrorCode::kUnknownCase,
              "unknown experiment/case " + std::to_string(experiment) + "/" + std::to_string(case_id));
}

std::uint64_t replicate_seed(std::uint64_t base, int r) {
  // splitmix64 finalizer over (base, r)
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(r + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

struct Selected {
  double alpha_min;
  double alpha_se;
};

Selected select_by_cv(const datakit::Dataset& data, const solver::Problem& problem, const ExperimentOptions& o,
                      std::uint64_t seed) {
  const auto grid = modelselect::make_alpha_grid(problem, o.grid_count, o.span_decades);
  modelselect::CvOptions cv;
  cv.folds = o.folds;
  cv.seed = seed;
  const auto result = datakit::cross_validate(data, grid, cv, o.config);
  return {result.alpha_min, result.alpha_se};
}

ReplicateResult run_replicate(const SyntheticSpec& spec, const ExperimentOptions& o,
                              const std::optional<Selected>& frozen) {
  const SyntheticData data = generate(spec);
  const datakit::Dataset dataset = to_dataset(data, spec.knot_count);
  const datakit::Design design = datakit::build_design(dataset);
  const Selected alphas = frozen ? *frozen : select_by_cv(dataset, design.problem, o, spec.seed);

  ReplicateResult r;
  r.alpha_min = alphas.alpha_min;
  r.alpha_se = alphas.alpha_se;
  const auto& problem = design.problem;
  r.at_min = evaluate(problem, modelselect::fit_via_path(problem, alphas.alpha_min, o.config, o.grid_count, o.span_decades),
                      data);
  r.at_se = evaluate(problem, modelselect::fit_via_path(problem, alphas.alpha_se, o.config, o.grid_count, o.span_decades),
                     data);
  return r;
}

}  // namespace

ExperimentReport run_experiment(int experiment, int case_id, const ExperimentOptions& options) {
  if (options.replicates < 1) throw Error(ErrorCode::kInvalidArgument, "replicates must be positive");
  ExperimentReport report;
  report.experiment = experiment;
  report.case_id = case_id;
  report.replicates.resize(static_cast<std::size_t>(options.replicates));

  auto spec_for = [&](int r) { return catalog(experiment, case_id, replicate_seed(options.seed, r)); };

  report.replicates[0] = run_replicate(spec_for(0), options, std::nullopt);
  const Selected frozen{report.replicates[0].alpha_min, report.replicates[0].alpha_se};
  parallel_for(static_cast<std::size_t>(options.replicates - 1), [&](std::size_t k) {
    const int r = static_cast<int>(k) + 1;
    report.replicates[k + 1] =
        run_replicate(spec_for(r), options, options.per_replicate_cv ? std::nullopt : std::optional(frozen));
  });
  return report;
}

std::string ExperimentReport::to_csv() const {
  std::ostringstream out;
  auto collect = [&](auto getter) {
    std::vector<double> v;
    for (const auto& r : replicates) v.push_back(getter(r));
    return v;
  };
  auto row = [&](const std::string& head, const std::vector<double>& v) {
    out << head << ',' << datakit::format_double(mean_of(v)) << ',' << datakit::format_double(sd_of(v)) << '\n';
  };
  if (experiment == 1) {
    out << "metric,mean,sd\n";
    row("mse_alpha_min", collect([](const ReplicateResult& r) { return r.at_min.in_sample_mse; }));
    row("mse_alpha_0.15se", collect([](const ReplicateResult& r) { return r.at_se.in_sample_mse; }));
    row("fdr_alpha_min", collect([](const ReplicateResult& r) { return r.at_min.fdr; }));
    row("fdr_alpha_0.15se", collect([](const ReplicateResult& r) { return r.at_se.fdr; }));
    row("tpr_alpha_min", collect([](const ReplicateResult& r) { return r.at_min.tpr; }));
    row("tpr_alpha_0.15se", collect([](const ReplicateResult& r) { return r.at_se.tpr; }));
    row("alpha_min", collect([](const ReplicateResult& r) { return r.alpha_min; }));
    row("alpha_0.15se", collect([](const ReplicateResult& r) { return r.alpha_se; }));
  } else {
    out << "truth,predicted,mean,sd\n";
    for (std::size_t t = 0; t < 3; ++t) {
      for (std::size_t p = 0; p < 3; ++p) {
        const auto v = collect([&](const ReplicateResult& r) { return static_cast<double>(r.at_se.confusion[t][p]); });
        row(std::string(solver::to_string(kClassOrder[t])) + "," + solver::to_string(kClassOrder[p]), v);
      }
    }
  }
  return out.str();
}

}  // namespace vard::simbench
