#include <algorithm>
#include <cmath>
#include <set>

#include "vard/datakit.hpp"
#include "vard/error.hpp"

namespace vard::datakit {

CategoricalEncoder CategoricalEncoder::fit(const std::string& name, std::span<const std::string> labels) {
  const std::set<std::string> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    throw Error(ErrorCode::kDegenerateFeature, "categorical column '" + name + "' has fewer than 2 levels");
  }
  CategoricalEncoder enc;
  enc.name = name;
  enc.levels.assign(distinct.begin(), distinct.end());
  enc.means.assign(enc.levels.size(), 0.0);
  for (std::size_t l = 0; l < enc.levels.size(); ++l) {
    const auto hits = std::count(labels.begin(), labels.end(), enc.levels[l]);
    enc.means[l] = static_cast<double>(hits) / static_cast<double>(labels.size());
  }
  return enc;
}

std::vector<Eigen::MatrixXd> CategoricalEncoder::encode(std::span<const std::string> labels) const {
  const auto m = static_cast<Eigen::Index>(labels.size());
  std::vector<Eigen::MatrixXd> out;
  out.reserve(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    Eigen::MatrixXd col(m, 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      col(i, 0) = (labels[static_cast<std::size_t>(i)] == levels[l] ? 1.0 : 0.0) - means[l];
    }
    out.push_back(std::move(col));
  }
  return out;
}

std::vector<standardize::StandardizedTerm> encode_categorical(const CategoricalEncoder& encoder,
                                                              std::span<const std::string> labels) {
  std::vector<standardize::StandardizedTerm> terms;
  for (auto& col : encoder.encode(labels)) {
    terms.push_back(standardize::linear_term(col.col(0)));
  }
  return terms;
}

double NumericEncoder::feature_value(double raw) const {
  if (transform == ColumnTransform::kNone) return raw;
  if (!(raw > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "log transform of non-positive value in column '" + name + "'");
  }
  return std::log(raw);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> NumericEncoder::encode(std::span<const double> raw) const {
  std::vector<double> x(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i])) throw Error(ErrorCode::kNonFinite, "non-finite value in column '" + name + "'");
    x[i] = feature_value(raw[i]);
  }
  const basis::NaturalSplineBasis basis(knots);
  Eigen::MatrixXd H = basis.evaluate(x);
  H.rowwise() -= column_means;
  const Eigen::VectorXd lin =
      Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())).array() - linear_mean;
  Eigen::MatrixXd nl = standardize::apply_transform(nonlinear, standardize::BlockKind::kNonlinear, H, lin);
  return {std::move(nl), Eigen::MatrixXd(lin)};
}

Preprocessor::Preprocessor(std::vector<Feature> features, std::vector<NumericEncoder> numeric,
                           std::vector<CategoricalEncoder> categorical)
    : features_(std::move(features)), numeric_(std::move(numeric)), categorical_(std::move(categorical)) {
  build_layout();
}

void Preprocessor::build_layout() {
  const std::size_t q = numeric_.size();
  std::size_t next_level = 2 * q;
  layout_.assign(features_.size(), {});
  for (std::size_t f = 0; f < features_.size(); ++f) {
    const auto& feat = features_[f];
    if (feat.role == Role::kNumeric) {
      if (feat.encoder >= q) throw Error(ErrorCode::kInconsistentState, "numeric encoder index out of range");
      layout_[f].nonlinear = feat.encoder;
      layout_[f].linear = {q + feat.encoder};
    } else {
      if (feat.encoder >= categorical_.size()) {
        throw Error(ErrorCode::kInconsistentState, "categorical encoder index out of range");
      }
      for (std::size_t l = 0; l < categorical_[feat.encoder].levels.size(); ++l) {
        layout_[f].linear.push_back(next_level++);
      }
    }
  }
  block_count_ = next_level;
}

std::vector<Eigen::MatrixXd> Preprocessor::transform(const Dataset& data) const {
  if (data.features.size() != features_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset has " + std::to_string(data.features.size()) +
                                                   " features, model expects " + std::to_string(features_.size()));
  }
  std::vector<Eigen::MatrixXd> blocks(block_count_);
  for (std::size_t f = 0; f < features_.size(); ++f) {
    const auto& feat = features_[f];
    const auto& col = data.features[f];
    if (col.spec.name != feat.name) {
      throw Error(ErrorCode::kDimensionMismatch, "feature " + std::to_string(f) + " is '" + col.spec.name +
                                                     "', model expects '" + feat.name + "'");
    }
    if (feat.role == Role::kNumeric) {
      auto [nl, lin] = numeric_[feat.encoder].encode(col.values);
      blocks[*layout_[f].nonlinear] = std::move(nl);
      blocks[layout_[f].linear[0]] = std::move(lin);
    } else {
      auto cols = categorical_[feat.encoder].encode(col.labels);
      for (std::size_t l = 0; l < cols.size(); ++l) blocks[layout_[f].linear[l]] = std::move(cols[l]);
    }
  }
  return blocks;
}

std::vector<std::string> Preprocessor::block_names() const {
  std::vector<std::string> names(block_count_);
  for (std::size_t f = 0; f < features_.size(); ++f) {
    const auto& feat = features_[f];
    if (feat.role == Role::kNumeric) {
      names[*layout_[f].nonlinear] = feat.name + ":nonlinear";
      names[layout_[f].linear[0]] = feat.name + ":linear";
    } else {
      const auto& levels = categorical_[feat.encoder].levels;
      for (std::size_t l = 0; l < levels.size(); ++l) names[layout_[f].linear[l]] = feat.name + "=" + levels[l];
    }
  }
  return names;
}

std::optional<std::size_t> Preprocessor::find_feature(const std::string& name) const {
  for (std::size_t f = 0; f < features_.size(); ++f) {
    if (features_[f].name == name) return f;
  }
  return std::nullopt;
}

Design build_design(const Dataset& data) {
  if (data.response.size() != data.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "build_design needs a response column");
  }
  std::vector<Preprocessor::Feature> features;
  std::vector<NumericEncoder> numeric;
  std::vector<CategoricalEncoder> categorical;
  std::vector<standardize::StandardizedTerm> nonlinear_terms, linear_terms, level_terms;

  for (const auto& col : data.features) {
    Preprocessor::Feature feat;
    feat.name = col.spec.name;
    feat.role = col.spec.role;
    if (col.spec.role == Role::kNumeric) {
      NumericEncoder enc;
      enc.name = col.spec.name;
      enc.transform = col.spec.transform;
      std::vector<double> x(col.values.size());
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = enc.feature_value(col.values[i]);
      const auto [lo, hi] = std::minmax_element(col.values.begin(), col.values.end());
      enc.raw_min = *lo;
      enc.raw_max = *hi;
      try {
        enc.knots = basis::place_knots(x, col.spec.knot_count);
        const auto raw = basis::natural_cubic_basis(enc.knots, x);
        auto [nl, lin] = standardize::standardize_term(raw);
        enc.linear_mean = raw.linear_mean;
        enc.column_means = raw.column_means;
        enc.nonlinear = nl.transform;
        nonlinear_terms.push_back(std::move(nl));
        linear_terms.push_back(std::move(lin));
      } catch (const Error& e) {
        throw Error(e.code(), "feature '" + col.spec.name + "': " + e.what());
      }
      feat.encoder = numeric.size();
      numeric.push_back(std::move(enc));
    } else {
      auto enc = CategoricalEncoder::fit(col.spec.name, col.labels);
      for (auto& t : encode_categorical(enc, col.labels)) level_terms.push_back(std::move(t));
      feat.encoder = categorical.size();
      categorical.push_back(std::move(enc));
    }
    features.push_back(std::move(feat));
  }

  Design design;
  design.preprocessor = Preprocessor(std::move(features), std::move(numeric), std::move(categorical));
  auto& terms = design.problem.terms;
  terms.reserve(design.preprocessor.block_count());
  for (auto* group : {&nonlinear_terms, &linear_terms, &level_terms}) {
    for (auto& t : *group) terms.push_back(std::move(t));
  }
  const Eigen::Map<const Eigen::VectorXd> y(data.response.data(), static_cast<Eigen::Index>(data.rows()));
  design.problem.intercept = y.mean();
  design.problem.y = y.array() - design.problem.intercept;
  design.problem.features = design.preprocessor.layout();
  return design;
}

std::vector<double> block_norms(const solver::Problem& problem, const solver::FitResult& fit) {
  if (fit.blocks.size() != problem.blocks()) {
    throw Error(ErrorCode::kDimensionMismatch, "fit and problem have different block counts");
  }
  std::vector<double> norms(problem.blocks(), 0.0);
  for (std::size_t j = 0; j < norms.size(); ++j) {
    if (fit.blocks[j].is_zero()) continue;
    norms[j] = (problem.terms[j].v.array().sqrt() * fit.blocks[j].mu.array()).matrix().norm();
  }
  return norms;
}

modelselect::FoldBuilder fold_builder(const Dataset& data) {
  return [&data](std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows) {
    const Dataset train = data.subset(train_rows);
    const Dataset test = data.subset(test_rows);
    Design design = build_design(train);
    modelselect::FoldData fold;
    fold.test_blocks = design.preprocessor.transform(test);
    fold.test_y = Eigen::Map<const Eigen::VectorXd>(test.response.data(), static_cast<Eigen::Index>(test.rows()));
    fold.train = std::move(design.problem);
    return fold;
  };
}

modelselect::CvResult cross_validate(const Dataset& data, const modelselect::AlphaGrid& grid,
                                     const modelselect::CvOptions& options,
                                     const solver::FitConfig& config) {
  return modelselect::cross_validate(data.rows(), fold_builder(data), grid, options, config);
}

}  // namespace vard::datakit
