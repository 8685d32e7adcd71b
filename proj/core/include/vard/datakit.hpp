#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vard/basis.hpp"
#include "vard/modelselect.hpp"
#include "vard/solver.hpp"
#include "vard/standardize.hpp"

namespace vard::datakit {

enum class Role { kResponse, kNumeric, kCategorical, kExcluded };
enum class ColumnTransform { kNone, kLog };

struct ColumnSpec {
  std::string name;
  Role role = Role::kNumeric;
  ColumnTransform transform = ColumnTransform::kNone;
  int knot_count = 10;
};

/// Column roles for a table. Columns of the file that are not listed are excluded.
struct TableSpec {
  std::vector<ColumnSpec> columns;
  char delimiter = ',';

  const ColumnSpec& response() const;

  static TableSpec from_json(const std::string& text);
  static TableSpec load(const std::filesystem::path& path);
  std::string to_json() const;
};

/// Header plus raw string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC-4180 style reader: quoted fields, doubled quotes, CRLF or LF line ends.
CsvTable read_csv(std::istream& in, char delimiter = ',');

struct FeatureColumn {
  ColumnSpec spec;
  std::vector<double> values;       // numeric features, before any transform
  std::vector<std::string> labels;  // categorical features
};

struct Dataset {
  std::vector<FeatureColumn> features;
  std::string response_name;
  std::vector<double> response;  // empty when the table has no response column
  std::size_t row_count = 0;

  std::size_t rows() const noexcept { return row_count; }
  Dataset subset(std::span<const std::size_t> rows) const;
};

/// Types and validates the columns named in `spec`. Errors carry 1-based data row numbers.
Dataset make_dataset(const CsvTable& table, const TableSpec& spec, bool require_response = true);
Dataset load_table(const std::filesystem::path& path, const TableSpec& spec, bool require_response = true);

/// Centered indicator columns, one d = 1 block per level in lexicographic order.
struct CategoricalEncoder {
  std::string name;
  std::vector<std::string> levels;
  std::vector<double> means;

  static CategoricalEncoder fit(const std::string& name, std::span<const std::string> labels);
  std::vector<Eigen::MatrixXd> encode(std::span<const std::string> labels) const;
};

std::vector<standardize::StandardizedTerm> encode_categorical(const CategoricalEncoder& encoder,
                                                              std::span<const std::string> labels);

/// Everything needed to map a raw numeric column to its (nonlinear, linear) blocks.
struct NumericEncoder {
  std::string name;
  ColumnTransform transform = ColumnTransform::kNone;
  basis::KnotSet knots;
  double linear_mean = 0.0;
  Eigen::RowVectorXd column_means;
  standardize::Transform nonlinear;
  double raw_min = 0.0;
  double raw_max = 0.0;

  /// Applies the column transform (log or identity).
  double feature_value(double raw) const;
  /// {nonlinear block, linear block} at the given raw values.
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> encode(std::span<const double> raw) const;
};

/// Per-feature encoders and the block layout of the resulting design.
class Preprocessor {
 public:
  struct Feature {
    std::string name;
    Role role = Role::kNumeric;
    std::size_t encoder = 0;  // index into numeric() or categorical()
  };

  Preprocessor() = default;
  Preprocessor(std::vector<Feature> features, std::vector<NumericEncoder> numeric,
               std::vector<CategoricalEncoder> categorical);

  /// Design blocks at new rows, in the block order of the fitted problem.
  std::vector<Eigen::MatrixXd> transform(const Dataset& data) const;

  const std::vector<Feature>& features() const noexcept { return features_; }
  const std::vector<NumericEncoder>& numeric() const noexcept { return numeric_; }
  const std::vector<CategoricalEncoder>& categorical() const noexcept { return categorical_; }
  const std::vector<solver::FeatureBlocks>& layout() const noexcept { return layout_; }
  std::size_t block_count() const noexcept { return block_count_; }
  /// "NAME:nonlinear", "NAME:linear" or "NAME=level".
  std::vector<std::string> block_names() const;
  std::optional<std::size_t> find_feature(const std::string& name) const;

 private:
  void build_layout();

  std::vector<Feature> features_;
  std::vector<NumericEncoder> numeric_;
  std::vector<CategoricalEncoder> categorical_;
  std::vector<solver::FeatureBlocks> layout_;
  std::size_t block_count_ = 0;
};

struct Design {
  Preprocessor preprocessor;
  solver::Problem problem;
};

/**
 * Numeric features become (nonlinear, linear) block pairs via quantile
 * knots, natural splines and standardization; categorical features become
 * one linear-kind block per level. Blocks are ordered: all nonlinear blocks,
 * then numeric linear blocks, then categorical level blocks. The response is
 * centered and its mean kept as the intercept.
 */
Design build_design(const Dataset& data);

/// Self-contained fitted model; prediction needs no training data.
struct ModelArtifact {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  TableSpec spec;
  Preprocessor preprocessor;
  double alpha = 0.0;
  double intercept = 0.0;
  std::vector<double> r2;
  std::vector<Eigen::VectorXd> mu;
  std::vector<solver::FeatureClass> classifications;
  double train_rss = 0.0;
  std::size_t train_rows = 0;

  static ModelArtifact from_fit(const TableSpec& spec, const Design& design,
                                const solver::FitResult& fit);

  Eigen::VectorXd predict(const Dataset& data) const;

  std::string to_json() const;
  static ModelArtifact from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static ModelArtifact load(const std::filesystem::path& path);
};

struct CurvePoint {
  double x = 0.0;
  double value = 0.0;
};

/// Fitted contribution of one numeric feature on `points` evenly spaced raw values over its training range.
std::vector<CurvePoint> feature_curve(const ModelArtifact& model, const std::string& feature, int points);

struct LevelEffect {
  std::string level;
  double value = 0.0;
};

/// Fitted contribution of each level of a categorical feature.
std::vector<LevelEffect> level_effects(const ModelArtifact& model, const std::string& feature);

/// Per-block ||sqrt(v) * mu||_2: coefficients rescaled as if Z_j^T Z_j were the identity.
std::vector<double> block_norms(const solver::Problem& problem, const solver::FitResult& fit);

/// Fold preprocessing from training rows only. Holds a reference to `data`.
modelselect::FoldBuilder fold_builder(const Dataset& data);

/// Cross-validation that rebuilds the full preprocessing on each training fold.
modelselect::CvResult cross_validate(const Dataset& data, const modelselect::AlphaGrid& grid,
                                     const modelselect::CvOptions& options,
                                     const solver::FitConfig& config);

/// 17 significant digits, "0" for zero.
std::string format_double(double value);

/// Writes through a temporary file in the same directory, then renames.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace vard::datakit
