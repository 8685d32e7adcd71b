#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include <json.hpp>

#include "vard/datakit.hpp"
#include "vard/error.hpp"

namespace vard::datakit {

namespace {

using nlohmann::json;

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

Eigen::VectorXd vector_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index cols_if_empty) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : cols_if_empty;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error(ErrorCode::kParse, "ragged matrix in model file");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

solver::FeatureClass class_from(const std::string& s) {
  if (s == "zero") return solver::FeatureClass::kZero;
  if (s == "linear") return solver::FeatureClass::kLinear;
  if (s == "nonlinear") return solver::FeatureClass::kNonlinear;
  throw Error(ErrorCode::kParse, "unknown classification '" + s + "'");
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ModelArtifact ModelArtifact::from_fit(const TableSpec& spec, const Design& design, const solver::FitResult& fit) {
  if (fit.blocks.size() != design.problem.blocks()) {
    throw Error(ErrorCode::kDimensionMismatch, "fit does not match the design");
  }
  ModelArtifact model;
  model.spec = spec;
  model.preprocessor = design.preprocessor;
  model.alpha = fit.alpha;
  model.intercept = fit.intercept;
  model.classifications = fit.classifications;
  model.train_rss = fit.rss;
  model.train_rows = static_cast<std::size_t>(design.problem.rows());
  for (const auto& b : fit.blocks) {
    model.r2.push_back(b.r2);
    model.mu.push_back(b.mu);
  }
  return model;
}

Eigen::VectorXd ModelArtifact::predict(const Dataset& data) const {
  const auto blocks = preprocessor.transform(data);
  if (blocks.size() != mu.size()) throw Error(ErrorCode::kInconsistentState, "model block count mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(data.rows()), intercept);
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (r2[j] == 0.0) continue;
    out.noalias() += blocks[j] * mu[j];
  }
  return out;
}

std::string ModelArtifact::to_json() const {
  json doc;
  doc["format"] = "vard-model";
  doc["format_version"] = format_version;
  doc["spec"] = json::parse(spec.to_json());
  doc["alpha"] = alpha;
  doc["intercept"] = intercept;
  doc["train_rss"] = train_rss;
  doc["train_rows"] = train_rows;

  json features = json::array();
  for (std::size_t f = 0; f < preprocessor.features().size(); ++f) {
    const auto& feat = preprocessor.features()[f];
    json jf;
    jf["name"] = feat.name;
    jf["classification"] = solver::to_string(classifications.at(f));
    if (feat.role == Role::kNumeric) {
      const auto& enc = preprocessor.numeric()[feat.encoder];
      jf["role"] = "numeric";
      jf["transform"] = enc.transform == ColumnTransform::kLog ? "log" : "none";
      jf["knots"] = enc.knots.knots;
      jf["linear_mean"] = enc.linear_mean;
      jf["column_means"] = vector_json(enc.column_means.transpose());
      jf["projection"] = vector_json(enc.nonlinear.projection);
      jf["whitening"] = matrix_json(enc.nonlinear.whitening);
      jf["rotation"] = matrix_json(enc.nonlinear.rotation);
      jf["raw_min"] = enc.raw_min;
      jf["raw_max"] = enc.raw_max;
    } else {
      const auto& enc = preprocessor.categorical()[feat.encoder];
      jf["role"] = "categorical";
      jf["levels"] = enc.levels;
      jf["means"] = enc.means;
    }
    features.push_back(std::move(jf));
  }
  doc["features"] = std::move(features);

  const auto names = preprocessor.block_names();
  json blocks = json::array();
  for (std::size_t j = 0; j < mu.size(); ++j) {
    blocks.push_back({{"name", names.at(j)}, {"r2", r2[j]}, {"mu", vector_json(mu[j])}});
  }
  doc["blocks"] = std::move(blocks);
  return doc.dump(2) + "\n";
}

ModelArtifact ModelArtifact::from_json(const std::string& text) {
  ModelArtifact model;
  try {
    const json doc = json::parse(text);
    if (doc.value("format", std::string()) != "vard-model") {
      throw Error(ErrorCode::kParse, "not a vard model file");
    }
    model.format_version = doc.at("format_version").get<int>();
    if (model.format_version != kFormatVersion) {
      throw Error(ErrorCode::kParse, "unsupported model format version " + std::to_string(model.format_version));
    }
    model.spec = TableSpec::from_json(doc.at("spec").dump());
    model.alpha = doc.at("alpha").get<double>();
    model.intercept = doc.at("intercept").get<double>();
    model.train_rss = doc.at("train_rss").get<double>();
    model.train_rows = doc.at("train_rows").get<std::size_t>();

    std::vector<Preprocessor::Feature> features;
    std::vector<NumericEncoder> numeric;
    std::vector<CategoricalEncoder> categorical;
    for (const auto& jf : doc.at("features")) {
      Preprocessor::Feature feat;
      feat.name = jf.at("name").get<std::string>();
      model.classifications.push_back(class_from(jf.at("classification").get<std::string>()));
      const auto role = jf.at("role").get<std::string>();
      if (role == "numeric") {
        NumericEncoder enc;
        enc.name = feat.name;
        enc.transform = jf.at("transform").get<std::string>() == "log" ? ColumnTransform::kLog : ColumnTransform::kNone;
        enc.knots.knots = jf.at("knots").get<std::vector<double>>();
        enc.linear_mean = jf.at("linear_mean").get<double>();
        enc.column_means = vector_from(jf.at("column_means")).transpose();
        enc.nonlinear.projection = vector_from(jf.at("projection"));
        enc.nonlinear.whitening = matrix_from(jf.at("whitening"), 0);
        enc.nonlinear.rotation = matrix_from(jf.at("rotation"), 0);
        enc.raw_min = jf.at("raw_min").get<double>();
        enc.raw_max = jf.at("raw_max").get<double>();
        feat.role = Role::kNumeric;
        feat.encoder = numeric.size();
        numeric.push_back(std::move(enc));
      } else if (role == "categorical") {
        CategoricalEncoder enc;
        enc.name = feat.name;
        enc.levels = jf.at("levels").get<std::vector<std::string>>();
        enc.means = jf.at("means").get<std::vector<double>>();
        if (enc.levels.size() != enc.means.size()) throw Error(ErrorCode::kParse, "levels and means differ in length");
        feat.role = Role::kCategorical;
        feat.encoder = categorical.size();
        categorical.push_back(std::move(enc));
      } else {
        throw Error(ErrorCode::kParse, "unknown feature role '" + role + "' in model file");
      }
      features.push_back(std::move(feat));
    }
    model.preprocessor = Preprocessor(std::move(features), std::move(numeric), std::move(categorical));

    for (const auto& jb : doc.at("blocks")) {
      model.r2.push_back(jb.at("r2").get<double>());
      model.mu.push_back(vector_from(jb.at("mu")));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model file: ") + e.what());
  }
  if (model.mu.size() != model.preprocessor.block_count()) {
    throw Error(ErrorCode::kParse, "model file: block count does not match the feature layout");
  }
  return model;
}

void ModelArtifact::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json()); }

ModelArtifact ModelArtifact::load(const std::filesystem::path& path) { return from_json(read_all(path)); }

std::vector<CurvePoint> feature_curve(const ModelArtifact& model, const std::string& feature, int points) {
  if (points < 2) throw Error(ErrorCode::kInvalidArgument, "curve needs at least 2 points");
  const auto f = model.preprocessor.find_feature(feature);
  if (!f) throw Error(ErrorCode::kMissingColumn, "model has no feature '" + feature + "'");
  const auto& feat = model.preprocessor.features()[*f];
  if (feat.role != Role::kNumeric) {
    throw Error(ErrorCode::kInvalidArgument, "feature '" + feature + "' is categorical; use level effects");
  }
  const auto& enc = model.preprocessor.numeric()[feat.encoder];
  const auto& layout = model.preprocessor.layout()[*f];
  std::vector<double> xs(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    xs[static_cast<std::size_t>(i)] = enc.raw_min + (enc.raw_max - enc.raw_min) * i / (points - 1);
  }
  xs.back() = enc.raw_max;
  const auto [nl, lin] = enc.encode(xs);
  Eigen::VectorXd value = Eigen::VectorXd::Zero(points);
  const std::size_t jn = *layout.nonlinear;
  const std::size_t jl = layout.linear[0];
  if (model.r2[jn] != 0.0) value += nl * model.mu[jn];
  if (model.r2[jl] != 0.0) value += lin * model.mu[jl];
  std::vector<CurvePoint> out(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) out[static_cast<std::size_t>(i)] = {xs[static_cast<std::size_t>(i)], value(i)};
  return out;
}

std::vector<LevelEffect> level_effects(const ModelArtifact& model, const std::string& feature) {
  const auto f = model.preprocessor.find_feature(feature);
  if (!f) throw Error(ErrorCode::kMissingColumn, "model has no feature '" + feature + "'");
  const auto& feat = model.preprocessor.features()[*f];
  if (feat.role != Role::kCategorical) throw Error(ErrorCode::kInvalidArgument, "feature '" + feature + "' is numeric");
  const auto& enc = model.preprocessor.categorical()[feat.encoder];
  const auto& blocks = model.preprocessor.layout()[*f].linear;
  std::vector<LevelEffect> out;
  for (std::size_t l = 0; l < enc.levels.size(); ++l) {
    double value = 0.0;
    for (std::size_t k = 0; k < enc.levels.size(); ++k) {
      const double coef = model.r2[blocks[k]] != 0.0 ? model.mu[blocks[k]](0) : 0.0;
      value += coef * ((k == l ? 1.0 : 0.0) - enc.means[k]);
    }
    out.push_back({enc.levels[l], value});
  }
  return out;
}

std::string format_double(double value) {
  if (value == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  const auto tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCode::kIo, "write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot move output into place: " + path.string());
  }
}

}  // namespace vard::datakit
