// Command-line front end: fit, path, cv, predict, curves, simulate.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "vard/datakit.hpp"
#include "vard/error.hpp"
#include "vard/modelselect.hpp"
#include "vard/simbench.hpp"
#include "vard/solver.hpp"

namespace {

using namespace vard;
using datakit::format_double;

struct SolverFlags {
  int grid_points = 1000;
  double tol = 1e-6;
  int max_sweeps = 1000;

  solver::FitConfig config(double alpha = 1.0) const {
    solver::FitConfig c;
    c.alpha = alpha;
    c.grid_points_per_dim = grid_points;
    c.rel_tol = tol;
    c.max_sweeps = max_sweeps;
    return c;
  }
};

void add_solver_flags(CLI::App* cmd, SolverFlags& flags) {
  cmd->add_option("--grid-points", flags.grid_points, "Grid points per block dimension for the r^2 search")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tol", flags.tol, "Convergence threshold on RSS change relative to ||y||^2")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-sweeps", flags.max_sweeps, "Sweep limit per fit")->check(CLI::PositiveNumber);
}

void report_fit(const datakit::ModelArtifact& model) {
  std::cout << "alpha " << format_double(model.alpha) << "  rss " << format_double(model.train_rss) << '\n';
  for (std::size_t f = 0; f < model.preprocessor.features().size(); ++f) {
    std::cout << "  " << model.preprocessor.features()[f].name << ": "
              << solver::to_string(model.classifications[f]) << '\n';
  }
}

datakit::ModelArtifact fit_model(const datakit::TableSpec& spec, const datakit::Dataset& data,
                                 const solver::FitConfig& config) {
  const auto design = datakit::build_design(data);
  const auto result = solver::fit(design.problem, config);
  if (!result.converged) {
    std::cerr << "vard: warning: fit stopped after " << result.sweeps_used << " sweeps without converging\n";
  }
  return datakit::ModelArtifact::from_fit(spec, design, result);
}

int run_fit(const std::string& data_path, const std::string& spec_path, double alpha, const std::string& out,
            const SolverFlags& flags) {
  const auto spec = datakit::TableSpec::load(spec_path);
  const auto data = datakit::load_table(data_path, spec);
  const auto model = fit_model(spec, data, flags.config(alpha));
  model.save(out);
  report_fit(model);
  return 0;
}

int run_path(const std::string& data_path, const std::string& spec_path, int count, double span,
             const std::string& out, const SolverFlags& flags) {
  const auto spec = datakit::TableSpec::load(spec_path);
  const auto data = datakit::load_table(data_path, spec);
  const auto design = datakit::build_design(data);
  const auto grid = modelselect::make_alpha_grid(design.problem, count, span);
  const auto path = modelselect::path_fit(design.problem, grid, flags.config());

  std::ostringstream csv;
  csv << "alpha";
  for (const auto& name : design.preprocessor.block_names()) csv << ',' << name;
  csv << '\n';
  for (std::size_t i = 0; i < path.size(); ++i) {
    csv << format_double(grid.alphas[i]);
    for (const double norm : datakit::block_norms(design.problem, path[i])) csv << ',' << format_double(norm);
    csv << '\n';
  }
  datakit::write_file_atomic(out, csv.str());
  std::cout << "wrote " << path.size() << " alpha values to " << out << '\n';
  return 0;
}

int run_cv(const std::string& data_path, const std::string& spec_path, int folds, std::uint64_t seed, int count,
           double span, bool standard_error, const std::string& out, const std::string& model_out,
           const SolverFlags& flags) {
  const auto spec = datakit::TableSpec::load(spec_path);
  const auto data = datakit::load_table(data_path, spec);
  const auto design = datakit::build_design(data);
  const auto grid = modelselect::make_alpha_grid(design.problem, count, span);
  modelselect::CvOptions options;
  options.folds = folds;
  options.seed = seed;
  if (standard_error) options.spread = modelselect::SpreadRule::kStandardError;
  const auto cv = datakit::cross_validate(data, grid, options, flags.config());

  std::ostringstream csv;
  csv << "alpha,mean_mse,sd_mse,selected\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::string tag;
    if (i == cv.index_min) tag = "min";
    if (i == cv.index_se) tag += tag.empty() ? "0.15se" : "+0.15se";
    csv << format_double(grid.alphas[i]) << ',' << format_double(cv.mean_mse[i]) << ','
        << format_double(cv.sd_mse[i]) << ',' << tag << '\n';
  }

  const auto result = modelselect::fit_via_path(design.problem, cv.alpha_se, flags.config(), count, span);
  const auto model = datakit::ModelArtifact::from_fit(spec, design, result);
  datakit::write_file_atomic(out, csv.str());
  if (!model_out.empty()) model.save(model_out);

  std::cout << "alpha_min " << format_double(cv.alpha_min) << "  cv_mse " << format_double(cv.mean_mse[cv.index_min])
            << '\n'
            << "alpha_0.15se " << format_double(cv.alpha_se) << "  cv_mse " << format_double(cv.mean_mse[cv.index_se])
            << '\n';
  report_fit(model);
  return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path, const std::string& out) {
  const auto model = datakit::ModelArtifact::load(model_path);
  const auto data = datakit::load_table(data_path, model.spec, false);
  const Eigen::VectorXd yhat = model.predict(data);
  std::ostringstream csv;
  csv << "prediction\n";
  for (Eigen::Index i = 0; i < yhat.size(); ++i) csv << format_double(yhat(i)) << '\n';
  datakit::write_file_atomic(out, csv.str());
  if (!data.response.empty()) {
    double rss = 0.0;
    for (Eigen::Index i = 0; i < yhat.size(); ++i) {
      const double r = data.response[static_cast<std::size_t>(i)] - yhat(i);
      rss += r * r;
    }
    std::cout << "rss " << format_double(rss) << "  mse " << format_double(rss / static_cast<double>(yhat.size()))
              << '\n';
  }
  return 0;
}

int run_curves(const std::string& model_path, const std::string& feature, int points, const std::string& out) {
  const auto model = datakit::ModelArtifact::load(model_path);
  const auto f = model.preprocessor.find_feature(feature);
  if (!f) throw Error(ErrorCode::kMissingColumn, "model has no feature '" + feature + "'");
  std::ostringstream csv;
  if (model.preprocessor.features()[*f].role == datakit::Role::kCategorical) {
    csv << "level,effect\n";
    for (const auto& e : datakit::level_effects(model, feature)) csv << e.level << ',' << format_double(e.value) << '\n';
  } else {
    csv << "x,effect\n";
    for (const auto& p : datakit::feature_curve(model, feature, points)) {
      csv << format_double(p.x) << ',' << format_double(p.value) << '\n';
    }
  }
  datakit::write_file_atomic(out, csv.str());
  return 0;
}

int run_simulate(int experiment, int case_id, int replicates, std::uint64_t seed, bool per_replicate,
                 const std::string& out, const SolverFlags& flags) {
  simbench::ExperimentOptions options;
  options.replicates = replicates;
  options.seed = seed;
  options.per_replicate_cv = per_replicate;
  options.config = flags.config();
  const auto report = simbench::run_experiment(experiment, case_id, options);
  const std::string csv = report.to_csv();
  datakit::write_file_atomic(out, csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse additive regression with variational ARD"};
  app.require_subcommand(1);
  SolverFlags flags;

  std::string data, spec, out, model;
  double alpha = 1.0;
  auto* fit = app.add_subcommand("fit", "Fit at one alpha and write the model file");
  fit->add_option("--data", data, "CSV file")->required()->check(CLI::ExistingFile);
  fit->add_option("--spec", spec, "Column spec (JSON)")->required()->check(CLI::ExistingFile);
  fit->add_option("--alpha", alpha, "Tuning parameter")->required()->check(CLI::PositiveNumber);
  fit->add_option("--out", out, "Model file to write")->required();
  add_solver_flags(fit, flags);

  int grid_count = 100;
  double span = 6.0;
  auto* path = app.add_subcommand("path", "Block norms along a warm-started alpha path");
  path->add_option("--data", data, "CSV file")->required()->check(CLI::ExistingFile);
  path->add_option("--spec", spec, "Column spec (JSON)")->required()->check(CLI::ExistingFile);
  path->add_option("--grid-count", grid_count, "Number of alpha values")->check(CLI::Range(2, 100000));
  path->add_option("--span-decades", span, "Decades below alpha_max")->check(CLI::PositiveNumber);
  path->add_option("--out", out, "CSV to write")->required();
  add_solver_flags(path, flags);

  int folds = 10;
  std::uint64_t seed = 1;
  bool standard_error = false;
  auto* cv = app.add_subcommand("cv", "k-fold cross-validation, then refit at alpha_0.15se");
  cv->add_option("--data", data, "CSV file")->required()->check(CLI::ExistingFile);
  cv->add_option("--spec", spec, "Column spec (JSON)")->required()->check(CLI::ExistingFile);
  cv->add_option("--folds", folds, "Number of folds")->check(CLI::Range(2, 1000000));
  cv->add_option("--seed", seed, "Fold assignment seed");
  cv->add_option("--grid-count", grid_count, "Number of alpha values")->check(CLI::Range(2, 100000));
  cv->add_option("--span-decades", span, "Decades below alpha_max")->check(CLI::PositiveNumber);
  cv->add_flag("--standard-error", standard_error, "Use sd/sqrt(folds) in the 0.15 rule");
  cv->add_option("--out", out, "CV table to write")->required();
  cv->add_option("--model", model, "Model file for the alpha_0.15se refit");
  add_solver_flags(cv, flags);

  auto* predict = app.add_subcommand("predict", "Predict from a model file");
  predict->add_option("--model", model, "Model file")->required()->check(CLI::ExistingFile);
  predict->add_option("--data", data, "CSV file")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out, "CSV to write")->required();

  std::string feature;
  int points = 200;
  auto* curves = app.add_subcommand("curves", "Fitted effect of one feature");
  curves->add_option("--model", model, "Model file")->required()->check(CLI::ExistingFile);
  curves->add_option("--feature", feature, "Feature name")->required();
  curves->add_option("--grid", points, "Grid points over the training range")->check(CLI::Range(2, 10000000));
  curves->add_option("--out", out, "CSV to write")->required();

  int experiment = 1, case_id = 1, replicates = 100;
  bool per_replicate = false;
  auto* simulate = app.add_subcommand("simulate", "Synthetic benchmark cases");
  simulate->add_option("--experiment", experiment, "Experiment (1 or 2)")->required()->check(CLI::Range(1, 2));
  simulate->add_option("--case", case_id, "Case number")->required();
  simulate->add_option("--replicates", replicates, "Replicates")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "Base seed");
  simulate->add_flag("--per-replicate-cv", per_replicate, "Cross-validate every replicate");
  simulate->add_option("--out", out, "Report CSV to write")->required();
  add_solver_flags(simulate, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return run_fit(data, spec, alpha, out, flags);
    if (*path) return run_path(data, spec, grid_count, span, out, flags);
    if (*cv) return run_cv(data, spec, folds, seed, grid_count, span, standard_error, out, model, flags);
    if (*predict) return run_predict(model, data, out);
    if (*curves) return run_curves(model, feature, points, out);
    if (*simulate) return run_simulate(experiment, case_id, replicates, seed, per_replicate, out, flags);
  } catch (const vard::Error& e) {
    std::cerr << "vard: error [" << vard::to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "vard: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
