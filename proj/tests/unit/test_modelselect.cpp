#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <stdlib.h>

#include "fixtures.hpp"
#include "vard/datakit.hpp"
#include "vard/error.hpp"
#include "vard/modelselect.hpp"
#include "vard/simbench.hpp"

using namespace vard;
using modelselect::AlphaGrid;

namespace {

datakit::Dataset noise_dataset(std::uint64_t seed, std::size_t n, std::size_t p) {
  simbench::SyntheticSpec spec;
  spec.n = n;
  spec.p = p;
  spec.sigma2 = 1.0;
  spec.seed = seed;
  return simbench::to_dataset(simbench::generate(spec), 6);
}

datakit::Dataset signal_dataset(std::uint64_t seed, std::size_t n) {
  simbench::SyntheticSpec spec;
  spec.n = n;
  spec.p = 3;
  spec.sigma2 = 0.5;
  spec.seed = seed;
  spec.assignments[1] = {2, 1.0};
  spec.assignments[2] = {4, 0.3};
  return simbench::to_dataset(simbench::generate(spec), 5);
}

}  // namespace

TEST_CASE("alpha grid hand value and spacing") {
  const auto g = modelselect::make_alpha_grid(10.0, 2, 1.0);
  REQUIRE(g.size() == 2);
  CHECK(g.alphas[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(g.alphas[1] == doctest::Approx(10.01).epsilon(1e-14));

  const auto h = modelselect::make_alpha_grid(37.0, 100, 6.0);
  const double ratio = h.alphas[1] / h.alphas[0];
  for (std::size_t i = 1; i < h.size(); ++i) {
    CHECK(h.alphas[i] / h.alphas[i - 1] == doctest::Approx(ratio).epsilon(1e-12));
  }
  CHECK(h.alphas.back() >= 37.0);
  CHECK_THROWS_AS(modelselect::make_alpha_grid(0.0, 10, 6.0), Error);
  CHECK_THROWS_AS(modelselect::make_alpha_grid(1.0, 1, 6.0), Error);
}

TEST_CASE("path ends at the empty model and needs an increasing grid") {
  std::mt19937_64 rng(41);
  const auto design = vard::testing::random_design(rng, 150, 4);
  const auto grid = modelselect::make_alpha_grid(design.problem, 30, 4.0);
  const auto path = modelselect::path_fit(design.problem, grid, solver::FitConfig{});
  REQUIRE(path.size() == 30);
  for (const auto& b : path.back().blocks) CHECK(b.is_zero());
  CHECK(path.front().alpha == grid.alphas.front());

  AlphaGrid bad{{1.0, 0.5}};
  CHECK_THROWS_AS(modelselect::path_fit(design.problem, bad, solver::FitConfig{}), Error);

  const auto at = modelselect::fit_via_path(design.problem, grid.alphas[12], solver::FitConfig{}, 30, 4.0);
  CHECK(at.objective == doctest::Approx(path[12].objective).epsilon(1e-12));
}

TEST_CASE("kfold_split partitions deterministically") {
  const auto single = modelselect::kfold_split(10, 10, 3);
  for (const auto& f : single) CHECK(f.size() == 1);

  const auto a = modelselect::kfold_split(103, 10, 99);
  const auto b = modelselect::kfold_split(103, 10, 99);
  CHECK(a == b);
  std::set<std::size_t> seen;
  for (const auto& f : a) {
    CHECK((f.size() == 10 || f.size() == 11));
    seen.insert(f.begin(), f.end());
  }
  CHECK(seen.size() == 103);
  CHECK(*seen.rbegin() == 102);
  CHECK(modelselect::kfold_split(103, 10, 100) != a);
  CHECK_THROWS_AS(modelselect::kfold_split(5, 10, 1), Error);
  CHECK_THROWS_AS(modelselect::kfold_split(5, 1, 1), Error);
}

TEST_CASE("select_alphas: ties and spread rules") {
  modelselect::CvResult r;
  r.grid.alphas = {1, 2, 3, 4, 5, 6};
  r.mean_mse = {5.0, 4.0, 3.0, 3.0, 3.5, 9.0};
  r.sd_mse = {1, 1, 1, 2, 1, 1};
  r.folds = 4;
  modelselect::CvOptions opt;
  modelselect::select_alphas(r, opt);
  CHECK(r.index_min == 3);  // tie goes to the larger alpha
  CHECK(r.alpha_min == 4.0);
  CHECK(r.alpha_se == 4.0);  // limit 3 + 0.15 * 2 excludes 3.5
  r.mean_mse[4] = 3.25;
  modelselect::select_alphas(r, opt);
  CHECK(r.alpha_se == 5.0);
  r.mean_mse[4] = 3.35;
  modelselect::select_alphas(r, opt);
  CHECK(r.alpha_se == 4.0);
  opt.spread = modelselect::SpreadRule::kStandardError;
  r.mean_mse[4] = 3.2;
  modelselect::select_alphas(r, opt);
  CHECK(r.alpha_se == 4.0);  // limit is 3 + 0.15 * 2 / 2 = 3.15
}

TEST_CASE("leave-one-out cross-validation matches an explicit loop") {
  const auto data = signal_dataset(5, 20);
  const auto full = datakit::build_design(data);
  const auto grid = modelselect::make_alpha_grid(full.problem, 8, 3.0);
  solver::FitConfig config;
  modelselect::CvOptions opt;
  opt.folds = 20;
  const auto cv = datakit::cross_validate(data, grid, opt, config);

  std::vector<double> mean(grid.size(), 0.0);
  for (std::size_t i = 0; i < 20; ++i) {
    std::vector<std::size_t> train;
    for (std::size_t r = 0; r < 20; ++r)
      if (r != i) train.push_back(r);
    const std::vector<std::size_t> test{i};
    const auto design = datakit::build_design(data.subset(train));
    const auto blocks = design.preprocessor.transform(data.subset(test));
    const auto path = modelselect::path_fit(design.problem, grid, config);
    for (std::size_t a = 0; a < grid.size(); ++a) {
      const double err = solver::predict(path[a], blocks)(0) - data.response[i];
      mean[a] += err * err / 20.0;
    }
  }
  for (std::size_t a = 0; a < grid.size(); ++a) {
    CHECK(cv.mean_mse[a] == doctest::Approx(mean[a]).epsilon(1e-10));
  }
}

TEST_CASE("pure noise selects the empty model") {
  int empty = 0;
  const int runs = 20;
  for (int s = 1; s <= runs; ++s) {
    const auto data = noise_dataset(static_cast<std::uint64_t>(s), 100, 3);
    const auto design = datakit::build_design(data);
    const auto grid = modelselect::make_alpha_grid(design.problem, 40, 4.0);
    modelselect::CvOptions opt;
    opt.seed = static_cast<std::uint64_t>(s);
    const auto cv = datakit::cross_validate(data, grid, opt, solver::FitConfig{});
    CHECK(cv.alpha_se >= cv.alpha_min);
    const auto fit = modelselect::fit_via_path(design.problem, cv.alpha_se, solver::FitConfig{}, 40, 4.0);
    bool zero = true;
    for (const auto& b : fit.blocks) zero = zero && b.is_zero();
    empty += zero;
  }
  MESSAGE("empty model at alpha_0.15se: " << empty << "/" << runs);
  CHECK(empty * 10 >= runs * 9);
}

TEST_CASE("cross-validation is deterministic and independent of worker count") {
  const auto data = signal_dataset(6, 80);
  const auto grid = modelselect::make_alpha_grid(datakit::build_design(data).problem, 15, 3.0);
  modelselect::CvOptions opt;
  opt.folds = 5;
  opt.seed = 11;
  ::setenv("VARD_THREADS", "1", 1);
  const auto a = datakit::cross_validate(data, grid, opt, solver::FitConfig{});
  ::setenv("VARD_THREADS", "3", 1);
  const auto b = datakit::cross_validate(data, grid, opt, solver::FitConfig{});
  ::unsetenv("VARD_THREADS");
  CHECK(a.fold_mse == b.fold_mse);
  CHECK(a.mean_mse == b.mean_mse);
  CHECK(a.alpha_se == b.alpha_se);
  CHECK(a.alpha_se >= a.alpha_min);
}

TEST_CASE("fold preprocessing ignores held-out rows") {
  const auto data = signal_dataset(7, 60);
  auto perturbed = data;
  const auto folds = modelselect::kfold_split(60, 5, 1);
  std::vector<std::size_t> train;
  for (std::size_t f = 1; f < folds.size(); ++f) train.insert(train.end(), folds[f].begin(), folds[f].end());
  for (const auto r : folds[0]) {
    for (auto& col : perturbed.features) col.values[r] = col.values[r] * 3.0 + 10.0;
    perturbed.response[r] += 100.0;
  }
  const auto a = datakit::fold_builder(data)(train, folds[0]);
  const auto b = datakit::fold_builder(perturbed)(train, folds[0]);
  REQUIRE(a.train.blocks() == b.train.blocks());
  for (std::size_t j = 0; j < a.train.blocks(); ++j) {
    CHECK(a.train.terms[j].Z == b.train.terms[j].Z);
    CHECK(a.train.terms[j].v == b.train.terms[j].v);
  }
  CHECK(a.train.y == b.train.y);
  CHECK(a.test_y != b.test_y);
  CHECK(a.test_blocks[0] != b.test_blocks[0]);
}

TEST_CASE("degenerate folds are reported") {
  // a feature that is constant once the last rows are held out
  datakit::Dataset data;
  data.row_count = 20;
  data.response_name = "y";
  datakit::FeatureColumn col;
  col.spec.name = "x";
  col.spec.knot_count = 3;
  col.values.assign(20, 1.0);
  col.values[19] = 2.0;
  col.values[18] = 3.0;
  col.values[17] = 4.0;
  data.features.push_back(col);
  for (int i = 0; i < 20; ++i) data.response.push_back(i % 3);
  AlphaGrid grid{{0.1, 1.0}};
  modelselect::CvOptions opt;
  opt.folds = 2;
  try {
    (void)datakit::cross_validate(data, grid, opt, solver::FitConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateFold);
  }
}
