#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fixtures.hpp"
#include "vard/error.hpp"
#include "vard/modelselect.hpp"
#include "vard/solver.hpp"

using namespace vard;
using solver::BlockState;
using solver::FeatureClass;

namespace {

solver::Problem single_block_problem(const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
  solver::Problem p;
  p.terms.push_back(standardize::linear_term(z));
  p.y = y;
  p.features.push_back({std::nullopt, {0}});
  return p;
}

// One-block objective in diagonal coordinates, without the constant ||y_(-j)||^2 / alpha.
double one_block_objective(const vard::testing::RandomBlock& b, const std::vector<double>& mu,
                           const std::vector<double>& phi, double r2) {
  double fit = 0.0, kl = 0.0;
  for (std::size_t k = 0; k < b.eta.size(); ++k) {
    fit += -2.0 * b.eta[k] * mu[k] + b.v[k] * mu[k] * mu[k] + b.v[k] * phi[k];
    kl += std::log(r2) - std::log(phi[k]) + (mu[k] * mu[k] + phi[k]) / r2;
  }
  return fit / b.alpha + kl;
}

double dense_grid_minimum(const vard::testing::RandomBlock& b, double lo, double hi, int points) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < points; ++i) {
    const double r2 = lo + (hi - lo) * i / (points - 1);
    best = std::min(best, solver::univariate_G(r2, b.alpha, b.eta, b.v));
  }
  return best;
}

}  // namespace

TEST_CASE("univariate_G hand values") {
  const std::vector<double> eta2{1.0, -2.0}, v2{1.0, 3.0};
  CHECK(solver::univariate_G(0.0, 1.0, eta2, v2) == 0.0);
  const std::vector<double> eta{2.0}, v{1.0};
  CHECK(solver::univariate_G(3.0, 1.0, eta, v) == doctest::Approx(std::log(4.0) - 3.0));
  CHECK(solver::univariate_G(3.0, 1.0, eta, v) == doctest::Approx(-1.6137056388801094));
}

TEST_CASE("univariate_G without signal is increasing") {
  const std::vector<double> eta{0.0, 0.0, 0.0}, v{0.5, 2.0, 7.0};
  double prev = solver::univariate_G(0.0, 0.3, eta, v);
  for (int i = 1; i <= 100; ++i) {
    const double g = solver::univariate_G(0.1 * i, 0.3, eta, v);
    CHECK(g > prev);
    prev = g;
  }
}

TEST_CASE("interval_bounds hand values") {
  const std::vector<double> eta{2.0, 1.0}, v{1.0, 1.0};
  const auto b = solver::interval_bounds(1.0, eta, v);
  CHECK(b.lower == 0.0);
  CHECK(b.upper == doctest::Approx(3.0));

  const std::vector<double> zero{0.0, 0.0};
  const auto z = solver::interval_bounds(1.0, zero, v);
  CHECK(z.lower == 0.0);
  CHECK(z.upper == 0.0);

  const std::vector<double> one_eta{2.0}, one_v{1.0};
  const auto c = solver::interval_bounds(1.0, one_eta, one_v);
  CHECK(c.lower == doctest::Approx(3.0));
  CHECK(c.upper == doctest::Approx(3.0));

  const std::vector<double> no_v{0.0, 0.0};
  CHECK_THROWS_AS(solver::interval_bounds(1.0, eta, no_v), Error);
}

TEST_CASE("interval_bounds skips coordinates with v = 0") {
  const std::vector<double> eta{2.0, 5.0}, v{1.0, 0.0};
  const auto b = solver::interval_bounds(1.0, eta, v);
  CHECK(b.lower == doctest::Approx(3.0));
  CHECK(b.upper == doctest::Approx(3.0));
}

TEST_CASE("minimize_G closed forms") {
  const std::vector<double> zero{0.0, 0.0, 0.0}, v{1.0, 2.0, 3.0};
  CHECK(solver::minimize_G(1.0, zero, v, 1000) == 0.0);
  const std::vector<double> eta{2.0}, one{1.0};
  CHECK(solver::minimize_G(1.0, eta, one, 1000) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("minimize_G against a dense grid") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto b = vard::testing::random_block(rng);
    const auto iv = solver::interval_bounds(b.alpha, b.eta, b.v);
    const double r2 = solver::minimize_G(b.alpha, b.eta, b.v, 1000);
    CHECK(r2 >= iv.lower);
    CHECK(r2 <= iv.upper);
    if (iv.upper > iv.lower) {
      const double oracle = dense_grid_minimum(b, iv.lower, iv.upper, 200001);
      CHECK(solver::univariate_G(r2, b.alpha, b.eta, b.v) <= oracle + 1e-6 * (1.0 + std::abs(oracle)));
    }
  }
}

TEST_CASE("g' matches central differences") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const double alpha = vard::testing::log_uniform(rng, 1e-2, 1e2);
    const double eta = vard::testing::log_uniform(rng, 1e-2, 1e2);
    const double v = vard::testing::log_uniform(rng, 1e-2, 1e2);
    const double r2 = vard::testing::log_uniform(rng, 1e-2, 1e2);
    const std::vector<double> e{eta}, vv{v};
    const double h = 1e-5 * r2;
    const double fd = (solver::univariate_G(r2 + h, alpha, e, vv) - solver::univariate_G(r2 - h, alpha, e, vv)) / (2 * h);
    const double g = solver::univariate_g_derivative(r2, alpha, eta, v);
    CHECK(std::abs(g - fd) <= 1e-6 * std::max(1.0, std::abs(g)));
  }
}

TEST_CASE("block_update closed forms") {
  solver::FitConfig config;
  const std::vector<double> zero{0.0, 0.0}, v{1.0, 4.0};
  const auto z = solver::block_update(zero, v, 1.0, config);
  CHECK(z.is_zero());
  CHECK(z.mu.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.phi.cwiseAbs().maxCoeff() == 0.0);

  const std::vector<double> eta{2.0}, one{1.0};
  const auto s = solver::block_update(eta, one, 1.0, config);
  CHECK(s.r2 == doctest::Approx(3.0));
  CHECK(s.mu(0) == doctest::Approx(1.5));
  CHECK(s.phi(0) == doctest::Approx(0.75));
}

TEST_CASE("block_update is a local optimum of the one-block objective") {
  std::mt19937_64 rng(23);
  solver::FitConfig config;
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto b = vard::testing::random_block(rng, 5);
    const auto s = solver::block_update(b.eta, b.v, b.alpha, config);
    if (s.is_zero()) continue;
    ++checked;
    std::vector<double> mu(s.mu.data(), s.mu.data() + s.mu.size());
    std::vector<double> phi(s.phi.data(), s.phi.data() + s.phi.size());
    const double base = one_block_objective(b, mu, phi, s.r2);
    const double slack = 1e-9 * (1.0 + std::abs(base));
    for (const double step : {1e-3, -1e-3}) {
      CHECK(one_block_objective(b, mu, phi, s.r2 * (1 + step)) >= base - slack);
      for (std::size_t k = 0; k < mu.size(); ++k) {
        auto m = mu;
        m[k] += step * std::max(std::abs(mu[k]), 1e-8);
        CHECK(one_block_objective(b, m, phi, s.r2) >= base - slack);
        auto p = phi;
        p[k] *= 1 + step;
        CHECK(one_block_objective(b, mu, p, s.r2) >= base - slack);
      }
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("objective of the empty model") {
  std::mt19937_64 rng(24);
  const auto design = vard::testing::random_design(rng, 60, 3);
  std::vector<BlockState> blocks;
  for (const auto& t : design.problem.terms) blocks.push_back(BlockState::zero(t.dim()));
  CHECK(solver::objective(blocks, design.problem, 2.5) ==
        doctest::Approx(design.problem.y.squaredNorm() / 2.5).epsilon(1e-14));
}

TEST_CASE("objective at a single-block optimum equals (||y||^2 + G) / alpha - d log alpha") {
  std::mt19937_64 rng(25);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd z(30), y(30);
    for (int i = 0; i < 30; ++i) {
      z(i) = normal(rng);
      y(i) = 0.7 * z(i) + normal(rng);
    }
    z.array() -= z.mean();
    y.array() -= y.mean();
    const auto problem = single_block_problem(z, y);
    const double alpha = vard::testing::log_uniform(rng, 0.1, 10.0);
    const std::vector<double> eta{z.dot(y)}, v{z.squaredNorm()};
    solver::FitConfig config;
    const std::vector<BlockState> blocks{solver::block_update(eta, v, alpha, config)};
    const double expect = (y.squaredNorm() + solver::univariate_G(blocks[0].r2, alpha, eta, v)) / alpha -
                          std::log(alpha);
    CHECK(solver::objective(blocks, problem, alpha) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("finite-difference gradient in mu vanishes at the block update") {
  std::mt19937_64 rng(26);
  const auto design = vard::testing::random_design(rng, 120, 3);
  const auto& problem = design.problem;
  solver::FitConfig config;
  config.alpha = 1.0;
  auto state = solver::initial_state(problem);
  solver::sweep(state, problem, config);
  int checked = 0;
  for (std::size_t j = 0; j < problem.blocks(); ++j) {
    solver::update_block(state, problem, j, config);
    if (state.blocks[j].is_zero()) continue;
    const double base = solver::objective(state.blocks, problem, config.alpha);
    for (Eigen::Index k = 0; k < state.blocks[j].mu.size(); ++k) {
      auto plus = state.blocks, minus = state.blocks;
      const double h = 1e-6 * std::max(1.0, std::abs(state.blocks[j].mu(k)));
      plus[j].mu(k) += h;
      minus[j].mu(k) -= h;
      const double grad = (solver::objective(plus, problem, config.alpha) -
                           solver::objective(minus, problem, config.alpha)) / (2 * h);
      CHECK(std::abs(grad) * std::max(1.0, std::abs(state.blocks[j].mu(k))) <= 1e-6 * (1.0 + std::abs(base)));
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("sweep: one block from zero equals one block_update") {
  std::mt19937_64 rng(27);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(40), y(40);
  for (int i = 0; i < 40; ++i) {
    z(i) = normal(rng);
    y(i) = 2.0 * z(i) + normal(rng);
  }
  z.array() -= z.mean();
  y.array() -= y.mean();
  const auto problem = single_block_problem(z, y);
  solver::FitConfig config;
  config.alpha = 0.5;
  auto state = solver::initial_state(problem);
  solver::sweep(state, problem, config);
  const std::vector<double> eta{z.dot(y)}, v{z.squaredNorm()};
  const auto direct = solver::block_update(eta, v, config.alpha, config);
  CHECK(state.blocks[0].r2 == direct.r2);
  CHECK(state.blocks[0].mu(0) == direct.mu(0));
  CHECK(state.sweeps == 1);
}

TEST_CASE("sweep: objective never increases and fixed points stay put") {
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 5; ++trial) {
    const auto design = vard::testing::random_design(rng, 150, 3);
    solver::FitConfig config;
    config.alpha = vard::testing::log_uniform(rng, 0.1, 50.0);
    auto state = solver::initial_state(design.problem);
    double prev = solver::objective(state.blocks, design.problem, config.alpha);
    for (int s = 0; s < 30; ++s) {
      solver::sweep(state, design.problem, config);
      const double now = solver::objective(state.blocks, design.problem, config.alpha);
      CHECK(now <= prev + 1e-10 * (1.0 + std::abs(prev)));
      prev = now;
    }
    const auto result = solver::fit(design.problem, config, state.blocks);
    auto fixed = solver::initial_state(design.problem, result.blocks);
    const double before = solver::objective(fixed.blocks, design.problem, config.alpha);
    solver::sweep(fixed, design.problem, config);
    const double after = solver::objective(fixed.blocks, design.problem, config.alpha);
    CHECK(std::abs(after - before) <= 1e-6 * (1.0 + std::abs(before)));
  }
}

TEST_CASE("alpha_max hand values and threshold") {
  Eigen::VectorXd z(2), y(2);
  z << 1.0, 0.0;
  y << 3.0, 0.0;
  const std::vector<standardize::StandardizedTerm> one{standardize::linear_term(z)};
  CHECK(solver::alpha_max(one, y) == doctest::Approx(9.0));
  Eigen::VectorXd orth(2);
  orth << 0.0, 5.0;
  CHECK(solver::alpha_max(one, orth) == 0.0);

  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 5; ++trial) {
    const auto design = vard::testing::random_design(rng, 80, 4);
    solver::FitConfig config;
    config.alpha = solver::alpha_max(design.problem.terms, design.problem.y) * (1 + 1e-6);
    const auto result = solver::fit(design.problem, config);
    for (const auto& b : result.blocks) CHECK(b.is_zero());
    CHECK(result.rss == doctest::Approx(design.problem.y.squaredNorm()));
    config.alpha *= 1e-3;
    const auto active = solver::fit(design.problem, config);
    bool any = false;
    for (const auto& b : active.blocks) any = any || !b.is_zero();
    CHECK(any);
  }
}

TEST_CASE("fit reports consistent residuals and predictions") {
  std::mt19937_64 rng(30);
  const auto design = vard::testing::random_design(rng, 200, 4);
  solver::FitConfig config;
  config.alpha = 5.0;
  const auto result = solver::fit(design.problem, config);
  CHECK(result.converged);
  std::vector<Eigen::MatrixXd> blocks;
  for (const auto& t : design.problem.terms) blocks.push_back(t.Z);
  const Eigen::VectorXd yhat = solver::predict(result, blocks);
  const double rss = (design.problem.y.array() + design.problem.intercept - yhat.array()).matrix().squaredNorm();
  CHECK(rss == doctest::Approx(result.rss).epsilon(1e-10));
  CHECK(result.objective == doctest::Approx(solver::objective(result.blocks, design.problem, 5.0)));

  solver::FitResult empty;
  empty.intercept = 4.25;
  for (const auto& t : design.problem.terms) empty.blocks.push_back(BlockState::zero(t.dim()));
  const Eigen::VectorXd flat = solver::predict(empty, blocks);
  CHECK(flat.cwiseAbs().minCoeff() == 4.25);
  CHECK(flat.cwiseAbs().maxCoeff() == 4.25);
}

TEST_CASE("warm-started path agrees with cold starts on small problems") {
  std::mt19937_64 rng(31);
  int agree = 0, total = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto design = vard::testing::random_design(rng, 100, 2, 6);
    const auto grid = modelselect::make_alpha_grid(design.problem, 12, 3.0);
    solver::FitConfig config;
    const auto path = modelselect::path_fit(design.problem, grid, config);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      config.alpha = grid.alphas[i];
      const auto cold = solver::fit(design.problem, config);
      // warm starts never end up worse than a cold start
      CHECK(path[i].objective <= cold.objective + 1e-4 * std::abs(cold.objective));
      agree += std::abs(path[i].objective - cold.objective) <= 1e-4 * std::abs(cold.objective);
      ++total;
    }
  }
  MESSAGE("warm and cold objectives within 1e-4: " << agree << "/" << total);
  CHECK(agree * 10 >= total * 9);
}

TEST_CASE("classify follows the zero / linear / nonlinear table") {
  std::vector<BlockState> blocks{BlockState::zero(3), BlockState::zero(1), BlockState::zero(3),
                                 BlockState::zero(1), BlockState::zero(3), BlockState::zero(1)};
  blocks[4].r2 = 1.0;  // feature 1: linear only
  blocks[2].r2 = 1.0;  // feature 2: nonlinear
  const auto layout = solver::Problem::paired_layout(3);
  const auto c = solver::classify(blocks, layout);
  REQUIRE(c.size() == 3);
  CHECK(c[0] == FeatureClass::kZero);
  CHECK(c[1] == FeatureClass::kLinear);
  CHECK(c[2] == FeatureClass::kNonlinear);
}

TEST_CASE("fit validates its inputs") {
  std::mt19937_64 rng(32);
  auto design = vard::testing::random_design(rng, 50, 2);
  solver::FitConfig config;
  config.alpha = -1.0;
  CHECK_THROWS_AS(solver::fit(design.problem, config), Error);
  config.alpha = 1.0;
  design.problem.y(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solver::fit(design.problem, config), Error);
}
