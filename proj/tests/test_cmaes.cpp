#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "equiplan/cmaes.hpp"
#include "equiplan/error.hpp"

using namespace equiplan;

namespace {

double sphere(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double rosenbrock(const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    s += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
  }
  return s;
}

CmaConfig sphere_config(std::uint64_t seed) {
  CmaConfig c;
  c.initial_mean = std::vector<double>(5, 1.0);
  c.initial_sigma = 0.5;
  c.max_evaluations = 5000;
  c.target_loss = 1e-8;
  c.seed = seed;
  return c;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("strategy constants") {
  CmaConfig c;
  c.initial_mean = std::vector<double>(5, 0.0);
  const auto s = CmaStrategy::from(c);
  CHECK(s.lambda == 8);
  CHECK(s.mu == 4);
  CHECK(std::accumulate(s.weights.begin(), s.weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t i = 1; i < s.weights.size(); ++i) CHECK(s.weights[i] < s.weights[i - 1]);
  CHECK(s.mu_eff >= 1.0);
  CHECK(s.mu_eff <= s.mu);
  CHECK(s.c_1 + s.c_mu <= 1.0);
  CHECK(s.chi_n == doctest::Approx(std::sqrt(5.0) * (1 - 1 / 20.0 + 1 / (21.0 * 25))));
}

TEST_CASE("config validation") {
  CmaConfig c;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.initial_mean = {0.0};
  c.initial_sigma = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.initial_sigma = 1.0;
  c.population = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.population = 6;
  c.parents = 7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.parents = 3;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("sphere converges") {
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = cma_minimize(sphere, sphere_config(seed));
    CHECK(r.evaluations <= 5000);
    if (r.best_loss < 1e-8) ++ok;
  }
  CHECK(ok >= 18);
}

TEST_CASE("Rosenbrock converges") {
  CmaConfig c;
  c.initial_mean = {-1.0, 1.5};
  c.initial_sigma = 0.5;
  c.max_evaluations = 20000;
  c.tol_fun = 1e-18;
  c.tol_x = 1e-14;
  const auto r = cma_minimize(rosenbrock, c);
  CHECK(std::hypot(r.best_params[0] - 1.0, r.best_params[1] - 1.0) < 1e-3);
  CHECK(r.evaluations <= 20000);
}

TEST_CASE("fixed seed is bit-exact, threaded or not") {
  auto c = sphere_config(7);
  c.target_loss = -1.0;
  c.max_evaluations = 800;
  const auto a = cma_minimize(rosenbrock, c);
  const auto b = cma_minimize(rosenbrock, c);
  c.parallel_evaluation = true;
  const auto p = cma_minimize(rosenbrock, c);
  CHECK(a.best_params == b.best_params);
  CHECK(a.best_loss == b.best_loss);
  CHECK(a.best_params == p.best_params);
  REQUIRE(a.history.size() == p.history.size());
  for (std::size_t g = 0; g < a.history.size(); ++g) {
    CHECK(a.history[g].mean == p.history[g].mean);
    CHECK(a.history[g].sigma == p.history[g].sigma);
  }
  c.seed = 8;
  CHECK(cma_minimize(rosenbrock, c).best_params != a.best_params);
}

TEST_CASE("invariant under monotone transforms of the objective") {
  auto c = sphere_config(3);
  c.target_loss = -std::numeric_limits<double>::infinity();
  c.tol_fun = 0.0;
  c.max_evaluations = 400;
  const auto base = cma_minimize(sphere, c);
  const auto scaled = cma_minimize([](const std::vector<double>& x) { return 4.0 * sphere(x); }, c);
  const auto warped = cma_minimize([](const std::vector<double>& x) { return std::exp(sphere(x)) - 5.0; }, c);
  REQUIRE(base.history.size() == scaled.history.size());
  REQUIRE(base.history.size() == warped.history.size());
  for (std::size_t g = 0; g < base.history.size(); ++g) {
    CHECK(base.history[g].mean == scaled.history[g].mean);
    CHECK(base.history[g].mean == warped.history[g].mean);
  }
}

TEST_CASE("loss decreases across generation blocks") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto c = sphere_config(seed);
    c.target_loss = -1.0;
    c.max_evaluations = 8 * 40;
    const auto r = cma_minimize(sphere, c);
    REQUIRE(r.history.size() >= 40);
    for (int block = 0; block + 1 < 4; ++block) {
      std::vector<double> a, b;
      for (int g = 0; g < 10; ++g) {
        a.push_back(r.history[block * 10 + g].best_loss);
        b.push_back(r.history[(block + 1) * 10 + g].best_loss);
      }
      CHECK(median(b) < median(a));
    }
  }
}

TEST_CASE("history bookkeeping") {
  auto c = sphere_config(2);
  c.max_evaluations = 100;
  c.target_loss = -1.0;
  const auto r = cma_minimize(sphere, c);
  CHECK(r.stop == CmaStop::MaxEvaluations);
  CHECK(r.evaluations <= 100);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < r.history.size(); ++g) {
    CHECK(r.history[g].generation == static_cast<int>(g) + 1);
    CHECK(r.history[g].best_loss <= r.history[g].mean_loss);
    best = std::min(best, r.history[g].best_loss);
  }
  CHECK(r.best_loss == best);
  CHECK(sphere(r.best_params) == r.best_loss);
}

TEST_CASE("non-finite objective") {
  auto c = sphere_config(1);
  CHECK_THROWS_AS(cma_minimize([](const std::vector<double>&) { return std::nan(""); }, c), EvaluationError);
  CHECK_THROWS_AS(
      cma_minimize([](const std::vector<double>&) { return std::numeric_limits<double>::infinity(); }, c),
      EvaluationError);
  c.parallel_evaluation = true;
  CHECK_THROWS_AS(cma_minimize([](const std::vector<double>&) { return std::nan(""); }, c), EvaluationError);
}

TEST_CASE("flat landscape stops cleanly") {
  auto c = sphere_config(1);
  c.target_loss = -1.0;
  const auto r = cma_minimize([](const std::vector<double>&) { return 2.5; }, c);
  CHECK(r.best_loss == 2.5);
  CHECK(r.stop != CmaStop::MaxEvaluations);
  CHECK(r.evaluations < 5000);
}
