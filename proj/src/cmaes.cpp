#include "equiplan/cmaes.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <numeric>
#include <sstream>

#include "equiplan/error.hpp"
#include "equiplan/random.hpp"

namespace equiplan {

int CmaConfig::resolved_population() const {
  if (population > 0) return population;
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dimension()))));
}

int CmaConfig::resolved_parents() const {
  if (parents > 0) return parents;
  return resolved_population() / 2;
}

void CmaConfig::validate() const {
  if (dimension() < 1) throw ConfigError("CMA-ES needs a non-empty initial mean");
  if (resolved_population() < 2) throw ConfigError("CMA-ES population must be >= 2");
  if (resolved_parents() < 1 || resolved_parents() > resolved_population()) {
    throw ConfigError("CMA-ES parents must be in [1, population]");
  }
  if (!(initial_sigma > 0.0) || !std::isfinite(initial_sigma)) throw ConfigError("CMA-ES sigma0 must be > 0");
  if (max_evaluations < 1) throw ConfigError("CMA-ES needs max_evaluations >= 1");
  for (double v : initial_mean) {
    if (!std::isfinite(v)) throw ConfigError("CMA-ES initial mean must be finite");
  }
}

CmaStrategy CmaStrategy::from(const CmaConfig& config) {
  config.validate();
  CmaStrategy s;
  s.n = config.dimension();
  s.lambda = config.resolved_population();
  s.mu = config.resolved_parents();
  const double n = s.n;
  for (int i = 0; i < s.mu; ++i) s.weights.push_back(std::log(s.mu + 0.5) - std::log(i + 1.0));
  const double sum = std::accumulate(s.weights.begin(), s.weights.end(), 0.0);
  for (auto& w : s.weights) w /= sum;
  double sq = 0.0;
  for (double w : s.weights) sq += w * w;
  s.mu_eff = 1.0 / sq;
  s.c_sigma = (s.mu_eff + 2.0) / (n + s.mu_eff + 5.0);
  s.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((s.mu_eff - 1.0) / (n + 1.0)) - 1.0) + s.c_sigma;
  s.c_c = (4.0 + s.mu_eff / n) / (n + 4.0 + 2.0 * s.mu_eff / n);
  s.c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + s.mu_eff);
  s.c_mu = std::min(1.0 - s.c_1, 2.0 * (s.mu_eff - 2.0 + 1.0 / s.mu_eff) / ((n + 2.0) * (n + 2.0) + s.mu_eff));
  s.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  return s;
}

const char* to_string(CmaStop s) {
  switch (s) {
    case CmaStop::MaxEvaluations: return "max_evaluations";
    case CmaStop::TargetLoss: return "target_loss";
    case CmaStop::TolFun: return "tol_fun";
    case CmaStop::TolX: return "tol_x";
    case CmaStop::Condition: return "condition";
  }
  return "unknown";
}

namespace {

std::string describe(const std::vector<double>& x) {
  std::ostringstream ss;
  ss.precision(17);
  ss << '[';
  for (std::size_t i = 0; i < x.size(); ++i) ss << (i ? ", " : "") << x[i];
  ss << ']';
  return ss.str();
}

}  // namespace

TuneResult cma_minimize(const Objective& f, const CmaConfig& config) {
  const auto s = CmaStrategy::from(config);
  const int n = s.n;
  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;

  Rng rng(config.seed);
  Vec mean = Eigen::Map<const Vec>(config.initial_mean.data(), n);
  double sigma = config.initial_sigma;
  Mat C = Mat::Identity(n, n);
  Mat B = Mat::Identity(n, n);
  Vec D = Vec::Ones(n);
  Vec p_sigma = Vec::Zero(n), p_c = Vec::Zero(n);

  TuneResult result;
  const int flat_window = 10 + static_cast<int>(std::ceil(30.0 * n / s.lambda));
  std::deque<double> recent_best;

  std::vector<Vec> z(s.lambda), y(s.lambda);
  std::vector<std::vector<double>> xs(s.lambda, std::vector<double>(n));
  std::vector<double> fx(s.lambda);
  std::vector<int> order(s.lambda);

  for (int gen = 0;; ++gen) {
    if (result.evaluations + s.lambda > config.max_evaluations) {
      result.stop = CmaStop::MaxEvaluations;
      break;
    }
    for (int k = 0; k < s.lambda; ++k) {
      z[k].resize(n);
      for (int i = 0; i < n; ++i) z[k][i] = rng.normal();
      y[k] = B * D.cwiseProduct(z[k]);
      const Vec x = mean + sigma * y[k];
      for (int i = 0; i < n; ++i) xs[k][i] = x[i];
    }

    std::vector<std::exception_ptr> errors(s.lambda);
#pragma omp parallel for schedule(dynamic) if (config.parallel_evaluation)
    for (int k = 0; k < s.lambda; ++k) {
      try {
        fx[k] = f(xs[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
    for (int k = 0; k < s.lambda; ++k) {
      if (errors[k]) std::rethrow_exception(errors[k]);
      if (!std::isfinite(fx[k])) throw EvaluationError("objective returned a non-finite value at " + describe(xs[k]));
    }
    result.evaluations += s.lambda;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    if (fx[order[0]] < result.best_loss) {
      result.best_loss = fx[order[0]];
      result.best_params = xs[order[0]];
    }

    Vec y_w = Vec::Zero(n);
    for (int i = 0; i < s.mu; ++i) y_w += s.weights[i] * y[order[i]];
    mean += sigma * y_w;

    // C^{-1/2} y_w = B D^{-1} B^T y_w
    const Vec c_inv_sqrt_yw = B * (B.transpose() * y_w).cwiseQuotient(D);
    p_sigma = (1.0 - s.c_sigma) * p_sigma + std::sqrt(s.c_sigma * (2.0 - s.c_sigma) * s.mu_eff) * c_inv_sqrt_yw;
    const double ps_norm = p_sigma.norm();
    const double denom = std::sqrt(1.0 - std::pow(1.0 - s.c_sigma, 2.0 * (gen + 1)));
    const bool h_sigma = ps_norm / denom < (1.4 + 2.0 / (n + 1.0)) * s.chi_n;
    p_c = (1.0 - s.c_c) * p_c + (h_sigma ? std::sqrt(s.c_c * (2.0 - s.c_c) * s.mu_eff) : 0.0) * y_w;
    const double delta_h = (h_sigma ? 0.0 : 1.0) * s.c_c * (2.0 - s.c_c);

    Mat rank_mu = Mat::Zero(n, n);
    for (int i = 0; i < s.mu; ++i) {
      const Vec& yi = y[order[i]];
      rank_mu += s.weights[i] * yi * yi.transpose();
    }
    C = (1.0 + s.c_1 * delta_h - s.c_1 - s.c_mu) * C + s.c_1 * p_c * p_c.transpose() + s.c_mu * rank_mu;
    C = 0.5 * (C + C.transpose());
    sigma *= std::exp((s.c_sigma / s.d_sigma) * (ps_norm / s.chi_n - 1.0));

    Eigen::SelfAdjointEigenSolver<Mat> eig(C);
    Vec ev = eig.eigenvalues();
    const double ev_max = ev.maxCoeff();
    // floor keeps C positive definite under round-off
    const double floor = std::max(ev_max * 1e-20, 1e-300);
    for (int i = 0; i < n; ++i) ev[i] = std::max(ev[i], floor);
    B = eig.eigenvectors();
    D = ev.cwiseSqrt();

    GenerationRecord rec;
    rec.generation = gen + 1;
    rec.evaluations = result.evaluations;
    rec.best_loss = fx[order[0]];
    rec.mean_loss = std::accumulate(fx.begin(), fx.end(), 0.0) / s.lambda;
    rec.sigma = sigma;
    rec.mean.assign(mean.data(), mean.data() + n);
    result.history.push_back(std::move(rec));

    if (result.best_loss < config.target_loss) {
      result.stop = CmaStop::TargetLoss;
      break;
    }
    recent_best.push_back(fx[order[0]]);
    if (static_cast<int>(recent_best.size()) > flat_window) recent_best.pop_front();
    if (static_cast<int>(recent_best.size()) == flat_window) {
      const auto [lo, hi] = std::minmax_element(recent_best.begin(), recent_best.end());
      const double gen_range = fx[order.back()] - fx[order.front()];
      if (std::max(*hi - *lo, gen_range) < config.tol_fun) {
        result.stop = CmaStop::TolFun;
        break;
      }
    }
    if (sigma * std::sqrt(C.diagonal().maxCoeff()) < config.tol_x) {
      result.stop = CmaStop::TolX;
      break;
    }
    if (ev.maxCoeff() / ev.minCoeff() > config.max_condition) {
      result.stop = CmaStop::Condition;
      break;
    }
  }
  return result;
}

}  // namespace equiplan
