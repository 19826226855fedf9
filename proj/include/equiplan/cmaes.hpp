#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace equiplan {

/// Settings for (mu/mu_w, lambda)-CMA-ES. Learning rates follow Hansen's
/// default formulas and are derived from the dimension; see CmaStrategy.
struct CmaConfig {
  std::vector<double> initial_mean;     // m0; its size sets the dimension n
  double initial_sigma = 0.5;           // sigma0
  int population = 0;                   // lambda; 0 selects 4 + floor(3 ln n)
  int parents = 0;                      // mu; 0 selects floor(lambda / 2)
  int max_evaluations = 10'000;
  double target_loss = -std::numeric_limits<double>::infinity();  // stop once best < target
  double tol_fun = 1e-12;               // stop when recent best and current losses span less than this
  double tol_x = 1e-12;                 // stop when sigma * sqrt(max diag C) falls below this
  double max_condition = 1e14;
  std::uint64_t seed = 1;
  bool parallel_evaluation = false;     // evaluate offspring concurrently (f must be thread-safe)

  int dimension() const { return static_cast<int>(initial_mean.size()); }
  int resolved_population() const;
  int resolved_parents() const;
  void validate() const;
};

/// Derived strategy constants.
struct CmaStrategy {
  int n = 0, lambda = 0, mu = 0;
  std::vector<double> weights;  // positive recombination weights, sum 1
  double mu_eff = 0.0;
  double c_sigma = 0.0, d_sigma = 0.0, c_c = 0.0, c_1 = 0.0, c_mu = 0.0;
  double chi_n = 0.0;           // E||N(0, I)||

  static CmaStrategy from(const CmaConfig& config);
};

struct GenerationRecord {
  int generation = 0;  // 1-based
  int evaluations = 0;
  double best_loss = 0.0;   // best in this generation
  double mean_loss = 0.0;   // mean over this generation's offspring
  double sigma = 0.0;
  std::vector<double> mean; // distribution mean after the update
};

enum class CmaStop { MaxEvaluations, TargetLoss, TolFun, TolX, Condition };

const char* to_string(CmaStop s);

struct TuneResult {
  std::vector<double> best_params;
  double best_loss = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  std::vector<GenerationRecord> history;
  CmaStop stop = CmaStop::MaxEvaluations;
};

using Objective = std::function<double(const std::vector<double>&)>;

/// Minimizes `f`. Deterministic for a fixed seed regardless of
/// `parallel_evaluation`. Throws EvaluationError naming the point when f
/// returns a non-finite value.
TuneResult cma_minimize(const Objective& f, const CmaConfig& config);

}  // namespace equiplan
