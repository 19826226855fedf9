#pragma once

#include <optional>
#include <string>
#include <vector>

#include "equiplan/cmaes.hpp"
#include "equiplan/forecast.hpp"
#include "equiplan/geo.hpp"
#include "equiplan/indices.hpp"
#include "equiplan/ingest.hpp"
#include "equiplan/planner.hpp"

namespace equiplan {

/// Every knob of the end-to-end run. Defaults are placeholders where the
/// method leaves values open (speed, separation, bed conversion, tau).
struct PipelineConfig {
  int horizon = 2030;
  std::vector<ArimaSpec> arima_grid = default_arima_grid();
  TravelModel travel;
  CandidateOptions candidates;
  PlanProblem problem;                  // k, t_max, separation, theta, beds, penalty
  VulnerabilityWeights vulnerability;   // used for the reported equity score
  BedConversion conversion;
  double over_served_threshold = 1.25;
  std::vector<double> coverage_bands{15.0, 30.0, 45.0};
  // weight tuning used by the main model
  std::vector<std::string> tune_params{"theta"};
  int tune_budget = 60;
  double tune_sigma = 1.0;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Inputs shared by every model run on one bundle: forecasts, candidates,
/// the district x (existing + candidate) travel matrix and status-quo indices.
struct PipelineContext {
  const DataBundle* bundle = nullptr;
  PipelineConfig config;
  ForecastTable forecasts;
  CandidateSet candidates;
  TravelTimeMatrix matrix;
  std::vector<double> populations;
  std::vector<AccessScore> access;        // existing hospitals only
  std::vector<EquityRecord> equity;       // with config.vulnerability
  std::vector<HfdrRecord> hfdr;           // existing hospitals only

  /// Status-quo indices for `vulnerability` weights (access is unchanged).
  std::vector<EquityRecord> equity_for(const VulnerabilityWeights& weights) const;
};

/// Runs forecast and index stages. Errors are rethrown as StageError with the
/// stage label ("forecast", "candidates", "matrix", "indices").
PipelineContext prepare_context(const DataBundle& bundle, const PipelineConfig& config);

/// Travel matrix over existing hospitals plus `extra` sites.
TravelTimeMatrix site_matrix(const DataBundle& bundle, std::span<const Hospital> extra, const TravelModel& travel);

enum class TunableParam { Theta, AlphaDeprivation, AlphaElderly, RingScale };

TunableParam parse_tunable(const std::string& name);
const char* to_string(TunableParam p);

/// Concrete planner weights (decoded tuning vector).
struct PlannerWeights {
  double theta = 0.0;
  VulnerabilityWeights alpha;
  double ring_scale = 1.0;

  friend bool operator==(const PlannerWeights&, const PlannerWeights&) = default;
};

/// Softplus-based map from R^n to weights; untuned entries keep `base` values
/// and the alpha pair is renormalized to sum to 1.
PlannerWeights decode_weights(std::span<const double> x, std::span<const TunableParam> params,
                              const PlannerWeights& base);
std::vector<double> encode_weights(const PlannerWeights& w, std::span<const TunableParam> params);

double softplus(double x);
double inverse_softplus(double y);

/// Plan produced by the planner under `weights` (exact when within budget,
/// heuristic otherwise).
Plan plan_with_weights(const PipelineContext& ctx, const PlanProblem& problem, const PlannerWeights& weights);

inline constexpr double kInfeasibleLoss = 1e6;

/// Population-weighted mean travel minutes of the plan produced under
/// `weights`; kInfeasibleLoss when the planner reports infeasibility.
double planner_loss(const PipelineContext& ctx, const PlanProblem& problem, const PlannerWeights& weights);

struct WeightTuning {
  std::vector<TunableParam> params;
  PlannerWeights best;
  PlannerWeights baseline;
  double baseline_loss = 0.0;
  TuneResult cma;  // best_params holds the raw vector; best_loss is re-evaluated at `best`
};

/// CMA-ES over the selected weights with planner_loss as objective. The
/// untuned baseline is evaluated first and kept if nothing beats it.
WeightTuning tune_planner_weights(const PipelineContext& ctx, const PlanProblem& problem,
                                  std::span<const TunableParam> params, const PlannerWeights& baseline,
                                  const CmaConfig& config);

}  // namespace equiplan
