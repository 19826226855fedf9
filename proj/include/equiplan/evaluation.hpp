#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "equiplan/pipeline.hpp"
#include "equiplan/planner.hpp"

namespace equiplan {

struct MetricsReport {
  std::string model;
  int k = 0;
  double equity_score = 0.0;
  double mean_tt = 0.0;
  double median_tt = 0.0;
  double p95_tt = 0.0;
  double hfdr_aggregate = 0.0;
  int over_served_count = 0;
  double gini = 0.0;
  // Population share with no open site within t_max. Higher is worse.
  double accessibility_score = 0.0;
  std::vector<double> coverage_bands;  // minutes
  std::vector<double> coverage;        // population share within each band

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

struct TravelStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
};

/// Smallest value whose cumulative weight reaches q of the total.
double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q);

/// Population-weighted travel statistics of the plan's assignments. Minutes
/// are re-read from `matrix`; unassigned districts count as penalty_factor * t_max.
TravelStats travel_stats(const Plan& plan, const DataBundle& bundle, const TravelTimeMatrix& matrix,
                         double t_max, double penalty_factor = 10.0);

/// Gini from the Lorenz curve of value*weight against weight, districts
/// sorted by value. All-zero values give 0.
double gini_lorenz(std::span<const double> values, std::span<const double> weights);

/// Districts with a finite ratio strictly above `tau`.
int over_served_count(std::span<const HfdrRecord> records, double tau);

/// Six-metric report for `plan` with the existing hospitals plus its opened sites.
MetricsReport compute_metrics(const PipelineContext& ctx, const Plan& plan, const std::string& model, int k);

enum class ModelKind {
  Main,
  StatusQuo,
  PopulationWeighted,
  AblationDemandOnly,
  AblationDeprivationOnly,
  AblationTravelOnly,
};

inline constexpr ModelKind kAllModels[] = {
    ModelKind::Main,
    ModelKind::StatusQuo,
    ModelKind::PopulationWeighted,
    ModelKind::AblationDemandOnly,
    ModelKind::AblationDeprivationOnly,
    ModelKind::AblationTravelOnly,
};

const char* to_string(ModelKind k);
ModelKind parse_model(const std::string& name);

/// Opens K candidates following districts in descending population order,
/// one per district, skipping candidates that break separation. A second
/// pass over the remaining candidates fills K when districts run out.
Plan population_weighted_plan(const PipelineContext& ctx, const PlanProblem& problem);

struct ModelRun {
  ModelKind kind = ModelKind::StatusQuo;
  Plan plan;
  MetricsReport metrics;
  std::optional<WeightTuning> tuning;  // Main with K > 0 and no fixed weights
  PlannerWeights weights;              // weights the planner ran with
};

/// Runs one model. For Main, `fixed` skips tuning and plans with those weights.
ModelRun run_model(ModelKind kind, const PipelineContext& ctx, int k,
                   const std::optional<PlannerWeights>& fixed = std::nullopt);

/// Convenience overload that prepares the context first.
ModelRun run_model(ModelKind kind, const DataBundle& bundle, int horizon, int k, PipelineConfig config);

/// Metric columns of the comparison table, in output order.
std::vector<std::string> metric_columns(std::span<const double> coverage_bands);

/// Raw metric values in metric_columns order.
std::vector<double> metric_values(const MetricsReport& r);

struct NormalizedRow {
  std::string model;
  std::vector<double> values;  // 0 = best within the compared set
};

/// Per-metric min-max across reports, oriented so 0 is best. Coverage is
/// higher-better; hfdr_aggregate is scored by its distance from 1. A column
/// whose values are all equal maps to 0.5.
std::vector<NormalizedRow> normalize_across_models(std::span<const MetricsReport> reports);

/// `model,k,<metric columns>` with one row per report.
std::string metrics_csv(std::span<const MetricsReport> reports);
std::string metrics_norm_csv(std::span<const MetricsReport> reports);

/// One run as requested by the CLI or the HTTP service.
struct ScenarioRequest {
  ModelKind model = ModelKind::StatusQuo;
  int k = 0;
  int horizon = 2030;
  std::optional<PlannerWeights> weights;
  std::optional<double> t_max;
  std::optional<double> min_separation_km;
  std::optional<int> beds_per_new_site;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const ScenarioRequest&, const ScenarioRequest&) = default;
};

/// `base` with the request's horizon, seed and constraints applied.
PipelineConfig config_for(const PipelineConfig& base, const ScenarioRequest& request);

ModelRun run_request(const DataBundle& bundle, const PipelineConfig& base, const ScenarioRequest& request);

}  // namespace equiplan
