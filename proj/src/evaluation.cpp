#include "equiplan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "equiplan/csv.hpp"
#include "equiplan/error.hpp"

namespace equiplan {

double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q) {
  if (values.size() != weights.size()) throw ValidationError("weighted_quantile: size mismatch");
  if (values.empty()) return 0.0;
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double target = q * total;
  double cum = 0.0;
  for (std::size_t i : idx) {
    cum += weights[i];
    if (cum >= target) return values[i];
  }
  return values[idx.back()];
}

TravelStats travel_stats(const Plan& plan, const DataBundle& bundle, const TravelTimeMatrix& matrix, double t_max,
                         double penalty_factor) {
  std::map<std::string, const Assignment*> by_district;
  for (const auto& a : plan.assignment) by_district[a.district_id] = &a;
  std::vector<double> t, w;
  for (const auto& d : bundle.districts) {
    const auto it = by_district.find(d.id);
    if (it == by_district.end()) throw ValidationError("plan has no assignment for district " + d.id);
    const Assignment& a = *it->second;
    double minutes = penalty_factor * t_max;
    if (!a.site_id.empty()) {
      const double m = matrix.minutes(d.id, a.site_id);
      if (m <= t_max) minutes = m;
    }
    t.push_back(minutes);
    w.push_back(d.latest_population());
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  TravelStats s;
  if (total > 0.0) {
    for (std::size_t i = 0; i < t.size(); ++i) s.mean += w[i] * t[i];
    s.mean /= total;
  }
  s.median = weighted_quantile(t, w, 0.5);
  s.p95 = weighted_quantile(t, w, 0.95);
  return s;
}

double gini_lorenz(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw ValidationError("gini_lorenz: size mismatch");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double total_w = 0.0, total_v = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0 || weights[i] < 0.0) throw ValidationError("gini_lorenz: negative input");
    total_w += weights[i];
    total_v += values[i] * weights[i];
  }
  if (total_v <= 0.0 || total_w <= 0.0) return 0.0;
  double area = 0.0, prev_l = 0.0;
  for (std::size_t i : idx) {
    const double dx = weights[i] / total_w;
    const double l = prev_l + values[i] * weights[i] / total_v;
    area += 0.5 * dx * (prev_l + l);
    prev_l = l;
  }
  return std::clamp(1.0 - 2.0 * area, 0.0, 1.0);
}

int over_served_count(std::span<const HfdrRecord> records, double tau) {
  return static_cast<int>(std::count_if(records.begin(), records.end(), [&](const HfdrRecord& r) {
    return !r.zero_demand && std::isfinite(r.hfdr) && r.hfdr > tau;
  }));
}

MetricsReport compute_metrics(const PipelineContext& ctx, const Plan& plan, const std::string& model, int k) {
  const DataBundle& bundle = *ctx.bundle;
  const auto& cfg = ctx.config;
  std::vector<Hospital> sites = bundle.hospitals;
  sites.insert(sites.end(), plan.opened_sites.begin(), plan.opened_sites.end());
  const auto matrix = site_matrix(bundle, plan.opened_sites, cfg.travel);

  MetricsReport r;
  r.model = model;
  r.k = k;
  const auto access = two_step_fca(bundle.districts, sites, matrix, cfg.problem.t_max);
  const auto equity = equity_index(bundle.districts, ctx.forecasts, access, cfg.vulnerability, cfg.conversion);
  r.equity_score = aggregate_equity(equity, ctx.populations);

  const auto ts = travel_stats(plan, bundle, matrix, cfg.problem.t_max, cfg.problem.penalty_factor);
  r.mean_tt = ts.mean;
  r.median_tt = ts.median;
  r.p95_tt = ts.p95;

  const auto ratios = hfdr(bundle.districts, sites, ctx.forecasts, cfg.conversion);
  r.hfdr_aggregate = hfdr_aggregate(ratios);
  r.over_served_count = over_served_count(ratios, cfg.over_served_threshold);

  std::vector<double> scores;
  for (const auto& a : access) scores.push_back(a.score);
  r.gini = gini_lorenz(scores, ctx.populations);

  // nearest open site regardless of threshold
  std::vector<double> nearest(bundle.districts.size(), std::numeric_limits<double>::infinity());
  for (std::size_t d = 0; d < bundle.districts.size(); ++d) {
    for (const auto& s : sites) nearest[d] = std::min(nearest[d], matrix.minutes(bundle.districts[d].id, s.id));
  }
  const double total = std::accumulate(ctx.populations.begin(), ctx.populations.end(), 0.0);
  auto share_within = [&](double band) {
    double covered = 0.0;
    for (std::size_t d = 0; d < nearest.size(); ++d) {
      if (nearest[d] <= band) covered += ctx.populations[d];
    }
    return total > 0.0 ? covered / total : 0.0;
  };
  r.accessibility_score = 1.0 - share_within(cfg.problem.t_max);
  r.coverage_bands = cfg.coverage_bands;
  for (double b : cfg.coverage_bands) r.coverage.push_back(share_within(b));
  return r;
}

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Main: return "main";
    case ModelKind::StatusQuo: return "status_quo";
    case ModelKind::PopulationWeighted: return "population_weighted";
    case ModelKind::AblationDemandOnly: return "ablation_demand";
    case ModelKind::AblationDeprivationOnly: return "ablation_deprivation";
    case ModelKind::AblationTravelOnly: return "ablation_travel";
  }
  return "unknown";
}

ModelKind parse_model(const std::string& name) {
  for (auto k : kAllModels) {
    if (name == to_string(k)) return k;
  }
  throw ValidationError("unknown model '" + name +
                        "' (expected main, status_quo, population_weighted, ablation_demand, "
                        "ablation_deprivation, ablation_travel)");
}

Plan population_weighted_plan(const PipelineContext& ctx, const PlanProblem& problem) {
  PlanProblem p = problem;
  p.theta = 0.0;
  p.weighting = DemandWeighting::Population;
  const auto inst = make_instance(p, ctx.candidates.sites, *ctx.bundle, ctx.matrix, ctx.equity, ctx.forecasts);
  if (p.k == 0) return make_plan(inst, p, {}, PlanMethod::PopulationWeighted);

  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < inst.n_candidates(); ++c) index[inst.candidates[c].id] = c;
  const auto& prov = ctx.candidates.provenance;
  std::vector<std::size_t> open;
  std::vector<bool> used(ctx.candidates.sites.size(), false);
  auto try_open = [&](std::size_t g) {
    const auto it = index.find(ctx.candidates.sites[g].id);
    if (it == index.end()) return false;
    for (std::size_t o : open) {
      if (inst.conflicts(o, it->second)) return false;
    }
    open.push_back(it->second);
    used[g] = true;
    return true;
  };
  // generation order already follows descending district population
  std::string last_district;
  bool district_done = false;
  for (std::size_t g = 0; g < ctx.candidates.sites.size() && open.size() < static_cast<std::size_t>(p.k); ++g) {
    if (prov[g].district_id != last_district) {
      last_district = prov[g].district_id;
      district_done = false;
    }
    if (!district_done) district_done = try_open(g);
  }
  for (std::size_t g = 0; g < ctx.candidates.sites.size() && open.size() < static_cast<std::size_t>(p.k); ++g) {
    if (!used[g]) try_open(g);
  }
  if (open.size() < static_cast<std::size_t>(p.k)) {
    throw SolverError(SolverError::Kind::Infeasible,
                      "only " + std::to_string(open.size()) + " separated candidates for K=" + std::to_string(p.k));
  }
  return make_plan(inst, p, std::move(open), PlanMethod::PopulationWeighted);
}

namespace {

PlannerWeights config_weights(const PipelineConfig& cfg) {
  PlannerWeights w;
  w.theta = cfg.problem.theta;
  w.alpha = cfg.vulnerability;
  w.ring_scale = cfg.candidates.ring_scale;
  return w;
}

Plan ablation_plan(const PipelineContext& ctx, PlanProblem p, DemandWeighting weighting,
                   const VulnerabilityWeights& alpha) {
  p.theta = 0.0;
  p.weighting = weighting;
  const auto equity = ctx.equity_for(alpha);
  const auto inst = make_instance(p, ctx.candidates.sites, *ctx.bundle, ctx.matrix, equity, ctx.forecasts);
  return solve(inst, p);
}

}  // namespace

ModelRun run_model(ModelKind kind, const PipelineContext& ctx, int k, const std::optional<PlannerWeights>& fixed) {
  if (k < 0) throw ValidationError("K must be >= 0");
  const auto& cfg = ctx.config;
  PlanProblem problem = cfg.problem;
  problem.k = k;
  ModelRun run;
  run.kind = kind;
  run.weights = config_weights(cfg);
  try {
    switch (kind) {
      case ModelKind::StatusQuo: {
        problem.k = 0;
        const auto inst = make_instance(problem, ctx.candidates.sites, *ctx.bundle, ctx.matrix, ctx.equity, ctx.forecasts);
        run.plan = make_plan(inst, problem, {}, PlanMethod::StatusQuo);
        break;
      }
      case ModelKind::PopulationWeighted: run.plan = population_weighted_plan(ctx, problem); break;
      case ModelKind::Main: {
        if (fixed) {
          run.weights = *fixed;
        } else if (k > 0 && !cfg.tune_params.empty() && cfg.tune_budget > 0) {
          std::vector<TunableParam> params;
          for (const auto& n : cfg.tune_params) params.push_back(parse_tunable(n));
          CmaConfig cma;
          cma.initial_sigma = cfg.tune_sigma;
          cma.max_evaluations = cfg.tune_budget;
          cma.seed = cfg.seed;
          run.tuning = tune_planner_weights(ctx, problem, params, run.weights, cma);
          run.weights = run.tuning->best;
        }
        run.plan = plan_with_weights(ctx, problem, run.weights);
        break;
      }
      case ModelKind::AblationDemandOnly:
        run.plan = ablation_plan(ctx, problem, DemandWeighting::Demand, cfg.vulnerability);
        break;
      case ModelKind::AblationDeprivationOnly:
        run.plan = ablation_plan(ctx, problem, DemandWeighting::Vulnerability, VulnerabilityWeights{1.0, 0.0});
        break;
      case ModelKind::AblationTravelOnly:
        run.plan = ablation_plan(ctx, problem, DemandWeighting::Population, cfg.vulnerability);
        break;
    }
  } catch (const StageError&) {
    throw;
  } catch (const ValidationError& e) {
    throw StageError("plan", e.what(), true);
  } catch (const std::exception& e) {
    throw StageError("plan", e.what(), false);
  }
  try {
    run.metrics = compute_metrics(ctx, run.plan, to_string(kind), k);
  } catch (const ValidationError& e) {
    throw StageError("evaluate", e.what(), true);
  } catch (const std::exception& e) {
    throw StageError("evaluate", e.what(), false);
  }
  return run;
}

ModelRun run_model(ModelKind kind, const DataBundle& bundle, int horizon, int k, PipelineConfig config) {
  config.horizon = horizon;
  const auto ctx = prepare_context(bundle, config);
  return run_model(kind, ctx, k);
}

std::vector<std::string> metric_columns(std::span<const double> coverage_bands) {
  std::vector<std::string> cols{"equity_score", "mean_tt", "median_tt", "p95_tt", "hfdr_aggregate",
                                "over_served_count", "gini", "accessibility_score"};
  for (double b : coverage_bands) cols.push_back("coverage_" + csv::format_double(b));
  return cols;
}

std::vector<double> metric_values(const MetricsReport& r) {
  std::vector<double> v{r.equity_score, r.mean_tt, r.median_tt, r.p95_tt, r.hfdr_aggregate,
                        static_cast<double>(r.over_served_count), r.gini, r.accessibility_score};
  v.insert(v.end(), r.coverage.begin(), r.coverage.end());
  return v;
}

namespace {

constexpr std::size_t kHfdrColumn = 4;
constexpr std::size_t kFirstCoverageColumn = 8;

void check_same_bands(std::span<const MetricsReport> reports) {
  for (const auto& r : reports) {
    if (r.coverage_bands != reports.front().coverage_bands) {
      throw ValidationError("reports use different coverage bands");
    }
  }
}

}  // namespace

std::vector<NormalizedRow> normalize_across_models(std::span<const MetricsReport> reports) {
  std::vector<NormalizedRow> rows;
  if (reports.empty()) return rows;
  check_same_bands(reports);
  const std::size_t m = metric_columns(reports.front().coverage_bands).size();
  std::vector<std::vector<double>> raw;
  for (const auto& r : reports) {
    auto v = metric_values(r);
    v[kHfdrColumn] = std::abs(v[kHfdrColumn] - 1.0);
    for (std::size_t j = kFirstCoverageColumn; j < m; ++j) v[j] = -v[j];
    raw.push_back(std::move(v));
    rows.push_back({r.model, std::vector<double>(m)});
  }
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> col;
    for (const auto& v : raw) col.push_back(v[j]);
    const auto norm = min_max(col, 0.5);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].values[j] = norm[i];
  }
  return rows;
}

std::string metrics_csv(std::span<const MetricsReport> reports) {
  std::ostringstream out;
  const auto cols = reports.empty() ? metric_columns(PipelineConfig{}.coverage_bands)
                                    : metric_columns(reports.front().coverage_bands);
  if (!reports.empty()) check_same_bands(reports);
  out << "model,k";
  for (const auto& c : cols) out << ',' << c;
  out << '\n';
  for (const auto& r : reports) {
    out << csv::escape(r.model) << ',' << r.k;
    const auto v = metric_values(r);
    for (std::size_t j = 0; j < v.size(); ++j) {
      out << ',' << (j == 5 ? std::to_string(r.over_served_count) : csv::format_double(v[j]));
    }
    out << '\n';
  }
  return out.str();
}

std::string metrics_norm_csv(std::span<const MetricsReport> reports) {
  std::ostringstream out;
  const auto cols = reports.empty() ? metric_columns(PipelineConfig{}.coverage_bands)
                                    : metric_columns(reports.front().coverage_bands);
  out << "model";
  for (const auto& c : cols) out << ',' << c;
  out << '\n';
  for (const auto& row : normalize_across_models(reports)) {
    out << csv::escape(row.model);
    for (double v : row.values) out << ',' << csv::format_double(v);
    out << '\n';
  }
  return out.str();
}

PipelineConfig config_for(const PipelineConfig& base, const ScenarioRequest& request) {
  PipelineConfig cfg = base;
  cfg.horizon = request.horizon;
  cfg.problem.k = request.k;
  if (request.t_max) cfg.problem.t_max = *request.t_max;
  if (request.min_separation_km) {
    cfg.problem.min_separation_km = *request.min_separation_km;
    cfg.candidates.min_separation_km = *request.min_separation_km;
  }
  if (request.beds_per_new_site) {
    cfg.problem.beds_per_new_site = *request.beds_per_new_site;
    cfg.candidates.beds = *request.beds_per_new_site;
  }
  if (request.seed) cfg.seed = *request.seed;
  return cfg;
}

ModelRun run_request(const DataBundle& bundle, const PipelineConfig& base, const ScenarioRequest& request) {
  if (request.k < 0) throw ValidationError("K must be >= 0");
  const auto cfg = config_for(base, request);
  const auto ctx = prepare_context(bundle, cfg);
  return run_model(request.model, ctx, request.k, request.weights);
}

}  // namespace equiplan
