#include "equiplan/pipeline.hpp"

#include <cmath>
#include <set>

#include "equiplan/error.hpp"
#include "equiplan/evaluation.hpp"

namespace equiplan {

void PipelineConfig::validate() const {
  travel.validate();
  candidates.validate();
  problem.validate();
  vulnerability.validate();
  conversion.validate();
  for (const auto& s : arima_grid) s.validate();
  if (!(over_served_threshold >= 0.0)) throw ConfigError("over-served threshold must be >= 0");
  if (coverage_bands.empty()) throw ConfigError("at least one coverage band is required");
  for (std::size_t i = 0; i < coverage_bands.size(); ++i) {
    if (!(coverage_bands[i] > 0.0)) throw ConfigError("coverage bands must be > 0");
    if (i > 0 && coverage_bands[i] <= coverage_bands[i - 1]) throw ConfigError("coverage bands must increase");
  }
  for (const auto& p : tune_params) parse_tunable(p);
  if (tune_budget < 0) throw ConfigError("tuning budget must be >= 0");
  if (!(tune_sigma > 0.0)) throw ConfigError("tuning sigma must be > 0");
}

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ValidationError& e) {
    throw StageError(name, e.what(), true);
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), false);
  }
}

}  // namespace

TravelTimeMatrix site_matrix(const DataBundle& bundle, std::span<const Hospital> extra, const TravelModel& travel) {
  std::vector<Hospital> sites(bundle.hospitals.begin(), bundle.hospitals.end());
  sites.insert(sites.end(), extra.begin(), extra.end());
  return build_matrix(bundle.districts, sites, travel, bundle.travel_override ? &*bundle.travel_override : nullptr);
}

std::vector<EquityRecord> PipelineContext::equity_for(const VulnerabilityWeights& weights) const {
  return equity_index(bundle->districts, forecasts, access, weights, config.conversion);
}

PipelineContext prepare_context(const DataBundle& bundle, const PipelineConfig& config) {
  stage("config", [&] {
    config.validate();
    return 0;
  });
  PipelineContext ctx;
  ctx.bundle = &bundle;
  ctx.config = config;
  ctx.populations = latest_populations(bundle.districts);
  ctx.forecasts = stage("forecast", [&] { return forecast_demand(bundle, config.horizon, config.arima_grid); });
  ctx.candidates = stage("candidates", [&] {
    auto opts = config.candidates;
    opts.min_separation_km = config.problem.min_separation_km;
    return generate_candidates(bundle, opts);
  });
  ctx.matrix = stage("matrix", [&] { return site_matrix(bundle, ctx.candidates.sites, config.travel); });
  stage("indices", [&] {
    ctx.access = two_step_fca(bundle.districts, bundle.hospitals, ctx.matrix, config.problem.t_max);
    ctx.equity = ctx.equity_for(config.vulnerability);
    ctx.hfdr = hfdr(bundle.districts, bundle.hospitals, ctx.forecasts, config.conversion);
    return 0;
  });
  return ctx;
}

TunableParam parse_tunable(const std::string& name) {
  if (name == "theta") return TunableParam::Theta;
  if (name == "alpha_dep") return TunableParam::AlphaDeprivation;
  if (name == "alpha_eld") return TunableParam::AlphaElderly;
  if (name == "ring_scale") return TunableParam::RingScale;
  throw ConfigError("unknown tunable parameter '" + name + "' (expected theta, alpha_dep, alpha_eld, ring_scale)");
}

const char* to_string(TunableParam p) {
  switch (p) {
    case TunableParam::Theta: return "theta";
    case TunableParam::AlphaDeprivation: return "alpha_dep";
    case TunableParam::AlphaElderly: return "alpha_eld";
    case TunableParam::RingScale: return "ring_scale";
  }
  return "unknown";
}

double softplus(double x) {
  // log(1 + e^x) without overflow
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw ConfigError("inverse softplus needs a positive value");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

PlannerWeights decode_weights(std::span<const double> x, std::span<const TunableParam> params,
                              const PlannerWeights& base) {
  if (x.size() != params.size()) throw ConfigError("tuning vector and parameter list differ in length");
  PlannerWeights w = base;
  double dep = base.alpha.deprivation, eld = base.alpha.elderly;
  bool alpha_tuned = false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double v = softplus(x[i]);
    switch (params[i]) {
      case TunableParam::Theta: w.theta = v; break;
      case TunableParam::RingScale: w.ring_scale = v; break;
      case TunableParam::AlphaDeprivation: dep = v; alpha_tuned = true; break;
      case TunableParam::AlphaElderly: eld = v; alpha_tuned = true; break;
    }
  }
  if (alpha_tuned) {
    const double s = dep + eld;
    w.alpha.deprivation = s > 0.0 ? dep / s : 0.5;
    w.alpha.elderly = 1.0 - w.alpha.deprivation;
  }
  return w;
}

std::vector<double> encode_weights(const PlannerWeights& w, std::span<const TunableParam> params) {
  // Zero weights have no finite preimage; start from a small positive value instead.
  constexpr double kFloor = 0.1;
  std::vector<double> x;
  for (auto p : params) {
    double v = 0.0;
    switch (p) {
      case TunableParam::Theta: v = w.theta; break;
      case TunableParam::RingScale: v = w.ring_scale; break;
      case TunableParam::AlphaDeprivation: v = w.alpha.deprivation; break;
      case TunableParam::AlphaElderly: v = w.alpha.elderly; break;
    }
    x.push_back(inverse_softplus(std::max(v, kFloor)));
  }
  return x;
}

Plan plan_with_weights(const PipelineContext& ctx, const PlanProblem& problem, const PlannerWeights& weights) {
  PlanProblem p = problem;
  p.theta = weights.theta;
  const auto equity = ctx.equity_for(weights.alpha);
  if (weights.ring_scale == ctx.config.candidates.ring_scale) {
    const auto inst = make_instance(p, ctx.candidates.sites, *ctx.bundle, ctx.matrix, equity, ctx.forecasts);
    return solve(inst, p);
  }
  auto opts = ctx.config.candidates;
  opts.ring_scale = weights.ring_scale;
  opts.min_separation_km = p.min_separation_km;
  const auto cands = generate_candidates(*ctx.bundle, opts);
  const auto matrix = site_matrix(*ctx.bundle, cands.sites, ctx.config.travel);
  const auto inst = make_instance(p, cands.sites, *ctx.bundle, matrix, equity, ctx.forecasts);
  return solve(inst, p);
}

double planner_loss(const PipelineContext& ctx, const PlanProblem& problem, const PlannerWeights& weights) {
  Plan plan;
  try {
    plan = plan_with_weights(ctx, problem, weights);
  } catch (const SolverError&) {
    return kInfeasibleLoss;
  } catch (const CandidateError&) {
    return kInfeasibleLoss;
  }
  const auto matrix = site_matrix(*ctx.bundle, plan.opened_sites, ctx.config.travel);
  return travel_stats(plan, *ctx.bundle, matrix, problem.t_max, problem.penalty_factor).mean;
}

WeightTuning tune_planner_weights(const PipelineContext& ctx, const PlanProblem& problem,
                                  std::span<const TunableParam> params, const PlannerWeights& baseline,
                                  const CmaConfig& config) {
  WeightTuning out;
  out.params.assign(params.begin(), params.end());
  std::set<TunableParam> unique(params.begin(), params.end());
  if (unique.size() != params.size()) throw ConfigError("tunable parameters listed twice");
  out.baseline = baseline;
  out.baseline_loss = planner_loss(ctx, problem, baseline);
  out.best = baseline;
  out.cma.best_loss = out.baseline_loss;
  out.cma.evaluations = 1;
  if (params.empty()) return out;

  CmaConfig cfg = config;
  if (cfg.initial_mean.size() != params.size()) cfg.initial_mean = encode_weights(baseline, params);
  cfg.max_evaluations = std::max(0, config.max_evaluations - 1);
  auto f = [&](const std::vector<double>& x) { return planner_loss(ctx, problem, decode_weights(x, params, baseline)); };
  if (cfg.max_evaluations >= cfg.resolved_population()) {
    auto res = cma_minimize(f, cfg);
    out.cma.history = res.history;
    out.cma.stop = res.stop;
    out.cma.evaluations += res.evaluations;
    if (res.best_loss < out.baseline_loss) {
      out.best = decode_weights(res.best_params, params, baseline);
      out.cma.best_params = res.best_params;
    }
  }
  // reported loss is a fresh evaluation at the chosen weights
  out.cma.best_loss = planner_loss(ctx, problem, out.best);
  return out;
}

}  // namespace equiplan
