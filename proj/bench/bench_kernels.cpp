// Serial reference vs OpenMP kernels on a synthetic region.
#include <benchmark/benchmark.h>

#include "equiplan/geo.hpp"
#include "equiplan/indices.hpp"
#include "equiplan/planner.hpp"
#include "equiplan/random.hpp"

namespace {

using namespace equiplan;

struct Region {
  std::vector<District> districts;
  std::vector<Hospital> existing;
  std::vector<Hospital> candidates;
  std::vector<Hospital> all_sites;
  TravelTimeMatrix matrix;
  ForecastTable forecasts;
  std::vector<EquityRecord> equity;
  PlanProblem problem;
  SitingInstance inst;
};

LatLon point(Rng& rng) { return {rng.uniform(49.1, 49.6), rng.uniform(6.5, 7.3)}; }

Region make_region(int n_districts, int n_existing, int n_candidates, int k) {
  Rng rng(7);
  Region r;
  for (int i = 0; i < n_districts; ++i) {
    District d;
    d.id = "D" + std::to_string(i);
    d.name = d.id;
    d.centroid = point(rng);
    const double pop = std::round(rng.uniform(1e4, 3e5));
    d.population_history = {{2022, pop}};
    d.inpatient_history = {{2022, 0.2 * pop}};
    d.elderly_share = rng.uniform(0.15, 0.3);
    d.deprivation = rng.uniform();
    DemandForecast f;
    f.district_id = d.id;
    f.horizon_years = {2030};
    f.point_forecast = {0.2 * pop};
    f.per_capita_forecast = {0.2};
    f.population_forecast = {pop};
    r.forecasts[d.id] = f;
    EquityRecord e;
    e.district_id = d.id;
    e.vulnerability = rng.uniform();
    e.equity_index = rng.uniform();
    r.equity.push_back(e);
    r.districts.push_back(std::move(d));
  }
  auto site = [&](std::string id, SiteStatus s) {
    Hospital h;
    h.id = std::move(id);
    h.name = h.id;
    h.location = point(rng);
    h.beds = 100 + static_cast<int>(rng.uniform() * 400);
    h.status = s;
    return h;
  };
  for (int i = 0; i < n_existing; ++i) r.existing.push_back(site("H" + std::to_string(1000 + i), SiteStatus::Existing));
  for (int i = 0; i < n_candidates; ++i) r.candidates.push_back(site("C" + std::to_string(1000 + i), SiteStatus::Candidate));
  r.all_sites = r.existing;
  r.all_sites.insert(r.all_sites.end(), r.candidates.begin(), r.candidates.end());
  r.matrix = build_matrix(r.districts, r.all_sites, TravelModel{});
  r.problem.k = k;
  r.problem.min_separation_km = 0.0;
  r.problem.enumeration_budget = 10'000'000;
  DataBundle bundle;
  bundle.districts = r.districts;
  bundle.hospitals = r.existing;
  r.inst = make_instance(r.problem, r.candidates, bundle, r.matrix, r.equity, r.forecasts);
  return r;
}

const Region& region() {
  static const Region r = make_region(400, 60, 40, 3);
  return r;
}

void BM_BuildMatrix_Serial(benchmark::State& st) {
  const auto& r = region();
  for (auto _ : st) benchmark::DoNotOptimize(serial::build_matrix(r.districts, r.all_sites, TravelModel{}));
}
void BM_BuildMatrix_Parallel(benchmark::State& st) {
  const auto& r = region();
  for (auto _ : st) benchmark::DoNotOptimize(build_matrix(r.districts, r.all_sites, TravelModel{}));
}

void BM_TwoStepFca_Serial(benchmark::State& st) {
  const auto& r = region();
  for (auto _ : st) benchmark::DoNotOptimize(serial::two_step_fca(r.districts, r.existing, r.matrix, 30.0));
}
void BM_TwoStepFca_Parallel(benchmark::State& st) {
  const auto& r = region();
  for (auto _ : st) benchmark::DoNotOptimize(two_step_fca(r.districts, r.existing, r.matrix, 30.0));
}

void BM_SolveExact_Serial(benchmark::State& st) {
  const auto& r = region();
  for (auto _ : st) benchmark::DoNotOptimize(serial::solve_exact(r.inst, r.problem));
}
void BM_SolveExact_Parallel(benchmark::State& st) {
  const auto& r = region();
  for (auto _ : st) benchmark::DoNotOptimize(solve_exact(r.inst, r.problem));
}

void BM_SolveHeuristic_Serial(benchmark::State& st) {
  const auto& r = region();
  for (auto _ : st) benchmark::DoNotOptimize(serial::solve_heuristic(r.inst, r.problem));
}
void BM_SolveHeuristic_Parallel(benchmark::State& st) {
  const auto& r = region();
  for (auto _ : st) benchmark::DoNotOptimize(solve_heuristic(r.inst, r.problem));
}

}  // namespace

BENCHMARK(BM_BuildMatrix_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildMatrix_Parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_TwoStepFca_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TwoStepFca_Parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SolveExact_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolveExact_Parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SolveHeuristic_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolveHeuristic_Parallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
