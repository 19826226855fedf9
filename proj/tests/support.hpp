#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <unistd.h>

#include "equiplan/geo.hpp"
#include "equiplan/indices.hpp"
#include "equiplan/ingest.hpp"
#include "equiplan/planner.hpp"
#include "equiplan/random.hpp"

namespace testing {

using namespace equiplan;

inline std::string fixture_dir() { return std::string(EQUIPLAN_SOURCE_DIR) + "/data/fixture"; }

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("equiplan-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline District make_district(std::string id, LatLon c, double pop, double elderly = 0.2, double dep = 0.5) {
  District d;
  d.id = id;
  d.name = "District " + id;
  d.centroid = c;
  d.population_history = {{2022, pop}};
  d.inpatient_history = {{2022, 0.2 * pop}};
  d.elderly_share = elderly;
  d.deprivation = dep;
  return d;
}

inline Hospital make_site(std::string id, LatLon p, int beds, SiteStatus s = SiteStatus::Existing) {
  Hospital h;
  h.id = id;
  h.name = "Site " + id;
  h.location = p;
  h.beds = beds;
  h.status = s;
  return h;
}

inline DemandForecast flat_forecast(const std::string& id, double admissions) {
  DemandForecast f;
  f.district_id = id;
  f.horizon_years = {2030};
  f.point_forecast = {admissions};
  f.per_capita_forecast = {0.0};
  f.population_forecast = {0.0};
  return f;
}

inline LatLon random_point(Rng& rng) { return {rng.uniform(49.1, 49.6), rng.uniform(6.5, 7.3)}; }

/// A random siting problem with every input the planner needs.
struct PlanningCase {
  DataBundle bundle;
  std::vector<Hospital> candidates;
  TravelTimeMatrix matrix;
  ForecastTable forecasts;
  std::vector<EquityRecord> equity;
  PlanProblem problem;
  SitingInstance inst;
};

inline PlanningCase random_case(Rng& rng, int max_candidates = 12, int max_k = 3) {
  PlanningCase pc;
  const int nd = 3 + static_cast<int>(rng.uniform() * 6);
  const int ne = 1 + static_cast<int>(rng.uniform() * 3);
  const int nc = std::max(max_k, 4 + static_cast<int>(rng.uniform() * (max_candidates - 3)));
  for (int i = 0; i < nd; ++i) {
    const std::string id = "D" + std::to_string(i);
    pc.bundle.districts.push_back(make_district(id, random_point(rng), std::round(rng.uniform(1e4, 3e5))));
    pc.forecasts[id] = flat_forecast(id, std::round(rng.uniform(1e3, 6e4)));
    EquityRecord r;
    r.district_id = id;
    r.vulnerability = rng.uniform();
    r.equity_index = rng.uniform();
    pc.equity.push_back(r);
  }
  for (int e = 0; e < ne; ++e) {
    pc.bundle.hospitals.push_back(make_site("E" + std::to_string(e), random_point(rng), 100 + e));
  }
  for (int c = 0; c < std::min(nc, max_candidates); ++c) {
    pc.candidates.push_back(
        make_site("C" + std::string(c < 10 ? "0" : "") + std::to_string(c), random_point(rng), 200, SiteStatus::Candidate));
  }
  const double t_maxes[] = {20.0, 30.0, 45.0};
  pc.problem.t_max = t_maxes[static_cast<int>(rng.uniform() * 3)];
  pc.problem.k = 1 + static_cast<int>(rng.uniform() * max_k);
  pc.problem.min_separation_km = rng.uniform() < 0.3 ? 0.0 : rng.uniform(2.0, 12.0);
  pc.problem.theta = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 3.0);
  std::vector<Hospital> sites = pc.bundle.hospitals;
  sites.insert(sites.end(), pc.candidates.begin(), pc.candidates.end());
  pc.matrix = build_matrix(pc.bundle.districts, sites, TravelModel{});
  pc.inst = make_instance(pc.problem, pc.candidates, pc.bundle, pc.matrix, pc.equity, pc.forecasts);
  return pc;
}

struct OracleResult {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<std::string> ids;  // sorted
};

/// Bitmask enumeration over every K-subset. Separation is recomputed with
/// haversine and minutes are read from the matrix by id.
inline OracleResult brute_force(const PlanningCase& pc) {
  const auto& inst = pc.inst;
  const auto& p = pc.problem;
  const std::size_t n = inst.candidates.size();
  OracleResult best;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != p.k) continue;
    std::vector<const Hospital*> open;
    for (std::size_t c = 0; c < n; ++c) {
      if (mask & (1u << c)) open.push_back(&inst.candidates[c]);
    }
    bool separated = true;
    for (std::size_t a = 0; a < open.size(); ++a) {
      for (std::size_t b = a + 1; b < open.size(); ++b) {
        if (haversine_km(open[a]->location, open[b]->location) < p.min_separation_km) separated = false;
      }
    }
    if (!separated) continue;
    double obj = 0.0;
    for (std::size_t d = 0; d < inst.district_ids.size(); ++d) {
      double t = std::numeric_limits<double>::infinity();
      auto consider = [&](const std::string& site) {
        const double m = pc.matrix.minutes(inst.district_ids[d], site);
        if (m <= p.t_max) t = std::min(t, m);
      };
      for (const auto& h : pc.bundle.hospitals) consider(h.id);
      for (const auto* h : open) consider(h->id);
      if (!std::isfinite(t)) t = p.penalty_factor * p.t_max;
      obj += inst.weight[d] * (1.0 + p.theta * inst.equity[d]) * t;
    }
    std::vector<std::string> ids;
    for (const auto* h : open) ids.push_back(h->id);
    std::sort(ids.begin(), ids.end());
    if (!best.feasible || obj < best.objective || (obj == best.objective && ids < best.ids)) {
      best.feasible = true;
      best.objective = obj;
      best.ids = ids;
    }
  }
  return best;
}

}  // namespace testing
