#include "equiplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "equiplan/error.hpp"

namespace equiplan {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void CandidateOptions::validate() const {
  if (per_district < 1) throw ConfigError("candidates per district must be >= 1");
  if (rings_km.empty()) throw ConfigError("at least one candidate ring is required");
  for (double r : rings_km) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("ring radii must be finite and >= 0");
  }
  if (bearings < 1) throw ConfigError("bearings per ring must be >= 1");
  if (!(ring_scale > 0.0) || !std::isfinite(ring_scale)) throw ConfigError("ring scale must be > 0");
  if (!(min_separation_km >= 0.0)) throw ConfigError("minimum separation must be >= 0");
  if (beds < 0) throw ConfigError("candidate beds must be >= 0");
}

CandidateSet generate_candidates(const DataBundle& bundle, const CandidateOptions& options) {
  options.validate();
  std::vector<const District*> order;
  for (const auto& d : bundle.districts) order.push_back(&d);
  std::stable_sort(order.begin(), order.end(), [](const District* a, const District* b) {
    return a->latest_population() > b->latest_population();
  });

  CandidateSet out;
  for (const auto* d : order) {
    int kept = 0;
    for (double ring : options.rings_km) {
      const double r = ring * options.ring_scale;
      const int n = r == 0.0 ? 1 : options.bearings;
      for (int b = 0; b < n && kept < options.per_district; ++b) {
        const double bearing = r == 0.0 ? 0.0 : 360.0 * b / options.bearings;
        const LatLon p = r == 0.0 ? d->centroid : destination_point(d->centroid, bearing, r);
        const bool too_close = std::any_of(bundle.hospitals.begin(), bundle.hospitals.end(), [&](const Hospital& h) {
          return haversine_km(p, h.location) < options.min_separation_km;
        });
        if (too_close) continue;
        ++kept;
        Hospital h;
        h.id = d->id + "-c" + std::to_string(kept);
        h.name = "Candidate " + std::to_string(kept) + " near " + d->name;
        h.location = p;
        h.beds = options.beds;
        h.status = SiteStatus::Candidate;
        out.sites.push_back(std::move(h));
        out.provenance.push_back({d->id, r, bearing});
      }
    }
  }
  if (out.sites.empty()) throw CandidateError();
  return out;
}

const char* to_string(DemandWeighting w) {
  switch (w) {
    case DemandWeighting::Demand: return "demand";
    case DemandWeighting::Vulnerability: return "vulnerability";
    case DemandWeighting::Population: return "population";
  }
  return "unknown";
}

const char* to_string(PlanMethod m) {
  switch (m) {
    case PlanMethod::StatusQuo: return "status_quo";
    case PlanMethod::Exact: return "exact";
    case PlanMethod::Heuristic: return "heuristic";
    case PlanMethod::PopulationWeighted: return "population_weighted";
  }
  return "unknown";
}

void PlanProblem::validate() const {
  if (k < 0) throw ConfigError("K must be >= 0");
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ConfigError("t_max must be > 0");
  if (!(min_separation_km >= 0.0) || !std::isfinite(min_separation_km)) throw ConfigError("min separation must be >= 0");
  if (!(theta >= 0.0) || !std::isfinite(theta)) throw ConfigError("theta must be >= 0");
  if (beds_per_new_site < 0) throw ConfigError("beds per new site must be >= 0");
  if (!(penalty_factor >= 1.0) || !std::isfinite(penalty_factor)) throw ConfigError("penalty factor must be >= 1");
}

SitingInstance make_instance(const PlanProblem& problem, std::span<const Hospital> candidates,
                             const DataBundle& bundle, const TravelTimeMatrix& matrix,
                             std::span<const EquityRecord> equity, const ForecastTable& forecasts) {
  problem.validate();
  SitingInstance inst;
  std::map<std::string, const EquityRecord*> eq;
  for (const auto& r : equity) eq[r.district_id] = &r;
  std::vector<std::size_t> rows;
  for (const auto& d : bundle.districts) {
    inst.district_ids.push_back(d.id);
    auto r = matrix.district_index(d.id);
    if (!r) throw ValidationError("district " + d.id + " missing from travel matrix");
    rows.push_back(*r);
    auto e = eq.find(d.id);
    if (e == eq.end()) throw ValidationError("no equity record for district " + d.id);
    inst.equity.push_back(e->second->equity_index);
    switch (problem.weighting) {
      case DemandWeighting::Demand: {
        auto f = forecasts.find(d.id);
        if (f == forecasts.end()) throw ValidationError("no forecast for district " + d.id);
        inst.weight.push_back(f->second.mean_admissions());
        break;
      }
      case DemandWeighting::Vulnerability: inst.weight.push_back(e->second->vulnerability); break;
      case DemandWeighting::Population: inst.weight.push_back(d.latest_population()); break;
    }
  }
  inst.existing.assign(bundle.hospitals.begin(), bundle.hospitals.end());
  std::set<std::string> ids;
  for (const auto& h : inst.existing) ids.insert(h.id);
  for (const auto& c : candidates) {
    if (!ids.insert(c.id).second) throw ValidationError("duplicate site id " + c.id);
    const bool too_close = std::any_of(inst.existing.begin(), inst.existing.end(), [&](const Hospital& h) {
      return haversine_km(c.location, h.location) < problem.min_separation_km;
    });
    if (!too_close) inst.candidates.push_back(c);
  }
  std::sort(inst.candidates.begin(), inst.candidates.end(),
            [](const Hospital& a, const Hospital& b) { return a.id < b.id; });

  auto fill = [&](const std::vector<Hospital>& sites, std::vector<double>& out) {
    out.resize(rows.size() * sites.size());
    for (std::size_t j = 0; j < sites.size(); ++j) {
      auto c = matrix.site_index(sites[j].id);
      if (!c) throw ValidationError("site " + sites[j].id + " missing from travel matrix");
      for (std::size_t i = 0; i < rows.size(); ++i) out[i * sites.size() + j] = matrix.at(rows[i], *c);
    }
  };
  fill(inst.existing, inst.existing_minutes);
  fill(inst.candidates, inst.candidate_minutes);

  const std::size_t nc = inst.candidates.size();
  inst.conflict.assign(nc * nc, 0);
  for (std::size_t a = 0; a < nc; ++a) {
    for (std::size_t b = a + 1; b < nc; ++b) {
      const bool close = haversine_km(inst.candidates[a].location, inst.candidates[b].location) < problem.min_separation_km;
      inst.conflict[a * nc + b] = inst.conflict[b * nc + a] = close ? 1 : 0;
    }
  }
  return inst;
}

namespace {

// Minutes to the nearest reachable existing site per district (inf if none).
std::vector<double> base_minutes(const SitingInstance& inst, double t_max) {
  std::vector<double> base(inst.n_districts(), kInf);
  for (std::size_t d = 0; d < inst.n_districts(); ++d) {
    for (std::size_t e = 0; e < inst.existing.size(); ++e) {
      const double t = inst.exist_minutes(d, e);
      if (t <= t_max && t < base[d]) base[d] = t;
    }
  }
  return base;
}

// Shared by every solver path so objective values agree bit for bit.
double combine(const SitingInstance& inst, const PlanProblem& problem, std::span<const double> best) {
  const double penalty = problem.penalty_minutes();
  double obj = 0.0;
  for (std::size_t d = 0; d < best.size(); ++d) {
    const double t = std::isfinite(best[d]) ? best[d] : penalty;
    obj += inst.weight[d] * (1.0 + problem.theta * inst.equity[d]) * t;
  }
  return obj;
}

bool lex_less(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

bool compatible(const SitingInstance& inst, std::span<const std::size_t> open, std::size_t c) {
  return std::none_of(open.begin(), open.end(), [&](std::size_t o) { return o == c || inst.conflicts(o, c); });
}

void check_k(const SitingInstance& inst, const PlanProblem& problem) {
  problem.validate();
  if (static_cast<std::size_t>(problem.k) > inst.n_candidates()) {
    throw SolverError(SolverError::Kind::Infeasible, "K=" + std::to_string(problem.k) + " exceeds the " +
                                                         std::to_string(inst.n_candidates()) + " feasible candidates");
  }
}

struct Best {
  double objective = kInf;
  std::vector<std::size_t> open;
  std::uint64_t evaluated = 0;

  void offer(double obj, std::span<const std::size_t> cand) {
    if (obj < objective || (obj == objective && lex_less(cand, open))) {
      objective = obj;
      open.assign(cand.begin(), cand.end());
    }
  }
};

// Depth-first enumeration of conflict-free subsets that extend `open`, in
// lexicographic index order, keeping per-depth nearest-time arrays.
void enumerate(const SitingInstance& inst, const PlanProblem& problem, std::vector<std::size_t>& open,
               std::vector<std::vector<double>>& levels, std::size_t next, Best& best) {
  const std::size_t depth = open.size();
  if (depth == static_cast<std::size_t>(problem.k)) {
    ++best.evaluated;
    best.offer(combine(inst, problem, levels[depth]), open);
    return;
  }
  const std::size_t remaining = static_cast<std::size_t>(problem.k) - depth;
  for (std::size_t c = next; c + remaining <= inst.n_candidates(); ++c) {
    if (!compatible(inst, open, c)) continue;
    auto& cur = levels[depth + 1];
    const auto& prev = levels[depth];
    for (std::size_t d = 0; d < inst.n_districts(); ++d) {
      const double t = inst.cand_minutes(d, c);
      cur[d] = (t <= problem.t_max && t < prev[d]) ? t : prev[d];
    }
    open.push_back(c);
    enumerate(inst, problem, open, levels, c + 1, best);
    open.pop_back();
  }
}

double min_pair_km(const std::vector<Hospital>& opened, std::span<const Hospital> existing) {
  double m = kInf;
  for (std::size_t a = 0; a < opened.size(); ++a) {
    for (std::size_t b = a + 1; b < opened.size(); ++b) m = std::min(m, haversine_km(opened[a].location, opened[b].location));
    for (const auto& e : existing) m = std::min(m, haversine_km(opened[a].location, e.location));
  }
  return m;
}

}  // namespace

double siting_objective(const SitingInstance& inst, const PlanProblem& problem, std::span<const std::size_t> open) {
  auto best = base_minutes(inst, problem.t_max);
  for (std::size_t c : open) {
    for (std::size_t d = 0; d < inst.n_districts(); ++d) {
      const double t = inst.cand_minutes(d, c);
      if (t <= problem.t_max && t < best[d]) best[d] = t;
    }
  }
  return combine(inst, problem, best);
}

Plan make_plan(const SitingInstance& inst, const PlanProblem& problem, std::vector<std::size_t> open,
               PlanMethod method) {
  std::sort(open.begin(), open.end());
  Plan plan;
  plan.method = method;
  bool separated = true;
  for (std::size_t a = 0; a < open.size(); ++a) {
    for (std::size_t b = a + 1; b < open.size(); ++b) {
      if (open[a] == open[b] || inst.conflicts(open[a], open[b])) separated = false;
    }
    Hospital h = inst.candidates[open[a]];
    h.status = SiteStatus::Proposed;
    h.beds = problem.beds_per_new_site;
    plan.opened.push_back(h.id);
    plan.opened_sites.push_back(std::move(h));
  }
  auto& diag = plan.diagnostics;
  diag.penalty_minutes = problem.penalty_minutes();
  bool all_within = true;
  for (std::size_t d = 0; d < inst.n_districts(); ++d) {
    double best_t = kInf;
    const std::string* best_id = nullptr;
    auto consider = [&](double t, const std::string& id) {
      if (t < best_t || (t == best_t && best_id && id < *best_id)) {
        best_t = t;
        best_id = &id;
      }
    };
    for (std::size_t e = 0; e < inst.existing.size(); ++e) consider(inst.exist_minutes(d, e), inst.existing[e].id);
    for (std::size_t c : open) consider(inst.cand_minutes(d, c), inst.candidates[c].id);
    Assignment a;
    a.district_id = inst.district_ids[d];
    if (best_id) {
      a.site_id = *best_id;
      a.minutes = best_t;
    }
    a.within_threshold = best_id && best_t <= problem.t_max;
    if (a.within_threshold) {
      diag.max_assigned_minutes = std::max(diag.max_assigned_minutes, a.minutes);
    } else {
      ++diag.unassigned;
      all_within = false;
    }
    plan.assignment.push_back(std::move(a));
  }
  diag.t_max_slack = problem.t_max - diag.max_assigned_minutes;
  diag.min_separation_km = min_pair_km(plan.opened_sites, inst.existing);
  diag.separation_slack_km = diag.min_separation_km - problem.min_separation_km;
  separated = separated && !(diag.min_separation_km < problem.min_separation_km);
  plan.objective = siting_objective(inst, problem, open);
  plan.feasible = all_within && separated;
  return plan;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}

Plan solve_exact(const SitingInstance& inst, const PlanProblem& problem) {
  check_k(inst, problem);
  const auto k = static_cast<std::size_t>(problem.k);
  const std::size_t nc = inst.n_candidates();
  if (binomial(nc, k) > problem.enumeration_budget) {
    throw SolverError(SolverError::Kind::UseHeuristic,
                      "C(" + std::to_string(nc) + "," + std::to_string(k) + ") exceeds the enumeration budget");
  }
  const auto base = base_minutes(inst, problem.t_max);
  if (k == 0) {
    auto plan = make_plan(inst, problem, {}, PlanMethod::Exact);
    plan.diagnostics.subsets_evaluated = 1;
    return plan;
  }

  // Partition by first element; each task enumerates its subtree in lex order.
  const std::size_t tasks = nc - k + 1;
  std::vector<Best> partial(tasks);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tasks); ++t) {
    const auto first = static_cast<std::size_t>(t);
    std::vector<std::vector<double>> levels(k + 1, base);
    std::vector<std::size_t> open{first};
    for (std::size_t d = 0; d < inst.n_districts(); ++d) {
      const double tt = inst.cand_minutes(d, first);
      levels[1][d] = (tt <= problem.t_max && tt < base[d]) ? tt : base[d];
    }
    enumerate(inst, problem, open, levels, first + 1, partial[first]);
  }
  Best best;
  for (const auto& p : partial) {
    best.evaluated += p.evaluated;
    if (!p.open.empty()) best.offer(p.objective, p.open);
  }
  if (best.open.empty()) {
    throw SolverError(SolverError::Kind::Infeasible,
                      "no set of " + std::to_string(k) + " candidates satisfies the separation constraint");
  }
  auto plan = make_plan(inst, problem, best.open, PlanMethod::Exact);
  plan.diagnostics.subsets_evaluated = best.evaluated;
  return plan;
}

namespace {

Plan heuristic_impl(const SitingInstance& inst, const PlanProblem& problem, bool parallel) {
  check_k(inst, problem);
  if (problem.k < 1) throw ConfigError("heuristic solver needs K >= 1");
  const std::size_t nc = inst.n_candidates();
  std::vector<std::size_t> open;
  std::vector<std::string> order;
  std::vector<double> score(nc);
  std::uint64_t evaluated = 0;

  for (int step = 0; step < problem.k; ++step) {
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(nc); ++ci) {
      const auto c = static_cast<std::size_t>(ci);
      if (!compatible(inst, open, c)) {
        score[c] = kInf;
        continue;
      }
      auto trial = open;
      trial.push_back(c);
      score[c] = siting_objective(inst, problem, trial);
    }
    evaluated += nc;
    std::size_t pick = nc;
    for (std::size_t c = 0; c < nc; ++c) {
      if (std::isfinite(score[c]) && (pick == nc || score[c] < score[pick])) pick = c;
    }
    if (pick == nc) {
      throw SolverError(SolverError::Kind::Infeasible,
                        "greedy construction found no separation-feasible site for step " + std::to_string(step + 1));
    }
    open.push_back(pick);
    order.push_back(inst.candidates[pick].id);
  }
  std::sort(open.begin(), open.end());

  double current = siting_objective(inst, problem, open);
  int swaps = 0;
  const std::size_t k = open.size();
  std::vector<double> swap_score(k * nc);
  std::vector<std::vector<std::size_t>> swap_set(k * nc);
  for (int guard = 0; guard < 10'000; ++guard) {
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(k * nc); ++idx) {
      const auto i = static_cast<std::size_t>(idx) / nc;
      const auto c = static_cast<std::size_t>(idx) % nc;
      auto rest = open;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
      auto& slot = swap_set[static_cast<std::size_t>(idx)];
      if (!compatible(inst, rest, c) || std::find(open.begin(), open.end(), c) != open.end()) {
        swap_score[static_cast<std::size_t>(idx)] = kInf;
        slot.clear();
        continue;
      }
      rest.push_back(c);
      std::sort(rest.begin(), rest.end());
      swap_score[static_cast<std::size_t>(idx)] = siting_objective(inst, problem, rest);
      slot = std::move(rest);
    }
    evaluated += k * nc;
    std::size_t pick = k * nc;
    for (std::size_t idx = 0; idx < k * nc; ++idx) {
      if (!std::isfinite(swap_score[idx])) continue;
      if (pick == k * nc || swap_score[idx] < swap_score[pick] ||
          (swap_score[idx] == swap_score[pick] && lex_less(swap_set[idx], swap_set[pick]))) {
        pick = idx;
      }
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(current));
    if (pick == k * nc || !(swap_score[pick] < current - tol)) break;
    open = swap_set[pick];
    current = swap_score[pick];
    ++swaps;
  }
  auto plan = make_plan(inst, problem, open, PlanMethod::Heuristic);
  plan.diagnostics.subsets_evaluated = evaluated;
  plan.diagnostics.swaps = swaps;
  plan.diagnostics.greedy_order = std::move(order);
  return plan;
}

}  // namespace

Plan solve_heuristic(const SitingInstance& inst, const PlanProblem& problem) {
  return heuristic_impl(inst, problem, true);
}

Plan solve(const SitingInstance& inst, const PlanProblem& problem) {
  try {
    return solve_exact(inst, problem);
  } catch (const SolverError& e) {
    if (e.kind() != SolverError::Kind::UseHeuristic) throw;
  }
  return solve_heuristic(inst, problem);
}

namespace serial {

Plan solve_exact(const SitingInstance& inst, const PlanProblem& problem) {
  check_k(inst, problem);
  const auto k = static_cast<std::size_t>(problem.k);
  const std::size_t nc = inst.n_candidates();
  if (binomial(nc, k) > problem.enumeration_budget) {
    throw SolverError(SolverError::Kind::UseHeuristic, "enumeration budget exceeded");
  }
  // Plain lexicographic walk over index combinations.
  std::vector<std::size_t> comb(k);
  std::iota(comb.begin(), comb.end(), 0);
  Best best;
  while (true) {
    bool ok = true;
    for (std::size_t a = 0; a < k && ok; ++a)
      for (std::size_t b = a + 1; b < k && ok; ++b) ok = !inst.conflicts(comb[a], comb[b]);
    if (ok) {
      ++best.evaluated;
      best.offer(siting_objective(inst, problem, comb), comb);
    }
    std::size_t i = k;
    while (i > 0 && comb[i - 1] == nc - k + i - 1) --i;
    if (i == 0) break;
    ++comb[i - 1];
    for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
  }
  if (!std::isfinite(best.objective)) {
    throw SolverError(SolverError::Kind::Infeasible, "no separation-feasible subset");
  }
  auto plan = make_plan(inst, problem, best.open, PlanMethod::Exact);
  plan.diagnostics.subsets_evaluated = best.evaluated;
  return plan;
}

Plan solve_heuristic(const SitingInstance& inst, const PlanProblem& problem) {
  return heuristic_impl(inst, problem, false);
}

}  // namespace serial

PlanCheck check_plan(const Plan& plan, const PlanProblem& problem, const TravelTimeMatrix& matrix,
                     std::span<const Hospital> existing) {
  PlanCheck out;
  std::set<std::string> open_ids;
  for (const auto& h : existing) open_ids.insert(h.id);
  for (const auto& id : plan.opened) open_ids.insert(id);

  if (static_cast<int>(plan.opened.size()) != problem.k) {
    out.violations.push_back({Violation::Kind::SiteCount, plan.opened, static_cast<double>(plan.opened.size()),
                              static_cast<double>(problem.k),
                              "opened " + std::to_string(plan.opened.size()) + " sites, expected " +
                                  std::to_string(problem.k)});
  }

  std::set<std::string> seen;
  for (const auto& a : plan.assignment) {
    seen.insert(a.district_id);
    const auto r = matrix.district_index(a.district_id);
    if (!a.within_threshold) {
      // penalized district: no open site may be reachable within t_max
      if (!r) {
        out.violations.push_back({Violation::Kind::UnknownSite, {a.district_id}, 0.0, 0.0,
                                  "district " + a.district_id + " not in travel matrix"});
        continue;
      }
      for (const auto& id : open_ids) {
        const auto oc = matrix.site_index(id);
        if (oc && matrix.at(*r, *oc) <= problem.t_max) {
          out.violations.push_back({Violation::Kind::MissedAssignment, {a.district_id, id}, matrix.at(*r, *oc),
                                    problem.t_max,
                                    "district " + a.district_id + " left unassigned but " + id + " is within t_max"});
          break;
        }
      }
      continue;
    }
    if (!open_ids.count(a.site_id)) {
      out.violations.push_back({Violation::Kind::UnknownSite, {a.district_id, a.site_id}, 0.0, 0.0,
                                "district " + a.district_id + " assigned to site '" + a.site_id + "' which is not open"});
      continue;
    }
    const auto c = matrix.site_index(a.site_id);
    if (!r || !c) {
      out.violations.push_back({Violation::Kind::UnknownSite, {a.district_id, a.site_id}, 0.0, 0.0,
                                "pair " + a.district_id + "," + a.site_id + " not in travel matrix"});
      continue;
    }
    const double t = matrix.at(*r, *c);
    if (t > problem.t_max) {
      out.violations.push_back({Violation::Kind::TravelTime, {a.district_id, a.site_id}, t, problem.t_max,
                                "district " + a.district_id + " -> " + a.site_id + " takes " + std::to_string(t) +
                                    " min > t_max " + std::to_string(problem.t_max)});
    }
  }
  for (const auto& id : matrix.district_ids()) {
    if (!seen.count(id)) {
      out.violations.push_back({Violation::Kind::MissingDistrict, {id}, 0.0, 0.0, "district " + id + " has no assignment"});
    }
  }

  const auto& sites = plan.opened_sites;
  for (std::size_t a = 0; a < sites.size(); ++a) {
    for (std::size_t b = a + 1; b < sites.size(); ++b) {
      const double km = haversine_km(sites[a].location, sites[b].location);
      if (km < problem.min_separation_km) {
        out.violations.push_back({Violation::Kind::Separation, {sites[a].id, sites[b].id}, km, problem.min_separation_km,
                                  "new sites " + sites[a].id + " and " + sites[b].id + " are " + std::to_string(km) +
                                      " km apart"});
      }
    }
    for (const auto& e : existing) {
      const double km = haversine_km(sites[a].location, e.location);
      if (km < problem.min_separation_km) {
        out.violations.push_back({Violation::Kind::Separation, {sites[a].id, e.id}, km, problem.min_separation_km,
                                  "new site " + sites[a].id + " is " + std::to_string(km) + " km from existing " + e.id});
      }
    }
  }
  if (plan.opened_sites.size() != plan.opened.size()) {
    out.violations.push_back({Violation::Kind::SiteCount, plan.opened, static_cast<double>(plan.opened_sites.size()),
                              static_cast<double>(plan.opened.size()), "opened ids and site records disagree"});
  }
  return out;
}

}  // namespace equiplan
