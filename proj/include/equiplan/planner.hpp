#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "equiplan/forecast.hpp"
#include "equiplan/geo.hpp"
#include "equiplan/indices.hpp"
#include "equiplan/ingest.hpp"

namespace equiplan {

struct CandidateOptions {
  int per_district = 3;                 // candidates kept per district after filtering
  std::vector<double> rings_km{0.0, 5.0};  // 0 means the centroid itself
  int bearings = 4;                     // evenly spaced points per nonzero ring, first at north
  double ring_scale = 1.0;              // multiplies every ring radius
  double min_separation_km = 5.0;       // against existing hospitals
  int beds = 200;                       // provisional beds per candidate

  void validate() const;
};

struct CandidateProvenance {
  std::string district_id;
  double ring_km = 0.0;
  double bearing_deg = 0.0;
};

struct CandidateSet {
  std::vector<Hospital> sites;  // status Candidate
  std::vector<CandidateProvenance> provenance;
};

/// Candidate sites around each district centroid, districts in descending
/// population order. Throws CandidateError when every candidate is filtered.
CandidateSet generate_candidates(const DataBundle& bundle, const CandidateOptions& options);

/// Per-district base weight of the siting objective.
enum class DemandWeighting {
  Demand,         // mean horizon forecast admissions
  Vulnerability,  // vulnerability index of the district
  Population,     // latest population (pure per-person travel time)
};

const char* to_string(DemandWeighting w);

struct PlanProblem {
  int k = 0;                        // new sites to open
  double t_max = 30.0;              // assignment threshold, minutes
  double min_separation_km = 5.0;   // between any two of existing and new sites
  double theta = 0.0;               // equity weight in (1 + theta * equity_index)
  int beds_per_new_site = 200;
  double penalty_factor = 10.0;     // unassigned districts cost penalty_factor * t_max per unit weight
  DemandWeighting weighting = DemandWeighting::Demand;
  std::uint64_t enumeration_budget = 200'000;

  void validate() const;
  double penalty_minutes() const { return penalty_factor * t_max; }
};

/// Everything the solvers need in flat arrays. Candidates are sorted by id so
/// index order equals lexicographic id order.
struct SitingInstance {
  std::vector<std::string> district_ids;
  std::vector<double> weight;        // base weight per district
  std::vector<double> equity;        // equity index per district
  std::vector<Hospital> existing;
  std::vector<Hospital> candidates;  // feasible against existing, id-sorted
  std::vector<double> existing_minutes;   // districts x existing
  std::vector<double> candidate_minutes;  // districts x candidates
  std::vector<std::uint8_t> conflict;     // candidates x candidates, 1 if closer than min separation

  std::size_t n_districts() const { return district_ids.size(); }
  std::size_t n_candidates() const { return candidates.size(); }
  double cand_minutes(std::size_t d, std::size_t c) const { return candidate_minutes[d * candidates.size() + c]; }
  double exist_minutes(std::size_t d, std::size_t e) const { return existing_minutes[d * existing.size() + e]; }
  bool conflicts(std::size_t a, std::size_t b) const { return conflict[a * candidates.size() + b] != 0; }
};

/// Builds the instance. `equity` supplies both the equity index and (for
/// DemandWeighting::Vulnerability) the vulnerability. Candidates closer than
/// min_separation_km to an existing hospital are dropped.
SitingInstance make_instance(const PlanProblem& problem, std::span<const Hospital> candidates,
                             const DataBundle& bundle, const TravelTimeMatrix& matrix,
                             std::span<const EquityRecord> equity, const ForecastTable& forecasts);

/// Objective of opening `open` (candidate indices):
/// sum_d w_d (1 + theta e_d) t_d, where t_d is the minutes to the nearest open
/// site within t_max, or penalty_minutes when none is reachable.
double siting_objective(const SitingInstance& inst, const PlanProblem& problem, std::span<const std::size_t> open);

struct Assignment {
  std::string district_id;
  std::string site_id;      // nearest open site (existing or new)
  double minutes = 0.0;
  bool within_threshold = false;
};

enum class PlanMethod { StatusQuo, Exact, Heuristic, PopulationWeighted };

const char* to_string(PlanMethod m);

struct PlanDiagnostics {
  int unassigned = 0;
  double max_assigned_minutes = 0.0;
  double t_max_slack = 0.0;               // t_max - max minutes over assigned districts
  double min_separation_km = 0.0;         // closest pair involving a new site (inf if none)
  double separation_slack_km = 0.0;       // min_separation_km - required
  double penalty_minutes = 0.0;
  std::uint64_t subsets_evaluated = 0;
  int swaps = 0;
  std::vector<std::string> greedy_order;  // heuristic only
};

struct Plan {
  std::vector<std::string> opened;        // new site ids, sorted
  std::vector<Hospital> opened_sites;     // status Proposed, beds_per_new_site beds
  std::vector<Assignment> assignment;     // one per district, district order
  double objective = 0.0;
  bool feasible = false;                  // every district within t_max and separation respected
  PlanMethod method = PlanMethod::StatusQuo;
  PlanDiagnostics diagnostics;
};

/// Plan opening exactly the given candidate indices.
Plan make_plan(const SitingInstance& inst, const PlanProblem& problem, std::vector<std::size_t> open,
               PlanMethod method);

/// Exhaustive search over all separation-feasible K-subsets. Ties go to the
/// lexicographically smallest id set.
/// Throws SolverError(UseHeuristic) when C(n, K) exceeds the budget and
/// SolverError(Infeasible) when no feasible K-subset exists.
Plan solve_exact(const SitingInstance& inst, const PlanProblem& problem);

/// Greedy addition followed by Teitz-Bart single-swap interchange.
Plan solve_heuristic(const SitingInstance& inst, const PlanProblem& problem);

/// solve_exact when within budget, otherwise solve_heuristic.
Plan solve(const SitingInstance& inst, const PlanProblem& problem);

namespace serial {
/// Reference enumeration without threading; same result as solve_exact.
Plan solve_exact(const SitingInstance& inst, const PlanProblem& problem);
Plan solve_heuristic(const SitingInstance& inst, const PlanProblem& problem);
}  // namespace serial

/// Number of K-subsets of n items, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

struct Violation {
  enum class Kind { TravelTime, Separation, SiteCount, UnknownSite, MissingDistrict, MissedAssignment };
  Kind kind;
  std::vector<std::string> ids;
  double value = 0.0;
  double limit = 0.0;
  std::string message;
};

struct PlanCheck {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Independent validator: t_max on every assignment (minutes re-read from
/// `matrix`), separation among new sites and against `existing`, and the K count.
/// A district marked outside the threshold is penalized rather than assigned;
/// it is a violation only if some open site is in fact within t_max.
PlanCheck check_plan(const Plan& plan, const PlanProblem& problem, const TravelTimeMatrix& matrix,
                     std::span<const Hospital> existing);

}  // namespace equiplan
