#pragma once

#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "equiplan/forecast.hpp"
#include "equiplan/geo.hpp"

namespace equiplan {

// 2SFCA: R_j = S_j / sum of P_k with t_kj <= t0, A_i = sum of R_j with t_ij <= t0.
struct AccessScore {
  std::string district_id;
  double score = 0.0;  // beds per resident reachable within the catchment
  double catchment_minutes = 0.0;
};

/// Accessibility of every district to the given sites. Sites are looked up
/// in `matrix` by id; districts use their latest population.
std::vector<AccessScore> two_step_fca(std::span<const District> districts, std::span<const Hospital> sites,
                                      const TravelTimeMatrix& matrix, double t0);

namespace serial {
std::vector<AccessScore> two_step_fca(std::span<const District> districts, std::span<const Hospital> sites,
                                      const TravelTimeMatrix& matrix, double t0);
}  // namespace serial

/// Relative weights of normalized deprivation and elderly share. Must be
/// nonnegative and sum to 1.
struct VulnerabilityWeights {
  double deprivation = 0.5;
  double elderly = 0.5;

  void validate() const;

  friend bool operator==(const VulnerabilityWeights&, const VulnerabilityWeights&) = default;
};

/// Min-max normalization to [0,1]; every value maps to `degenerate` when
/// all inputs are equal.
std::vector<double> min_max(std::span<const double> values, double degenerate);

/// Vulnerability of each district, in input order.
std::vector<double> vulnerability(std::span<const District> districts, const VulnerabilityWeights& w);

/// Converts annual admissions to occupied-bed equivalents:
/// kappa = avg_stay_days / 365 * occupancy_margin.
struct BedConversion {
  double avg_stay_days = 7.2;
  double occupancy_margin = 1.0 / 0.85;

  double kappa() const { return avg_stay_days / 365.0 * occupancy_margin; }
  void validate() const;
};

struct EquityRecord {
  std::string district_id;
  double demand_beds = 0.0;   // mean horizon forecast in bed equivalents
  double supply_beds = 0.0;   // A_d * P_d
  double unmet = 0.0;         // max(0, demand - supply)
  double unmet_norm = 0.0;
  double vulnerability = 0.0;
  double equity_index = 0.0;  // unmet_norm * vulnerability; lower is more equitable
};

/// Equity records in district order. Throws ValidationError when `forecasts`
/// or `access` miss a district.
std::vector<EquityRecord> equity_index(std::span<const District> districts, const ForecastTable& forecasts,
                                       std::span<const AccessScore> access, const VulnerabilityWeights& weights,
                                       const BedConversion& conversion = {});

/// Population-weighted mean of the district equity indices.
double aggregate_equity(std::span<const EquityRecord> records, std::span<const double> populations);

struct HfdrRecord {
  std::string district_id;
  int beds_in_district = 0;
  double mean_forecast_beds = 0.0;
  double hfdr = 0.0;          // +inf when demand is zero
  bool zero_demand = false;   // sentinel flag, excluded from aggregates
};

/// Index of the district each point belongs to: containing boundary polygon
/// when the district has one, otherwise nearest centroid.
std::size_t attribute_to_district(LatLon p, std::span<const District> districts);

bool point_in_ring(LatLon p, std::span<const LatLon> ring);

std::vector<HfdrRecord> hfdr(std::span<const District> districts, std::span<const Hospital> hospitals,
                             const ForecastTable& forecasts, const BedConversion& conversion = {});

/// Mean HFDR over districts with finite ratios; 0 when none.
double hfdr_aggregate(std::span<const HfdrRecord> records);

/// Latest population per district, in input order.
std::vector<double> latest_populations(std::span<const District> districts);

}  // namespace equiplan
