#include "equiplan/indices.hpp"

#include <algorithm>
#include <cmath>

#include "equiplan/error.hpp"

namespace equiplan {

namespace {

std::vector<std::size_t> site_columns(std::span<const Hospital> sites, const TravelTimeMatrix& matrix) {
  std::vector<std::size_t> cols;
  cols.reserve(sites.size());
  for (const auto& s : sites) {
    auto c = matrix.site_index(s.id);
    if (!c) throw ValidationError("site " + s.id + " missing from travel matrix");
    cols.push_back(*c);
  }
  return cols;
}

std::vector<std::size_t> district_rows(std::span<const District> districts, const TravelTimeMatrix& matrix) {
  std::vector<std::size_t> rows;
  rows.reserve(districts.size());
  for (const auto& d : districts) {
    auto r = matrix.district_index(d.id);
    if (!r) throw ValidationError("district " + d.id + " missing from travel matrix");
    rows.push_back(*r);
  }
  return rows;
}

void check_t0(double t0) {
  if (!(t0 > 0.0) || !std::isfinite(t0)) throw ConfigError("catchment threshold t0 must be > 0");
}

}  // namespace

std::vector<double> latest_populations(std::span<const District> districts) {
  std::vector<double> p;
  p.reserve(districts.size());
  for (const auto& d : districts) p.push_back(d.latest_population());
  return p;
}

std::vector<AccessScore> two_step_fca(std::span<const District> districts, std::span<const Hospital> sites,
                                      const TravelTimeMatrix& matrix, double t0) {
  check_t0(t0);
  const auto rows = district_rows(districts, matrix);
  const auto cols = site_columns(sites, matrix);
  const auto pop = latest_populations(districts);
  const auto nd = static_cast<std::ptrdiff_t>(districts.size());
  const auto ns = static_cast<std::ptrdiff_t>(sites.size());

  std::vector<double> ratio(sites.size(), 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < ns; ++j) {
    const auto sj = static_cast<std::size_t>(j);
    double catchment = 0.0;
    for (std::size_t k = 0; k < districts.size(); ++k) {
      if (matrix.at(rows[k], cols[sj]) <= t0) catchment += pop[k];
    }
    ratio[sj] = catchment > 0.0 ? sites[sj].beds / catchment : 0.0;
  }

  std::vector<AccessScore> out(districts.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < nd; ++i) {
    const auto si = static_cast<std::size_t>(i);
    double a = 0.0;
    for (std::size_t j = 0; j < sites.size(); ++j) {
      if (matrix.at(rows[si], cols[j]) <= t0) a += ratio[j];
    }
    out[si] = {districts[si].id, a, t0};
  }
  return out;
}

namespace serial {
std::vector<AccessScore> two_step_fca(std::span<const District> districts, std::span<const Hospital> sites,
                                      const TravelTimeMatrix& matrix, double t0) {
  check_t0(t0);
  std::vector<double> ratio;
  for (const auto& s : sites) {
    double catchment = 0.0;
    for (const auto& d : districts) {
      if (matrix.minutes(d.id, s.id) <= t0) catchment += d.latest_population();
    }
    ratio.push_back(catchment > 0.0 ? s.beds / catchment : 0.0);
  }
  std::vector<AccessScore> out;
  for (const auto& d : districts) {
    double a = 0.0;
    for (std::size_t j = 0; j < sites.size(); ++j) {
      if (matrix.minutes(d.id, sites[j].id) <= t0) a += ratio[j];
    }
    out.push_back({d.id, a, t0});
  }
  return out;
}
}  // namespace serial

void VulnerabilityWeights::validate() const {
  if (!(deprivation >= 0.0) || !(elderly >= 0.0) || std::abs(deprivation + elderly - 1.0) > 1e-9) {
    throw ConfigError("vulnerability weights must be >= 0 and sum to 1");
  }
}

std::vector<double> min_max(std::span<const double> values, double degenerate) {
  std::vector<double> out(values.size(), degenerate);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo, max = *hi;
  if (!(max > min)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - min) / (max - min);
  return out;
}

std::vector<double> vulnerability(std::span<const District> districts, const VulnerabilityWeights& w) {
  w.validate();
  std::vector<double> dep, eld;
  for (const auto& d : districts) {
    dep.push_back(d.deprivation);
    eld.push_back(d.elderly_share);
  }
  const auto dn = min_max(dep, 0.5);
  const auto en = min_max(eld, 0.5);
  std::vector<double> v(districts.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(w.deprivation * dn[i] + w.elderly * en[i], 0.0, 1.0);
  return v;
}

void BedConversion::validate() const {
  if (!(avg_stay_days > 0.0) || !(occupancy_margin > 0.0)) {
    throw ConfigError("bed conversion needs positive stay length and occupancy margin");
  }
}

std::vector<EquityRecord> equity_index(std::span<const District> districts, const ForecastTable& forecasts,
                                       std::span<const AccessScore> access, const VulnerabilityWeights& weights,
                                       const BedConversion& conversion) {
  conversion.validate();
  const double kappa = conversion.kappa();
  const auto vul = vulnerability(districts, weights);
  std::vector<EquityRecord> recs(districts.size());
  std::vector<double> unmet(districts.size());
  for (std::size_t i = 0; i < districts.size(); ++i) {
    const auto& d = districts[i];
    auto f = forecasts.find(d.id);
    if (f == forecasts.end()) throw ValidationError("no forecast for district " + d.id);
    auto a = std::find_if(access.begin(), access.end(), [&](const AccessScore& s) { return s.district_id == d.id; });
    if (a == access.end()) throw ValidationError("no access score for district " + d.id);
    auto& r = recs[i];
    r.district_id = d.id;
    r.demand_beds = f->second.mean_admissions() * kappa;
    r.supply_beds = a->score * d.latest_population();
    r.unmet = std::max(0.0, r.demand_beds - r.supply_beds);
    r.vulnerability = vul[i];
    unmet[i] = r.unmet;
  }
  const auto norm = min_max(unmet, 0.0);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].unmet_norm = norm[i];
    recs[i].equity_index = std::clamp(norm[i] * recs[i].vulnerability, 0.0, 1.0);
  }
  return recs;
}

double aggregate_equity(std::span<const EquityRecord> records, std::span<const double> populations) {
  if (records.size() != populations.size()) throw ValidationError("aggregate_equity: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    num += records[i].equity_index * populations[i];
    den += populations[i];
  }
  return den > 0.0 ? num / den : 0.0;
}

bool point_in_ring(LatLon p, std::span<const LatLon> ring) {
  // even-odd rule in lon/lat space
  bool inside = false;
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = ring[i];
    const auto& b = ring[j];
    if ((a.lat > p.lat) != (b.lat > p.lat)) {
      const double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
      if (p.lon < x) inside = !inside;
    }
  }
  return inside;
}

std::size_t attribute_to_district(LatLon p, std::span<const District> districts) {
  for (std::size_t i = 0; i < districts.size(); ++i) {
    if (!districts[i].boundary.empty() && point_in_ring(p, districts[i].boundary)) return i;
  }
  std::size_t best = 0;
  double best_km = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < districts.size(); ++i) {
    const double km = haversine_km(p, districts[i].centroid);
    if (km < best_km) {
      best_km = km;
      best = i;
    }
  }
  return best;
}

std::vector<HfdrRecord> hfdr(std::span<const District> districts, std::span<const Hospital> hospitals,
                             const ForecastTable& forecasts, const BedConversion& conversion) {
  conversion.validate();
  if (districts.empty()) return {};
  std::vector<HfdrRecord> recs(districts.size());
  for (std::size_t i = 0; i < districts.size(); ++i) {
    auto f = forecasts.find(districts[i].id);
    if (f == forecasts.end()) throw ValidationError("no forecast for district " + districts[i].id);
    recs[i].district_id = districts[i].id;
    recs[i].mean_forecast_beds = f->second.mean_admissions() * conversion.kappa();
  }
  for (const auto& h : hospitals) recs[attribute_to_district(h.location, districts)].beds_in_district += h.beds;
  for (auto& r : recs) {
    if (r.mean_forecast_beds > 0.0) {
      r.hfdr = r.beds_in_district / r.mean_forecast_beds;
    } else {
      r.hfdr = std::numeric_limits<double>::infinity();
      r.zero_demand = true;
    }
  }
  return recs;
}

double hfdr_aggregate(std::span<const HfdrRecord> records) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.zero_demand || !std::isfinite(r.hfdr)) continue;
    s += r.hfdr;
    ++n;
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace equiplan
