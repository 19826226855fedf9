#include "equiplan/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "equiplan/csv.hpp"
#include "equiplan/error.hpp"

namespace equiplan {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
}  // namespace

double District::latest_population() const {
  return population_history.empty() ? 0.0 : population_history.back().value;
}

const char* to_string(SiteStatus s) {
  switch (s) {
    case SiteStatus::Existing: return "existing";
    case SiteStatus::Candidate: return "candidate";
    case SiteStatus::Proposed: return "proposed";
  }
  return "unknown";
}

void validate(LatLon p) {
  if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 180.0)) {
    throw ValidationError("coordinate out of range: (" + csv::format_double(p.lat) + ", " +
                          csv::format_double(p.lon) + ")");
  }
}

namespace {
void validate_series(const std::string& id, const char* what, const std::vector<YearValue>& s,
                     bool strictly_positive) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i].value) || (strictly_positive ? s[i].value <= 0.0 : s[i].value < 0.0)) {
      throw ValidationError("district " + id + ": invalid " + what + " value in year " +
                            std::to_string(s[i].year));
    }
    if (i > 0 && s[i].year <= s[i - 1].year) {
      throw ValidationError("district " + id + ": " + what + " years not strictly increasing");
    }
  }
}
}  // namespace

void validate(const District& d) {
  if (d.id.empty()) throw ValidationError("district with empty id");
  validate(d.centroid);
  for (auto p : d.boundary) validate(p);
  if (!(d.elderly_share >= 0.0 && d.elderly_share <= 1.0)) {
    throw ValidationError("district " + d.id + ": elderly_share outside [0,1]");
  }
  if (!std::isfinite(d.deprivation)) throw ValidationError("district " + d.id + ": deprivation not finite");
  validate_series(d.id, "population", d.population_history, true);
  validate_series(d.id, "inpatient", d.inpatient_history, false);
}

void validate(const Hospital& h) {
  if (h.id.empty()) throw ValidationError("hospital with empty id");
  validate(h.location);
  if (h.beds < 0) throw ValidationError("hospital " + h.id + ": negative bed count");
  if (h.status == SiteStatus::Existing && h.beds == 0) {
    throw ValidationError("hospital " + h.id + ": existing hospital needs beds > 0");
  }
}

void TravelModel::validate() const {
  if (!(speed_kmh > 0.0) || !std::isfinite(speed_kmh)) throw ConfigError("travel speed must be > 0 km/h");
  if (!(detour_factor >= 1.0) || !std::isfinite(detour_factor)) throw ConfigError("detour factor must be >= 1");
}

TravelTimeMatrix::TravelTimeMatrix(std::vector<std::string> district_ids, std::vector<std::string> site_ids,
                                   std::vector<double> minutes)
    : district_ids_(std::move(district_ids)), site_ids_(std::move(site_ids)), minutes_(std::move(minutes)) {
  if (minutes_.size() != district_ids_.size() * site_ids_.size()) {
    throw ValidationError("travel matrix dimensions do not match id lists");
  }
  for (double m : minutes_) {
    if (!std::isfinite(m) || m < 0.0) throw ValidationError("travel matrix entries must be finite and >= 0");
  }
  for (std::size_t i = 0; i < district_ids_.size(); ++i) {
    if (!row_of_.emplace(district_ids_[i], i).second) {
      throw ValidationError("duplicate district id in travel matrix: " + district_ids_[i]);
    }
  }
  for (std::size_t j = 0; j < site_ids_.size(); ++j) {
    if (!col_of_.emplace(site_ids_[j], j).second) {
      throw ValidationError("duplicate site id in travel matrix: " + site_ids_[j]);
    }
  }
}

std::optional<std::size_t> TravelTimeMatrix::district_index(const std::string& id) const {
  auto it = row_of_.find(id);
  if (it == row_of_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> TravelTimeMatrix::site_index(const std::string& id) const {
  auto it = col_of_.find(id);
  if (it == col_of_.end()) return std::nullopt;
  return it->second;
}

double TravelTimeMatrix::minutes(const std::string& district_id, const std::string& site_id) const {
  auto r = district_index(district_id);
  auto c = site_index(site_id);
  if (!r) throw ValidationError("unknown district id in travel matrix: " + district_id);
  if (!c) throw ValidationError("unknown site id in travel matrix: " + site_id);
  return at(*r, *c);
}

double haversine_km(LatLon a, LatLon b) {
  validate(a);
  validate(b);
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlam = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlam / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::min(1.0, std::max(0.0, h));
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

LatLon destination_point(LatLon origin, double bearing_deg, double distance_km) {
  validate(origin);
  const double delta = distance_km / kEarthRadiusKm;
  const double theta = bearing_deg * kDegToRad;
  const double phi1 = origin.lat * kDegToRad;
  const double lam1 = origin.lon * kDegToRad;
  const double sin_phi2 = std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta);
  const double phi2 = std::asin(std::clamp(sin_phi2, -1.0, 1.0));
  const double lam2 = lam1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                                        std::cos(delta) - std::sin(phi1) * std::sin(phi2));
  double lon = std::remainder(lam2 * kRadToDeg, 360.0);
  if (lon == -180.0) lon = 180.0;
  return {phi2 * kRadToDeg, lon};
}

double travel_minutes(LatLon a, LatLon b, const TravelModel& model) {
  model.validate();
  const double km = haversine_km(a, b);
  if (km < kCoincideKm) return 0.0;
  return km * model.detour_factor / model.speed_kmh * 60.0;
}

namespace {

struct MatrixPlan {
  std::vector<std::string> district_ids;
  std::vector<std::string> site_ids;
  // per row/col index into the override, or -1
  std::vector<long> override_row;
  std::vector<long> override_col;
};

MatrixPlan prepare(std::span<const District> districts, std::span<const Hospital> sites,
                   const TravelModel& model, const TravelTimeMatrix* override) {
  model.validate();
  if (districts.empty() || sites.empty()) throw ValidationError("travel matrix needs at least one district and one site");
  MatrixPlan p;
  std::set<std::string> seen;
  for (const auto& d : districts) {
    validate(d.centroid);
    if (!seen.insert(d.id).second) throw ValidationError("duplicate district id: " + d.id);
    p.district_ids.push_back(d.id);
    p.override_row.push_back(-1);
    if (override) {
      if (auto r = override->district_index(d.id)) p.override_row.back() = static_cast<long>(*r);
    }
  }
  seen.clear();
  for (const auto& s : sites) {
    validate(s.location);
    if (!seen.insert(s.id).second) throw ValidationError("duplicate site id: " + s.id);
    p.site_ids.push_back(s.id);
    p.override_col.push_back(-1);
    if (override) {
      if (auto c = override->site_index(s.id)) p.override_col.back() = static_cast<long>(*c);
    }
  }
  return p;
}

inline double cell(const MatrixPlan& p, std::size_t i, std::size_t j, std::span<const District> districts,
                   std::span<const Hospital> sites, const TravelModel& model, const TravelTimeMatrix* override) {
  if (override && p.override_row[i] >= 0 && p.override_col[j] >= 0) {
    return override->at(static_cast<std::size_t>(p.override_row[i]), static_cast<std::size_t>(p.override_col[j]));
  }
  const double km = haversine_km(districts[i].centroid, sites[j].location);
  if (km < kCoincideKm) return 0.0;
  return km * model.detour_factor / model.speed_kmh * 60.0;
}

}  // namespace

TravelTimeMatrix build_matrix(std::span<const District> districts, std::span<const Hospital> sites,
                              const TravelModel& model, const TravelTimeMatrix* override) {
  auto p = prepare(districts, sites, model, override);
  const std::size_t n = districts.size();
  const std::size_t m = sites.size();
  std::vector<double> minutes(n * m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto row = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < m; ++j) minutes[row * m + j] = cell(p, row, j, districts, sites, model, override);
  }
  return TravelTimeMatrix(std::move(p.district_ids), std::move(p.site_ids), std::move(minutes));
}

namespace serial {
TravelTimeMatrix build_matrix(std::span<const District> districts, std::span<const Hospital> sites,
                              const TravelModel& model, const TravelTimeMatrix* override) {
  auto p = prepare(districts, sites, model, override);
  std::vector<double> minutes;
  minutes.reserve(districts.size() * sites.size());
  for (std::size_t i = 0; i < districts.size(); ++i) {
    for (std::size_t j = 0; j < sites.size(); ++j) minutes.push_back(cell(p, i, j, districts, sites, model, override));
  }
  return TravelTimeMatrix(std::move(p.district_ids), std::move(p.site_ids), std::move(minutes));
}
}  // namespace serial

TravelTimeMatrix load_matrix_csv(const std::string& path) {
  const auto t = csv::read_file(path);
  const auto cd = t.column("district_id", path);
  const auto cs = t.column("site_id", path);
  const auto cm = t.column("minutes", path);
  std::vector<std::string> dids, sids;
  std::unordered_map<std::string, std::size_t> drow, scol;
  struct Entry { std::size_t r, c; double v; std::size_t line; };
  std::vector<Entry> entries;
  std::vector<std::string> bad;
  for (const auto& rec : t.records) {
    const auto where = path + ":" + std::to_string(rec.line);
    if (rec.fields.size() != t.header.size()) {
      bad.push_back(where + ": expected " + std::to_string(t.header.size()) + " fields");
      continue;
    }
    double v = 0.0;
    if (!csv::parse_double(rec.fields[cm], v) || !std::isfinite(v) || v < 0.0) {
      bad.push_back(where + ": minutes must be a finite number >= 0");
      continue;
    }
    const auto& d = rec.fields[cd];
    const auto& s = rec.fields[cs];
    if (d.empty() || s.empty()) {
      bad.push_back(where + ": empty id");
      continue;
    }
    auto [dit, dnew] = drow.emplace(d, dids.size());
    if (dnew) dids.push_back(d);
    auto [sit, snew] = scol.emplace(s, sids.size());
    if (snew) sids.push_back(s);
    entries.push_back({dit->second, sit->second, v, rec.line});
  }
  if (!bad.empty()) throw LoadError("malformed travel matrix rows in " + path, bad);
  if (dids.empty()) throw LoadError("travel matrix " + path + " has no rows");
  std::vector<double> minutes(dids.size() * sids.size(), -1.0);
  for (const auto& e : entries) {
    auto& slot = minutes[e.r * sids.size() + e.c];
    if (slot >= 0.0) {
      bad.push_back(path + ":" + std::to_string(e.line) + ": duplicate pair " + dids[e.r] + "," + sids[e.c]);
    }
    slot = e.v;
  }
  for (std::size_t r = 0; r < dids.size(); ++r) {
    for (std::size_t c = 0; c < sids.size(); ++c) {
      if (minutes[r * sids.size() + c] < 0.0) bad.push_back("missing pair " + dids[r] + "," + sids[c]);
    }
  }
  if (!bad.empty()) throw LoadError("travel matrix " + path + " does not cover the full cross product", bad);
  return TravelTimeMatrix(std::move(dids), std::move(sids), std::move(minutes));
}

void write_matrix_csv(const TravelTimeMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << "district_id,site_id,minutes\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out << csv::escape(m.district_ids()[i]) << ',' << csv::escape(m.site_ids()[j]) << ','
          << csv::format_double(m.at(i, j)) << '\n';
    }
  }
}

}  // namespace equiplan
