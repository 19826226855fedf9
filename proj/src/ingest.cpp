#include "equiplan/ingest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "equiplan/csv.hpp"
#include "equiplan/error.hpp"
#include "equiplan/random.hpp"
#include "json.hpp"

namespace equiplan {

namespace fs = std::filesystem;
using nlohmann::json;

const District* DataBundle::find_district(const std::string& id) const {
  for (const auto& d : districts) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

bool DataBundle::same_data(const DataBundle& other) const {
  return districts == other.districts && hospitals == other.hospitals && travel_override == other.travel_override;
}

BundlePaths BundlePaths::in_directory(const std::string& dir) {
  BundlePaths p;
  p.dir = dir;
  return p;
}

std::string BundlePaths::resolved(const std::string& explicit_path, const char* default_name) const {
  if (!explicit_path.empty()) return explicit_path;
  return (fs::path(dir) / default_name).string();
}

std::size_t LoadReport::total_rejected() const {
  std::size_t n = 0;
  for (const auto& f : files) n += f.rejected;
  return n;
}

namespace {

std::string now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects row-level verdicts for one file.
class RowSink {
 public:
  explicit RowSink(std::string path) { report_.path = std::move(path); }

  void accept() {
    ++report_.rows;
    ++report_.accepted;
  }
  void reject(std::size_t line, const std::string& why) {
    ++report_.rows;
    ++report_.rejected;
    report_.diagnostics.push_back(report_.path + ":" + std::to_string(line) + ": " + why);
  }
  const FileReport& report() const { return report_; }

 private:
  FileReport report_;
};

struct FieldReader {
  const csv::Table::Record& rec;
  std::string error;

  const std::string* text(std::size_t col, const char* name) {
    if (col >= rec.fields.size() || rec.fields[col].empty()) {
      if (error.empty()) error = std::string("missing mandatory field '") + name + "'";
      return nullptr;
    }
    return &rec.fields[col];
  }
  std::optional<double> number(std::size_t col, const char* name) {
    const auto* t = text(col, name);
    if (!t) return std::nullopt;
    double v = 0.0;
    if (!csv::parse_double(*t, v) || !std::isfinite(v)) {
      if (error.empty()) error = std::string("field '") + name + "' is not a number: '" + *t + "'";
      return std::nullopt;
    }
    return v;
  }
  std::optional<long long> integer(std::size_t col, const char* name) {
    const auto* t = text(col, name);
    if (!t) return std::nullopt;
    long long v = 0;
    if (!csv::parse_int(*t, v)) {
      if (error.empty()) error = std::string("field '") + name + "' is not an integer: '" + *t + "'";
      return std::nullopt;
    }
    return v;
  }
};

bool width_ok(const csv::Table& t, const csv::Table::Record& rec, RowSink& sink) {
  if (rec.fields.size() != t.header.size()) {
    sink.reject(rec.line, "expected " + std::to_string(t.header.size()) + " fields, got " +
                              std::to_string(rec.fields.size()));
    return false;
  }
  return true;
}

std::vector<District> read_districts(const std::string& path, RowSink& sink) {
  const auto t = csv::read_file(path);
  const auto c_id = t.column("id", path), c_name = t.column("name", path), c_lat = t.column("lat", path),
             c_lon = t.column("lon", path), c_eld = t.column("elderly_share", path),
             c_dep = t.column("deprivation", path);
  std::vector<District> out;
  std::set<std::string> ids;
  for (const auto& rec : t.records) {
    if (!width_ok(t, rec, sink)) continue;
    FieldReader f{rec, {}};
    const auto* id = f.text(c_id, "id");
    const auto lat = f.number(c_lat, "lat");
    const auto lon = f.number(c_lon, "lon");
    const auto eld = f.number(c_eld, "elderly_share");
    const auto dep = f.number(c_dep, "deprivation");
    if (!f.error.empty()) {
      sink.reject(rec.line, f.error);
      continue;
    }
    District d;
    d.id = *id;
    d.name = rec.fields[c_name];
    d.centroid = {*lat, *lon};
    d.elderly_share = *eld;
    d.deprivation = *dep;
    if (!ids.insert(d.id).second) {
      sink.reject(rec.line, "duplicate district id '" + d.id + "'");
      continue;
    }
    try {
      validate(d);
    } catch (const ValidationError& e) {
      sink.reject(rec.line, e.what());
      continue;
    }
    out.push_back(std::move(d));
    sink.accept();
  }
  return out;
}

void read_series(const std::string& path, const char* value_col, bool strictly_positive,
                 std::vector<District>& districts, std::vector<YearValue> District::*member, RowSink& sink) {
  const auto t = csv::read_file(path);
  const auto c_id = t.column("district_id", path), c_year = t.column("year", path),
             c_val = t.column(value_col, path);
  std::map<std::string, District*> by_id;
  for (auto& d : districts) by_id[d.id] = &d;
  std::map<std::string, std::set<int>> years;
  for (const auto& rec : t.records) {
    if (!width_ok(t, rec, sink)) continue;
    FieldReader f{rec, {}};
    const auto* id = f.text(c_id, "district_id");
    const auto year = f.integer(c_year, "year");
    const auto val = f.number(c_val, value_col);
    if (!f.error.empty()) {
      sink.reject(rec.line, f.error);
      continue;
    }
    auto it = by_id.find(*id);
    if (it == by_id.end()) {
      sink.reject(rec.line, "unknown district id '" + *id + "'");
      continue;
    }
    if (strictly_positive ? *val <= 0.0 : *val < 0.0) {
      sink.reject(rec.line, std::string(value_col) + (strictly_positive ? " must be > 0" : " must be >= 0"));
      continue;
    }
    if (!years[*id].insert(static_cast<int>(*year)).second) {
      sink.reject(rec.line, "duplicate year " + std::to_string(*year) + " for district '" + *id + "'");
      continue;
    }
    (it->second->*member).push_back({static_cast<int>(*year), *val});
    sink.accept();
  }
  for (auto& d : districts) {
    auto& s = d.*member;
    std::sort(s.begin(), s.end(), [](const YearValue& a, const YearValue& b) { return a.year < b.year; });
  }
}

std::vector<Hospital> read_hospitals(const std::string& path, RowSink& sink) {
  const auto t = csv::read_file(path);
  const auto c_id = t.column("id", path), c_name = t.column("name", path), c_lat = t.column("lat", path),
             c_lon = t.column("lon", path), c_beds = t.column("beds", path);
  std::vector<Hospital> out;
  std::set<std::string> ids;
  for (const auto& rec : t.records) {
    if (!width_ok(t, rec, sink)) continue;
    FieldReader f{rec, {}};
    const auto* id = f.text(c_id, "id");
    const auto lat = f.number(c_lat, "lat");
    const auto lon = f.number(c_lon, "lon");
    const auto beds = f.integer(c_beds, "beds");
    if (!f.error.empty()) {
      sink.reject(rec.line, f.error);
      continue;
    }
    Hospital h;
    h.id = *id;
    h.name = rec.fields[c_name];
    h.location = {*lat, *lon};
    if (*beds < 0 || *beds > 1'000'000) {
      sink.reject(rec.line, "beds out of range");
      continue;
    }
    h.beds = static_cast<int>(*beds);
    h.status = SiteStatus::Existing;
    if (!ids.insert(h.id).second) {
      sink.reject(rec.line, "duplicate hospital id '" + h.id + "'");
      continue;
    }
    try {
      validate(h);
    } catch (const ValidationError& e) {
      sink.reject(rec.line, e.what());
      continue;
    }
    out.push_back(std::move(h));
    sink.accept();
  }
  return out;
}

std::vector<LatLon> ring_from_geometry(const json& geom) {
  const auto type = geom.at("type").get<std::string>();
  const json* ring = nullptr;
  if (type == "Polygon") ring = &geom.at("coordinates").at(0);
  else if (type == "MultiPolygon") ring = &geom.at("coordinates").at(0).at(0);
  else throw ValidationError("unsupported boundary geometry type " + type);
  std::vector<LatLon> out;
  for (const auto& pt : *ring) out.push_back({pt.at(1).get<double>(), pt.at(0).get<double>()});
  return out;
}

void read_boundaries(const std::string& path, std::vector<District>& districts, RowSink& sink) {
  std::ifstream in(path);
  if (!in) throw LoadError("missing file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(path + ": invalid GeoJSON: " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection") throw LoadError(path + ": expected a FeatureCollection");
  std::map<std::string, District*> by_id;
  for (auto& d : districts) by_id[d.id] = &d;
  std::size_t idx = 0;
  for (const auto& feat : doc.value("features", json::array())) {
    ++idx;
    try {
      const auto id = feat.at("properties").at("id").get<std::string>();
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        sink.reject(idx, "unknown district id '" + id + "'");
        continue;
      }
      auto ring = ring_from_geometry(feat.at("geometry"));
      for (auto p : ring) validate(p);
      it->second->boundary = std::move(ring);
      sink.accept();
    } catch (const std::exception& e) {
      sink.reject(idx, e.what());
    }
  }
}

}  // namespace

void validate_bundle(const DataBundle& b) {
  if (b.districts.empty()) throw LoadError("no districts");
  if (b.hospitals.empty()) throw LoadError("no supply points");
  std::set<std::string> ids;
  for (const auto& d : b.districts) {
    if (!ids.insert(d.id).second) throw LoadError("duplicate district id '" + d.id + "'");
    validate(d);
  }
  ids.clear();
  for (const auto& h : b.hospitals) {
    if (!ids.insert(h.id).second) throw LoadError("duplicate hospital id '" + h.id + "'");
    validate(h);
  }
  std::vector<std::string> bad;
  for (const auto& d : b.districts) {
    if (d.population_history.empty()) {
      bad.push_back("district '" + d.id + "' has no population series");
      continue;
    }
    if (d.inpatient_history.empty()) {
      bad.push_back("district '" + d.id + "' has no inpatient series");
      continue;
    }
    const int lo = std::max(d.population_history.front().year, d.inpatient_history.front().year);
    const int hi = std::min(d.population_history.back().year, d.inpatient_history.back().year);
    if (lo > hi) bad.push_back("district '" + d.id + "': population and inpatient year ranges do not overlap");
  }
  if (!bad.empty()) throw LoadError("inconsistent series", bad);
}

DataBundle load_bundle(const BundlePaths& paths, LoadReport* report, LoadOptions options) {
  DataBundle b;
  LoadReport local;
  std::vector<std::string> rejected;

  auto collect = [&](const RowSink& sink) {
    local.files.push_back(sink.report());
    for (const auto& d : sink.report().diagnostics) rejected.push_back(d);
  };

  const auto districts_path = paths.resolved(paths.districts, "districts.csv");
  const auto population_path = paths.resolved(paths.population, "population.csv");
  const auto inpatients_path = paths.resolved(paths.inpatients, "inpatients.csv");
  const auto hospitals_path = paths.resolved(paths.hospitals, "hospitals.csv");
  for (const auto* p : {&districts_path, &population_path, &inpatients_path, &hospitals_path}) {
    if (!fs::exists(*p)) throw LoadError("missing file: " + *p);
  }

  {
    RowSink sink(districts_path);
    b.districts = read_districts(districts_path, sink);
    collect(sink);
  }
  {
    RowSink sink(population_path);
    read_series(population_path, "population", true, b.districts, &District::population_history, sink);
    collect(sink);
  }
  {
    RowSink sink(inpatients_path);
    read_series(inpatients_path, "admissions", false, b.districts, &District::inpatient_history, sink);
    collect(sink);
  }
  {
    RowSink sink(hospitals_path);
    b.hospitals = read_hospitals(hospitals_path, sink);
    collect(sink);
  }
  const auto boundaries_path = paths.resolved(paths.boundaries, "boundaries.geojson");
  if (!paths.boundaries.empty() || fs::exists(boundaries_path)) {
    RowSink sink(boundaries_path);
    read_boundaries(boundaries_path, b.districts, sink);
    collect(sink);
  }
  const auto matrix_path = paths.resolved(paths.travel_matrix, "travel_matrix.csv");
  if (!paths.travel_matrix.empty() || fs::exists(matrix_path)) {
    b.travel_override = load_matrix_csv(matrix_path);
  }

  if (report) *report = local;
  if (options.strict && !rejected.empty()) throw LoadError("rejected " + std::to_string(rejected.size()) + " row(s)", rejected);

  validate_bundle(b);
  for (const auto& f : local.files) b.meta.sources.push_back(f.path);
  if (b.travel_override) b.meta.sources.push_back(matrix_path);
  b.meta.loaded_at = now_iso8601();
  return b;
}

void write_bundle(const DataBundle& b, const std::string& dir) {
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + (fs::path(dir) / name).string());
    return out;
  };
  using csv::escape;
  using csv::format_double;
  {
    auto out = open("districts.csv");
    out << "id,name,lat,lon,elderly_share,deprivation\n";
    for (const auto& d : b.districts) {
      out << escape(d.id) << ',' << escape(d.name) << ',' << format_double(d.centroid.lat) << ','
          << format_double(d.centroid.lon) << ',' << format_double(d.elderly_share) << ','
          << format_double(d.deprivation) << '\n';
    }
  }
  {
    auto out = open("population.csv");
    out << "district_id,year,population\n";
    for (const auto& d : b.districts) {
      for (const auto& yv : d.population_history) {
        out << escape(d.id) << ',' << yv.year << ',' << format_double(yv.value) << '\n';
      }
    }
  }
  {
    auto out = open("inpatients.csv");
    out << "district_id,year,admissions\n";
    for (const auto& d : b.districts) {
      for (const auto& yv : d.inpatient_history) {
        out << escape(d.id) << ',' << yv.year << ',' << format_double(yv.value) << '\n';
      }
    }
  }
  {
    auto out = open("hospitals.csv");
    out << "id,name,lat,lon,beds\n";
    for (const auto& h : b.hospitals) {
      out << escape(h.id) << ',' << escape(h.name) << ',' << format_double(h.location.lat) << ','
          << format_double(h.location.lon) << ',' << h.beds << '\n';
    }
  }
  const bool any_boundary =
      std::any_of(b.districts.begin(), b.districts.end(), [](const District& d) { return !d.boundary.empty(); });
  if (any_boundary) {
    json fc = {{"type", "FeatureCollection"}, {"features", json::array()}};
    for (const auto& d : b.districts) {
      if (d.boundary.empty()) continue;
      json ring = json::array();
      for (auto p : d.boundary) ring.push_back({p.lon, p.lat});
      fc["features"].push_back({{"type", "Feature"},
                                {"properties", {{"id", d.id}, {"name", d.name}}},
                                {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}}});
    }
    auto out = open("boundaries.geojson");
    out << fc.dump(1) << '\n';
  }
  if (b.travel_override) write_matrix_csv(*b.travel_override, (fs::path(dir) / "travel_matrix.csv").string());
}

namespace {

struct Anchor {
  const char* name;
  double lat, lon, population;
};

// Approximate centroids and sizes of the six Saarland districts; the first
// is the dense south-west core, the last two the rural north.
constexpr Anchor kAnchors[] = {
    {"Regionalverband Saarbruecken", 49.2402, 6.9969, 329000.0},
    {"Saarlouis", 49.3160, 6.7520, 195000.0},
    {"Saarpfalz-Kreis", 49.2650, 7.2600, 142000.0},
    {"Neunkirchen", 49.3470, 7.1800, 132000.0},
    {"Merzig-Wadern", 49.4740, 6.7300, 103000.0},
    {"St. Wendel", 49.4670, 7.1300, 87000.0},
};

// Dividing by the inverse step yields the double nearest the decimal, so values print short.
double round_to(double v, double step) {
  const double inv = std::round(1.0 / step);
  return std::round(v * inv) / inv;
}

}  // namespace

DataBundle synth_fixture(std::uint64_t seed, int n_districts, int n_hospitals) {
  if (n_districts < 2) throw ValidationError("synth_fixture: n_districts must be >= 2");
  if (n_hospitals < 1) throw ValidationError("synth_fixture: n_hospitals must be >= 1");
  Rng rng(seed);
  DataBundle b;
  constexpr int kFirstYear = 2013;
  constexpr int kYears = 10;

  for (int i = 0; i < n_districts; ++i) {
    District d;
    char id[16];
    std::snprintf(id, sizeof id, "D%02d", i + 1);
    d.id = id;
    double base_pop = 0.0;
    if (i < static_cast<int>(std::size(kAnchors))) {
      const auto& a = kAnchors[i];
      d.name = a.name;
      d.centroid = {round_to(a.lat + rng.uniform(-0.01, 0.01), 1e-6), round_to(a.lon + rng.uniform(-0.01, 0.01), 1e-6)};
      base_pop = a.population * rng.uniform(0.95, 1.05);
    } else {
      d.name = "District " + std::to_string(i + 1);
      d.centroid = {round_to(rng.uniform(49.10, 49.62), 1e-6), round_to(rng.uniform(6.40, 7.40), 1e-6)};
      base_pop = rng.uniform(40000.0, 180000.0);
    }
    // Population: mild decline with noise, aging districts shrink faster.
    d.elderly_share = round_to(rng.uniform(0.17, 0.28), 1e-4);
    const double pop_trend = -0.002 - 0.02 * (d.elderly_share - 0.17) + rng.uniform(-0.002, 0.002);
    // Per-capita admissions around 0.24/year, rising with age structure.
    const double pc0 = 0.20 + 0.3 * (d.elderly_share - 0.17) + rng.uniform(-0.01, 0.01);
    const double pc_trend = rng.uniform(-0.0015, 0.003);
    for (int k = 0; k < kYears; ++k) {
      const int year = kFirstYear + k;
      const double pop = std::round(base_pop * std::pow(1.0 + pop_trend, k) * (1.0 + 0.002 * rng.normal()));
      const double pc = std::max(0.05, pc0 + pc_trend * k + 0.004 * rng.normal());
      d.population_history.push_back({year, std::max(1.0, pop)});
      d.inpatient_history.push_back({year, std::round(pc * pop)});
    }
    d.deprivation = round_to(rng.uniform(0.1, 0.9), 1e-4);
    // Hexagonal display boundary around the centroid.
    const double radius = 6.0 + 4.0 * rng.uniform();
    for (int k = 0; k <= 6; ++k) {
      auto p = destination_point(d.centroid, 60.0 * (k % 6), radius);
      d.boundary.push_back({round_to(p.lat, 1e-6), round_to(p.lon, 1e-6)});
    }
    b.districts.push_back(std::move(d));
  }
  // Spread deprivation over the full interval so normalization is informative.
  b.districts.front().deprivation = 0.1;
  b.districts.back().deprivation = 0.9;

  // Hospitals cluster toward populous districts (weight ~ population^2).
  std::vector<double> cum;
  double total = 0.0;
  for (const auto& d : b.districts) {
    const double p = d.latest_population();
    total += p * p;
    cum.push_back(total);
  }
  for (int j = 0; j < n_hospitals; ++j) {
    const double u = rng.uniform() * total;
    std::size_t k = 0;
    while (k + 1 < cum.size() && cum[k] <= u) ++k;
    const auto& d = b.districts[k];
    Hospital h;
    char id[16];
    std::snprintf(id, sizeof id, "H%03d", j + 1);
    h.id = id;
    h.name = "Klinikum " + d.name + " " + std::to_string(j + 1);
    auto loc = destination_point(d.centroid, rng.uniform(0.0, 360.0), std::abs(rng.normal()) * 5.0 + 0.5);
    h.location = {round_to(loc.lat, 1e-6), round_to(loc.lon, 1e-6)};
    h.beds = static_cast<int>(std::round(rng.uniform(80.0, 600.0)));
    h.status = SiteStatus::Existing;
    b.hospitals.push_back(std::move(h));
  }
  b.meta.sources = {"synthetic:seed=" + std::to_string(seed)};
  b.meta.loaded_at = now_iso8601();
  validate_bundle(b);
  return b;
}

}  // namespace equiplan
