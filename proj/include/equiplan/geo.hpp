#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace equiplan {

inline constexpr double kEarthRadiusKm = 6371.0088;
/// Points closer than this are treated as the same location.
inline constexpr double kCoincideKm = 0.001;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const LatLon&, const LatLon&) = default;
};

struct YearValue {
  int year = 0;
  double value = 0.0;

  friend bool operator==(const YearValue&, const YearValue&) = default;
};

struct District {
  std::string id;
  std::string name;
  LatLon centroid;
  std::vector<LatLon> boundary;  // outer ring, may be empty
  std::vector<YearValue> population_history;
  double elderly_share = 0.0;
  double deprivation = 0.0;
  std::vector<YearValue> inpatient_history;

  /// Population of the most recent recorded year.
  double latest_population() const;

  friend bool operator==(const District&, const District&) = default;
};

enum class SiteStatus { Existing, Candidate, Proposed };

const char* to_string(SiteStatus s);

struct Hospital {
  std::string id;
  std::string name;
  LatLon location;
  int beds = 0;
  SiteStatus status = SiteStatus::Existing;

  friend bool operator==(const Hospital&, const Hospital&) = default;
};

/// Throws ValidationError when any District/Hospital invariant fails.
void validate(const District& d);
void validate(const Hospital& h);
void validate(LatLon p);

struct TravelModel {
  double speed_kmh = 60.0;
  double detour_factor = 1.3;

  void validate() const;
};

/// Dense row-major district x site matrix of travel minutes.
class TravelTimeMatrix {
 public:
  TravelTimeMatrix() = default;
  TravelTimeMatrix(std::vector<std::string> district_ids, std::vector<std::string> site_ids,
                   std::vector<double> minutes);

  std::size_t rows() const noexcept { return district_ids_.size(); }
  std::size_t cols() const noexcept { return site_ids_.size(); }

  double at(std::size_t row, std::size_t col) const noexcept { return minutes_[row * cols() + col]; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {minutes_.data() + r * cols(), cols()};
  }

  const std::vector<std::string>& district_ids() const noexcept { return district_ids_; }
  const std::vector<std::string>& site_ids() const noexcept { return site_ids_; }
  const std::vector<double>& data() const noexcept { return minutes_; }

  std::optional<std::size_t> district_index(const std::string& id) const;
  std::optional<std::size_t> site_index(const std::string& id) const;

  /// Lookup by ids; throws ValidationError for unknown ids.
  double minutes(const std::string& district_id, const std::string& site_id) const;

  friend bool operator==(const TravelTimeMatrix& a, const TravelTimeMatrix& b) {
    return a.district_ids_ == b.district_ids_ && a.site_ids_ == b.site_ids_ && a.minutes_ == b.minutes_;
  }

 private:
  std::vector<std::string> district_ids_;
  std::vector<std::string> site_ids_;
  std::vector<double> minutes_;
  std::unordered_map<std::string, std::size_t> row_of_;
  std::unordered_map<std::string, std::size_t> col_of_;
};

double haversine_km(LatLon a, LatLon b);

/// Point reached by travelling `distance_km` along a great circle at `bearing_deg`
/// (clockwise from north) from `origin`.
LatLon destination_point(LatLon origin, double bearing_deg, double distance_km);

double travel_minutes(LatLon a, LatLon b, const TravelModel& model);

/// Rows follow `districts`, columns follow `sites`. Pairs present in `override`
/// take its value verbatim; the rest come from the travel model.
/// Rows are filled in parallel; output is bit-identical to the serial version.
TravelTimeMatrix build_matrix(std::span<const District> districts, std::span<const Hospital> sites,
                              const TravelModel& model, const TravelTimeMatrix* override = nullptr);

namespace serial {
TravelTimeMatrix build_matrix(std::span<const District> districts, std::span<const Hospital> sites,
                              const TravelModel& model, const TravelTimeMatrix* override = nullptr);
}  // namespace serial

/// Reads `district_id,site_id,minutes`. The file must cover the full cross
/// product of the ids it mentions.
TravelTimeMatrix load_matrix_csv(const std::string& path);
void write_matrix_csv(const TravelTimeMatrix& m, const std::string& path);

}  // namespace equiplan
