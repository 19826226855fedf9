#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "equiplan/geo.hpp"

namespace equiplan {

struct BundleMeta {
  std::vector<std::string> sources;
  std::string loaded_at;  // ISO-8601 UTC
};

struct DataBundle {
  std::vector<District> districts;
  std::vector<Hospital> hospitals;  // status Existing only
  std::optional<TravelTimeMatrix> travel_override;
  BundleMeta meta;

  const District* find_district(const std::string& id) const;

  /// Field-by-field equality; `meta` is ignored.
  bool same_data(const DataBundle& other) const;
};

/// Where the loader looks. Paths left empty default to the standard file
/// names inside `dir`; `boundaries` and `travel_matrix` are optional.
struct BundlePaths {
  std::string dir;
  std::string districts;
  std::string population;
  std::string inpatients;
  std::string hospitals;
  std::string boundaries;
  std::string travel_matrix;

  static BundlePaths in_directory(const std::string& dir);
  std::string resolved(const std::string& explicit_path, const char* default_name) const;
};

struct FileReport {
  std::string path;
  std::size_t rows = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<std::string> diagnostics;
};

struct LoadReport {
  std::vector<FileReport> files;
  std::size_t total_rejected() const;
};

struct LoadOptions {
  /// When false, rejected rows are skipped (and reported) instead of failing the load.
  bool strict = true;
};

/// Throws LoadError with one line per offending row.
DataBundle load_bundle(const BundlePaths& paths, LoadReport* report = nullptr, LoadOptions options = {});

/// Writes districts/population/inpatients/hospitals CSVs (and boundaries.geojson
/// when any district has a boundary) so that load_bundle reproduces the bundle.
void write_bundle(const DataBundle& bundle, const std::string& dir);

/// Deterministic Saarland-like synthetic bundle.
DataBundle synth_fixture(std::uint64_t seed, int n_districts, int n_hospitals);

/// Checks cross-record invariants (unique ids, non-empty supply, overlapping series).
void validate_bundle(const DataBundle& bundle);

}  // namespace equiplan
