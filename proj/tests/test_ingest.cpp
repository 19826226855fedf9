#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "equiplan/error.hpp"
#include "support.hpp"

using namespace equiplan;
using testing::TempDir;

namespace {

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

void write_minimal(const TempDir& dir) {
  write(dir / "districts.csv", "id,name,lat,lon,elderly_share,deprivation\nA,Alpha,49.2,6.9,0.2,0.4\nB,Beta,49.4,7.0,0.25,0.6\n");
  write(dir / "population.csv", "district_id,year,population\nA,2020,1000\nA,2021,1010\nB,2020,2000\nB,2021,1990\n");
  write(dir / "inpatients.csv", "district_id,year,admissions\nA,2020,200\nA,2021,205\nB,2020,390\nB,2021,400\n");
  write(dir / "hospitals.csv", "id,name,lat,lon,beds\nH1,One,49.25,6.95,120\n");
}

bool mentions(const LoadError& e, const std::string& needle) {
  if (std::string(e.what()).find(needle) != std::string::npos) return true;
  for (const auto& r : e.rows()) {
    if (r.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("shipped fixture equals the generator output") {
  LoadReport report;
  const auto loaded = load_bundle(BundlePaths::in_directory(testing::fixture_dir()), &report);
  const auto generated = synth_fixture(42, 6, 20);
  CHECK(loaded.districts.size() == 6);
  CHECK(loaded.hospitals.size() >= 20);
  CHECK(loaded.same_data(generated));
  CHECK(report.total_rejected() == 0);
}

TEST_CASE("synth_fixture is deterministic") {
  CHECK(synth_fixture(42, 6, 20).same_data(synth_fixture(42, 6, 20)));
  CHECK_FALSE(synth_fixture(42, 6, 20).same_data(synth_fixture(43, 6, 20)));
}

TEST_CASE("smallest synthetic bundle is valid") {
  const auto b = synth_fixture(1, 2, 1);
  CHECK(b.districts.size() == 2);
  CHECK(b.hospitals.size() == 1);
  CHECK_NOTHROW(validate_bundle(b));
  CHECK_THROWS_AS(synth_fixture(1, 1, 1), ValidationError);
  CHECK_THROWS_AS(synth_fixture(1, 2, 0), ValidationError);
}

TEST_CASE("synthetic bundles satisfy invariants over 100 seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto b = synth_fixture(seed, 2 + static_cast<int>(seed % 9), 1 + static_cast<int>(seed % 25));
    CHECK_NOTHROW(validate_bundle(b));
    double total = 0.0;
    for (const auto& d : b.districts) {
      total += d.latest_population();
      CHECK(d.population_history.size() >= 8);
      CHECK(d.inpatient_history.size() >= 8);
      CHECK(d.elderly_share >= 0.17);
      CHECK(d.elderly_share <= 0.28);
    }
    CHECK(total > 0.0);
    for (const auto& h : b.hospitals) CHECK(h.beds > 0);
  }
}

TEST_CASE("write then load reproduces the bundle") {
  for (std::uint64_t seed : {3u, 42u, 99u}) {
    TempDir dir("roundtrip");
    const auto b = synth_fixture(seed, 5, 9);
    write_bundle(b, dir.str());
    CHECK(load_bundle(BundlePaths::in_directory(dir.str())).same_data(b));
  }
}

TEST_CASE("travel override round trips with the bundle") {
  TempDir dir("override");
  auto b = synth_fixture(5, 3, 2);
  std::vector<double> minutes;
  for (int i = 0; i < 6; ++i) minutes.push_back(5.0 + i);
  b.travel_override = TravelTimeMatrix({b.districts[0].id, b.districts[1].id, b.districts[2].id},
                                       {b.hospitals[0].id, b.hospitals[1].id}, minutes);
  write_bundle(b, dir.str());
  const auto loaded = load_bundle(BundlePaths::in_directory(dir.str()));
  REQUIRE(loaded.travel_override);
  CHECK(*loaded.travel_override == *b.travel_override);
}

TEST_CASE("loader errors") {
  TempDir dir("errors");
  write_minimal(dir);
  CHECK_NOTHROW(load_bundle(BundlePaths::in_directory(dir.str())));

  SUBCASE("empty hospitals file") {
    write(dir / "hospitals.csv", "id,name,lat,lon,beds\n");
    try {
      load_bundle(BundlePaths::in_directory(dir.str()));
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(mentions(e, "no supply points"));
    }
  }
  SUBCASE("duplicate district id") {
    write(dir / "districts.csv",
          "id,name,lat,lon,elderly_share,deprivation\nA,Alpha,49.2,6.9,0.2,0.4\nB,Beta,49.4,7.0,0.25,0.6\n"
          "B,Again,49.5,7.1,0.2,0.5\n");
    try {
      load_bundle(BundlePaths::in_directory(dir.str()));
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(mentions(e, "duplicate district id 'B'"));
    }
  }
  SUBCASE("missing file is named") {
    std::filesystem::remove(dir / "inpatients.csv");
    try {
      load_bundle(BundlePaths::in_directory(dir.str()));
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(mentions(e, "inpatients.csv"));
    }
  }
  SUBCASE("non-overlapping year ranges") {
    write(dir / "inpatients.csv", "district_id,year,admissions\nA,2020,200\nB,2010,390\nB,2011,400\n");
    try {
      load_bundle(BundlePaths::in_directory(dir.str()));
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(mentions(e, "'B'"));
      CHECK_FALSE(mentions(e, "'A'"));
    }
  }
  SUBCASE("missing elderly share is rejected, not imputed") {
    write(dir / "districts.csv",
          "id,name,lat,lon,elderly_share,deprivation\nA,Alpha,49.2,6.9,,0.4\nB,Beta,49.4,7.0,0.25,0.6\n");
    try {
      load_bundle(BundlePaths::in_directory(dir.str()));
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      REQUIRE(e.rows().size() >= 1);
      CHECK(mentions(e, "elderly_share"));
      CHECK(mentions(e, "districts.csv:2:"));
    }
  }
  SUBCASE("malformed rows are reported and counted") {
    write(dir / "population.csv",
          "district_id,year,population\nA,2020,1000\nA,2021,abc\nB,2020,2000\nB,2021,1990\nZ,2020,5\nA,2020,7\n");
    LoadReport report;
    CHECK_THROWS_AS(load_bundle(BundlePaths::in_directory(dir.str()), &report), LoadError);
    const auto bundle = load_bundle(BundlePaths::in_directory(dir.str()), &report, LoadOptions{false});
    const std::size_t input_rows[] = {2, 6, 4, 1};
    REQUIRE(report.files.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(report.files[i].rows == input_rows[i]);
      CHECK(report.files[i].accepted + report.files[i].rejected == input_rows[i]);
    }
    CHECK(report.total_rejected() == 3);
    CHECK(bundle.districts[0].population_history.size() == 1);
  }
}
