#include <cmath>
#include <limits>

#include "doctest.h"
#include "equiplan/error.hpp"
#include "equiplan/indices.hpp"
#include "support.hpp"

using namespace equiplan;
using testing::flat_forecast;
using testing::make_district;
using testing::make_site;

namespace {

TravelTimeMatrix matrix_of(const std::vector<District>& ds, const std::vector<Hospital>& hs,
                           const std::vector<double>& minutes) {
  std::vector<std::string> r, c;
  for (const auto& d : ds) r.push_back(d.id);
  for (const auto& h : hs) c.push_back(h.id);
  return TravelTimeMatrix(r, c, minutes);
}

struct RandomAccess {
  std::vector<District> districts;
  std::vector<Hospital> sites;
  TravelTimeMatrix matrix;
};

RandomAccess random_access(Rng& rng) {
  RandomAccess ra;
  const int nd = 2 + static_cast<int>(rng.uniform() * 10);
  const int ns = 1 + static_cast<int>(rng.uniform() * 8);
  for (int i = 0; i < nd; ++i) {
    ra.districts.push_back(make_district("D" + std::to_string(i), testing::random_point(rng),
                                         std::round(rng.uniform(1e3, 2e5))));
  }
  for (int j = 0; j < ns; ++j) {
    ra.sites.push_back(make_site("H" + std::to_string(j), testing::random_point(rng),
                                 10 + static_cast<int>(rng.uniform() * 500)));
  }
  ra.matrix = build_matrix(ra.districts, ra.sites, TravelModel{});
  return ra;
}

}  // namespace

TEST_CASE("2SFCA on a two-district example") {
  const std::vector<District> ds{make_district("A", {49.0, 7.0}, 400), make_district("B", {49.1, 7.0}, 400)};
  const std::vector<Hospital> hs{make_site("H", {49.05, 7.0}, 100)};
  const auto m = matrix_of(ds, hs, {10.0, 20.0});
  const auto a = two_step_fca(ds, hs, m, 30.0);
  REQUIRE(a.size() == 2);
  CHECK(a[0].score == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(a[1].score == doctest::Approx(0.125).epsilon(1e-12));

  SUBCASE("threshold is inclusive") {
    const auto edge = matrix_of(ds, hs, {30.0, 30.0000001});
    const auto b = two_step_fca(ds, hs, edge, 30.0);
    CHECK(b[0].score == doctest::Approx(0.25));
    CHECK(b[1].score == 0.0);
  }
  SUBCASE("site outside every catchment") {
    const auto far = matrix_of(ds, hs, {45.0, 50.0});
    for (const auto& s : two_step_fca(ds, hs, far, 30.0)) CHECK(s.score == 0.0);
  }
  SUBCASE("doubling beds doubles every score") {
    auto doubled = hs;
    doubled[0].beds = 200;
    const auto b = two_step_fca(ds, doubled, m, 30.0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i].score == 2.0 * a[i].score);
  }
  SUBCASE("bad threshold") {
    CHECK_THROWS_AS(two_step_fca(ds, hs, m, 0.0), ConfigError);
    CHECK_THROWS_AS(two_step_fca(ds, hs, m, std::nan("")), ConfigError);
  }
  SUBCASE("site missing from matrix") {
    const std::vector<Hospital> other{make_site("Z", {49.0, 7.0}, 10)};
    CHECK_THROWS_AS(two_step_fca(ds, other, m, 30.0), ValidationError);
  }
}

TEST_CASE("2SFCA conserves beds reachable by anyone") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    auto ra = random_access(rng);
    const double t0 = rng.uniform(5.0, 60.0);
    const auto a = two_step_fca(ra.districts, ra.sites, ra.matrix, t0);
    double lhs = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) lhs += a[i].score * ra.districts[i].latest_population();
    double rhs = 0.0;
    for (const auto& s : ra.sites) {
      bool reached = false;
      for (const auto& d : ra.districts) reached = reached || ra.matrix.minutes(d.id, s.id) <= t0;
      if (reached) rhs += s.beds;
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    const auto ref = serial::two_step_fca(ra.districts, ra.sites, ra.matrix, t0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].score == ref[i].score);
  }
}

TEST_CASE("min-max normalization") {
  const std::vector<double> v{2.0, 4.0, 3.0};
  CHECK(min_max(v, 0.5) == std::vector<double>{0.0, 1.0, 0.5});
  const std::vector<double> flat{7.0, 7.0};
  CHECK(min_max(flat, 0.5) == std::vector<double>{0.5, 0.5});
  CHECK(min_max(flat, 0.0) == std::vector<double>{0.0, 0.0});
  CHECK(min_max(std::vector<double>{}, 0.5).empty());
}

TEST_CASE("vulnerability") {
  std::vector<District> ds{make_district("A", {49.0, 7.0}, 1, 0.10, 0.0), make_district("B", {49.1, 7.0}, 1, 0.30, 1.0),
                           make_district("C", {49.2, 7.0}, 1, 0.20, 0.25)};
  const auto v = vulnerability(ds, {});
  CHECK(v[0] == doctest::Approx(0.0));
  CHECK(v[1] == doctest::Approx(1.0));
  CHECK(v[2] == doctest::Approx(0.5 * 0.25 + 0.5 * 0.5));
  const auto dep_only = vulnerability(ds, {1.0, 0.0});
  CHECK(dep_only[2] == doctest::Approx(0.25));
  CHECK_THROWS_AS(vulnerability(ds, {0.7, 0.7}), ConfigError);
  CHECK_THROWS_AS(vulnerability(ds, {1.5, -0.5}), ConfigError);
}

TEST_CASE("equity index") {
  std::vector<District> ds{make_district("A", {49.0, 7.0}, 1000, 0.1, 0.0),
                           make_district("B", {49.1, 7.0}, 1000, 0.3, 1.0),
                           make_district("C", {49.2, 7.0}, 1000, 0.2, 0.5)};
  ForecastTable ft;
  ft["A"] = flat_forecast("A", 3650);
  ft["B"] = flat_forecast("B", 7300);
  ft["C"] = flat_forecast("C", 0);
  const std::vector<AccessScore> none{{"A", 0.0, 30}, {"B", 0.0, 30}, {"C", 0.0, 30}};
  const BedConversion conv{7.2, 1.0};
  const auto rec = equity_index(ds, ft, none, {}, conv);
  CHECK(rec[0].demand_beds == doctest::Approx(72.0));
  CHECK(rec[1].demand_beds == doctest::Approx(144.0));
  CHECK(rec[0].unmet_norm == doctest::Approx(0.5));
  CHECK(rec[1].unmet_norm == doctest::Approx(1.0));
  CHECK(rec[2].unmet_norm == 0.0);
  CHECK(rec[1].equity_index == doctest::Approx(1.0));
  CHECK(rec[0].equity_index == doctest::Approx(0.0));  // vulnerability 0
  for (const auto& r : rec) {
    CHECK(r.equity_index >= 0.0);
    CHECK(r.equity_index <= 1.0);
  }

  SUBCASE("supply covering demand gives zero unmet") {
    const std::vector<AccessScore> rich{{"A", 1.0, 30}, {"B", 1.0, 30}, {"C", 1.0, 30}};
    for (const auto& r : equity_index(ds, ft, rich, {}, conv)) {
      CHECK(r.unmet == 0.0);
      CHECK(r.equity_index == 0.0);
    }
  }
  SUBCASE("invariant to a common demand scale") {
    ForecastTable scaled;
    for (const auto& [id, f] : ft) scaled[id] = flat_forecast(id, f.point_forecast[0] * 3.3);
    const auto again = equity_index(ds, scaled, none, {}, conv);
    for (std::size_t i = 0; i < rec.size(); ++i) CHECK(again[i].equity_index == doctest::Approx(rec[i].equity_index));
  }
  SUBCASE("missing inputs") {
    ForecastTable partial{{"A", ft["A"]}};
    CHECK_THROWS_AS(equity_index(ds, partial, none, {}, conv), ValidationError);
    CHECK_THROWS_AS(equity_index(ds, ft, std::vector<AccessScore>{{"A", 0, 30}}, {}, conv), ValidationError);
  }
  SUBCASE("aggregate is population weighted") {
    const std::vector<double> pop{1.0, 3.0, 0.0};
    CHECK(aggregate_equity(rec, pop) == doctest::Approx(0.75));
    CHECK(aggregate_equity(rec, std::vector<double>{0, 0, 0}) == 0.0);
    CHECK_THROWS_AS(aggregate_equity(rec, std::vector<double>{1.0}), ValidationError);
  }
}

TEST_CASE("bed conversion") {
  BedConversion c;
  CHECK(c.kappa() == doctest::Approx(7.2 / 365.0 / 0.85));
  c.avg_stay_days = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("HFDR") {
  std::vector<District> ds{make_district("A", {49.0, 7.0}, 1000), make_district("B", {49.5, 7.0}, 1000)};
  const BedConversion conv{365.0, 1.0};  // kappa = 1: admissions equal beds
  ForecastTable ft;
  ft["A"] = flat_forecast("A", 120);
  ft["B"] = flat_forecast("B", 0);
  const std::vector<Hospital> hs{make_site("H1", {49.01, 7.0}, 80), make_site("H2", {48.99, 7.0}, 40)};
  const auto r = hfdr(ds, hs, ft, conv);
  CHECK(r[0].beds_in_district == 120);
  CHECK(r[0].hfdr == doctest::Approx(1.0));
  CHECK(r[1].beds_in_district == 0);
  CHECK(r[1].zero_demand);
  CHECK(std::isinf(r[1].hfdr));
  CHECK(hfdr_aggregate(r) == doctest::Approx(1.0));

  SUBCASE("district without a hospital has ratio 0") {
    ft["B"] = flat_forecast("B", 50);
    const auto r2 = hfdr(ds, hs, ft, conv);
    CHECK(r2[1].hfdr == 0.0);
    CHECK(hfdr_aggregate(r2) == doctest::Approx(0.5));
  }
  SUBCASE("boundary polygon wins over nearest centroid") {
    // square around B's centroid that also contains a point nearer to A
    ds[1].boundary = {{49.0, 6.9}, {49.0, 7.1}, {49.6, 7.1}, {49.6, 6.9}, {49.0, 6.9}};
    const LatLon p{49.1, 7.0};
    CHECK(attribute_to_district(p, ds) == 1);
    ds[1].boundary.clear();
    CHECK(attribute_to_district(p, ds) == 0);
  }
  CHECK(hfdr_aggregate(std::vector<HfdrRecord>{}) == 0.0);
}

TEST_CASE("point in ring") {
  const std::vector<LatLon> sq{{0, 0}, {0, 1}, {1, 1}, {1, 0}};
  CHECK(point_in_ring({0.5, 0.5}, sq));
  CHECK_FALSE(point_in_ring({1.5, 0.5}, sq));
  CHECK_FALSE(point_in_ring({0.5, -0.1}, sq));
  CHECK_FALSE(point_in_ring({0.5, 0.5}, std::vector<LatLon>{{0, 0}, {1, 1}}));
}

TEST_CASE("HFDR recomputed by hand on the fixture") {
  const auto bundle = synth_fixture(42, 6, 20);
  const auto grid = default_arima_grid();
  const auto ft = forecast_demand(bundle, 2030, grid);
  const auto r = hfdr(bundle.districts, bundle.hospitals, ft);
  const double kappa = 7.2 / 365.0 / 0.85;
  for (std::size_t i = 0; i < bundle.districts.size(); ++i) {
    const auto& d = bundle.districts[i];
    int beds = 0;
    for (const auto& h : bundle.hospitals) {
      // containing polygon, else nearest centroid
      std::optional<std::size_t> owner;
      for (std::size_t k = 0; k < bundle.districts.size() && !owner; ++k) {
        if (!bundle.districts[k].boundary.empty() && point_in_ring(h.location, bundle.districts[k].boundary)) owner = k;
      }
      if (!owner) {
        double best = 1e300;
        for (std::size_t k = 0; k < bundle.districts.size(); ++k) {
          const double km = haversine_km(h.location, bundle.districts[k].centroid);
          if (km < best) {
            best = km;
            owner = k;
          }
        }
      }
      if (*owner == i) beds += h.beds;
    }
    const auto& pf = ft.at(d.id).point_forecast;
    double mean = 0.0;
    for (double v : pf) mean += v;
    mean /= static_cast<double>(pf.size());
    CHECK(r[i].beds_in_district == beds);
    CHECK(r[i].hfdr == doctest::Approx(beds / (mean * kappa)).epsilon(1e-12));
  }
}

TEST_CASE("adding a site never increases unmet need") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto ra = random_access(rng);
    ForecastTable ft;
    for (const auto& d : ra.districts) ft[d.id] = flat_forecast(d.id, d.latest_population() * rng.uniform(0.05, 0.3));
    const auto before = two_step_fca(ra.districts, ra.sites, ra.matrix, 30.0);
    auto more = ra.sites;
    more.push_back(make_site("NEW", testing::random_point(rng), 300));
    const auto m2 = build_matrix(ra.districts, more, TravelModel{});
    const auto after = two_step_fca(ra.districts, more, m2, 30.0);
    const auto e0 = equity_index(ra.districts, ft, before, {});
    const auto e1 = equity_index(ra.districts, ft, after, {});
    for (std::size_t i = 0; i < e0.size(); ++i) CHECK(e1[i].unmet <= e0[i].unmet * (1 + 1e-12) + 1e-12);
  }
}
