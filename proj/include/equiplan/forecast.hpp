#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "equiplan/ingest.hpp"

namespace equiplan {

/// Admissions per resident per year for one district.
struct DemandSeries {
  std::string district_id;
  std::vector<int> years;
  std::vector<double> per_capita;
};

/// Per-capita series over the years where both population and admissions
/// are recorded. Throws ValidationError when the overlap is empty or a
/// per-capita value is not positive.
DemandSeries demand_series(const District& d);

struct ArimaSpec {
  int p = 0;  // AR order, 0..2
  int d = 0;  // differencing, 0..1
  int q = 0;  // MA order, 0..2

  void validate() const;
  std::string label() const;  // "ARIMA(p,d,q)"

  friend bool operator==(const ArimaSpec&, const ArimaSpec&) = default;
};

/// Every (p,d,q) with p,q <= 2 and d <= 1, ordered by p, then d, then q.
std::vector<ArimaSpec> default_arima_grid();

struct ArimaFit {
  ArimaSpec spec;
  /// Process mean of the (differenced) series; fixed at 0 when d = 1, so
  /// ARIMA(p,1,q) carries no drift.
  double mean = 0.0;
  std::vector<double> ar;
  std::vector<double> ma;
  double sigma2 = 0.0;   // innovation variance, CSS / effective sample size
  double css = 0.0;      // conditional sum of squared residuals
  int effective_n = 0;   // residuals entering the CSS
  double aicc = 0.0;     // +inf when the sample is too small for the correction
  int iterations = 0;

  /// Observations on the original scale, kept for forecasting.
  std::vector<double> history;
};

/// Conditional-sum-of-squares objective used by fit_arima; exposed for tests.
/// `params` = [mean (d = 0 only), ar..., ma...].
double arima_css(std::span<const double> series, const ArimaSpec& spec, std::span<const double> params);

/// True when every root of 1 - a1 z - a2 z^2 lies outside the unit circle.
bool ar_stationary(std::span<const double> ar);
/// True when every root of 1 + b1 z + b2 z^2 lies outside the unit circle.
bool ma_invertible(std::span<const double> ma);

/// Fits by minimizing the CSS with Nelder-Mead.
/// Throws FitError(TooShort) when series.size() < p + d + q + 4 and
/// FitError(Unstable) when the AR estimate is not stationary.
ArimaFit fit_arima(std::span<const double> series, const ArimaSpec& spec);

/// Point forecasts for the next `steps` periods (future shocks set to zero).
std::vector<double> arima_forecast(const ArimaFit& fit, int steps);

struct LinearTrend {
  double intercept = 0.0;  // value at `origin`
  double slope = 0.0;
  double origin = 0.0;

  double at(double x) const { return intercept + slope * (x - origin); }
};

/// Ordinary least squares line through (x, y). Needs >= 2 points.
LinearTrend fit_linear_trend(std::span<const double> x, std::span<const double> y);

enum class ForecastMethod { Arima, LinearTrend };

struct DemandForecast {
  std::string district_id;
  std::vector<int> horizon_years;
  std::vector<double> point_forecast;      // admissions, clamped at 0
  std::vector<double> per_capita_forecast;
  std::vector<double> population_forecast;
  ForecastMethod method = ForecastMethod::LinearTrend;
  std::optional<ArimaSpec> arima;
  double aicc = 0.0;
  bool clamped = false;  // some forecast went negative and was set to 0

  std::string method_label() const;
  /// Mean admissions over the horizon years.
  double mean_admissions() const;
};

using ForecastTable = std::map<std::string, DemandForecast>;

/// Per district: best spec on `grid` by AICc, per-capita forecast times the
/// linearly projected population; LinearTrend on per-capita when every ARIMA
/// fit fails or `grid` is empty. Horizon years run from the year after the
/// last observation through `horizon` inclusive.
ForecastTable forecast_demand(const DataBundle& bundle, int horizon,
                              std::span<const ArimaSpec> grid);

DemandForecast forecast_district(const District& d, int horizon, std::span<const ArimaSpec> grid);

/// `district_id,year,admissions,method`
std::string forecasts_csv(const ForecastTable& table);

}  // namespace equiplan
