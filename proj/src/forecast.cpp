#include "equiplan/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

#include "equiplan/csv.hpp"
#include "equiplan/error.hpp"
#include "equiplan/simplex.hpp"

namespace equiplan {

namespace {
constexpr double kRejected = 1e300;

std::vector<double> difference(std::span<const double> y, int d) {
  std::vector<double> w(y.begin(), y.end());
  for (int k = 0; k < d; ++k) {
    std::vector<double> next;
    for (std::size_t i = 1; i < w.size(); ++i) next.push_back(w[i] - w[i - 1]);
    w = std::move(next);
  }
  return w;
}

struct Unpacked {
  double mean = 0.0;
  std::span<const double> ar;
  std::span<const double> ma;
};

Unpacked unpack(const ArimaSpec& spec, std::span<const double> params) {
  Unpacked u;
  std::size_t k = 0;
  if (spec.d == 0) u.mean = params[k++];
  u.ar = params.subspan(k, static_cast<std::size_t>(spec.p));
  u.ma = params.subspan(k + static_cast<std::size_t>(spec.p), static_cast<std::size_t>(spec.q));
  return u;
}

// Residuals of the differenced series; entries before index p are zero and
// excluded from the CSS.
std::vector<double> residuals(std::span<const double> w, const ArimaSpec& spec, const Unpacked& u) {
  const std::size_t n = w.size();
  const auto p = static_cast<std::size_t>(spec.p);
  std::vector<double> e(n, 0.0);
  for (std::size_t t = p; t < n; ++t) {
    double pred = u.mean;
    for (std::size_t i = 0; i < u.ar.size(); ++i) pred += u.ar[i] * (w[t - i - 1] - u.mean);
    for (std::size_t j = 0; j < u.ma.size(); ++j) {
      if (t >= j + 1) pred += u.ma[j] * e[t - j - 1];
    }
    e[t] = w[t] - pred;
  }
  return e;
}

}  // namespace

void ArimaSpec::validate() const {
  if (p < 0 || p > 2 || d < 0 || d > 1 || q < 0 || q > 2) {
    throw ConfigError("ARIMA orders out of range: " + label());
  }
}

std::string ArimaSpec::label() const {
  return "ARIMA(" + std::to_string(p) + "," + std::to_string(d) + "," + std::to_string(q) + ")";
}

std::vector<ArimaSpec> default_arima_grid() {
  std::vector<ArimaSpec> g;
  for (int p = 0; p <= 2; ++p)
    for (int d = 0; d <= 1; ++d)
      for (int q = 0; q <= 2; ++q) g.push_back({p, d, q});
  return g;
}

DemandSeries demand_series(const District& d) {
  DemandSeries s;
  s.district_id = d.id;
  std::size_t i = 0, j = 0;
  const auto& pop = d.population_history;
  const auto& adm = d.inpatient_history;
  while (i < pop.size() && j < adm.size()) {
    if (pop[i].year < adm[j].year) ++i;
    else if (adm[j].year < pop[i].year) ++j;
    else {
      const double pc = adm[j].value / pop[i].value;
      if (!(pc > 0.0) || !std::isfinite(pc)) {
        throw ValidationError("district " + d.id + ": per-capita demand must be > 0 in year " +
                              std::to_string(pop[i].year));
      }
      s.years.push_back(pop[i].year);
      s.per_capita.push_back(pc);
      ++i;
      ++j;
    }
  }
  if (s.years.empty()) throw ValidationError("district " + d.id + ": no overlapping population/inpatient years");
  return s;
}

bool ar_stationary(std::span<const double> ar) {
  switch (ar.size()) {
    case 0: return true;
    case 1: return std::abs(ar[0]) < 1.0;
    case 2: return ar[0] + ar[1] < 1.0 && ar[1] - ar[0] < 1.0 && std::abs(ar[1]) < 1.0;
    default: throw ConfigError("AR order above 2 is not supported");
  }
}

bool ma_invertible(std::span<const double> ma) {
  // 1 + b1 z + b2 z^2 has roots outside the unit circle iff 1 - (-b1) z - (-b2) z^2 does.
  double neg[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < ma.size() && i < 2; ++i) neg[i] = -ma[i];
  return ar_stationary(std::span<const double>(neg, ma.size()));
}

double arima_css(std::span<const double> series, const ArimaSpec& spec, std::span<const double> params) {
  const auto w = difference(series, spec.d);
  const auto u = unpack(spec, params);
  const auto e = residuals(w, spec, u);
  double css = 0.0;
  for (std::size_t t = static_cast<std::size_t>(spec.p); t < e.size(); ++t) css += e[t] * e[t];
  return css;
}

ArimaFit fit_arima(std::span<const double> series, const ArimaSpec& spec) {
  spec.validate();
  const auto min_len = static_cast<std::size_t>(spec.p + spec.d + spec.q + 4);
  if (series.size() < min_len) {
    throw FitError(FitError::Kind::TooShort, spec.label() + ": series has " + std::to_string(series.size()) +
                                                 " points, needs " + std::to_string(min_len));
  }
  const auto w = difference(series, spec.d);
  double wmean = 0.0;
  for (double v : w) wmean += v;
  wmean /= static_cast<double>(w.size());

  std::vector<double> x0;
  if (spec.d == 0) x0.push_back(wmean);
  for (int i = 0; i < spec.p + spec.q; ++i) x0.push_back(0.0);

  auto objective = [&](const std::vector<double>& x) {
    const auto u = unpack(spec, x);
    if (!ma_invertible(u.ma)) return kRejected;
    const auto e = residuals(w, spec, u);
    double css = 0.0;
    for (std::size_t t = static_cast<std::size_t>(spec.p); t < e.size(); ++t) css += e[t] * e[t];
    return std::isfinite(css) ? css : kRejected;
  };

  SimplexOptions opt;
  opt.initial_step = 0.1;
  opt.max_iterations = 4000;
  opt.restarts = 3;
  const auto sol = nelder_mead(objective, x0, opt);
  if (!(sol.value < kRejected)) {
    throw FitError(FitError::Kind::NoConvergence, spec.label() + ": no admissible parameter found");
  }

  ArimaFit fit;
  fit.spec = spec;
  const auto u = unpack(spec, sol.x);
  fit.mean = u.mean;
  fit.ar.assign(u.ar.begin(), u.ar.end());
  fit.ma.assign(u.ma.begin(), u.ma.end());
  if (!ar_stationary(fit.ar)) {
    throw FitError(FitError::Kind::Unstable, spec.label() + ": AR estimate is not stationary");
  }
  fit.css = sol.value;
  fit.effective_n = static_cast<int>(w.size()) - spec.p;
  fit.sigma2 = fit.css / fit.effective_n;
  fit.iterations = sol.iterations;
  fit.history.assign(series.begin(), series.end());

  const int k = spec.p + spec.q + (spec.d == 0 ? 1 : 0) + 1;
  const double n = fit.effective_n;
  if (n - k - 1 <= 0) {
    fit.aicc = std::numeric_limits<double>::infinity();
  } else {
    double scale = 0.0;
    for (double v : series) scale += v * v;
    scale /= static_cast<double>(series.size());
    const double s2 = std::max(fit.sigma2, 1e-20 * std::max(scale, 1e-300));
    fit.aicc = n * std::log(s2) + 2.0 * k + 2.0 * k * (k + 1) / (n - k - 1);
  }
  return fit;
}

std::vector<double> arima_forecast(const ArimaFit& fit, int steps) {
  const auto& spec = fit.spec;
  auto w = difference(fit.history, spec.d);
  std::vector<double> params;
  if (spec.d == 0) params.push_back(fit.mean);
  params.insert(params.end(), fit.ar.begin(), fit.ar.end());
  params.insert(params.end(), fit.ma.begin(), fit.ma.end());
  const auto u = unpack(spec, params);
  auto e = residuals(w, spec, u);
  const std::size_t n = w.size();
  std::vector<double> out;
  double level = fit.history.back();
  for (int h = 0; h < steps; ++h) {
    const std::size_t t = w.size();
    double pred = fit.mean;
    for (std::size_t i = 0; i < fit.ar.size(); ++i) {
      if (t >= i + 1) pred += fit.ar[i] * (w[t - i - 1] - fit.mean);
    }
    for (std::size_t j = 0; j < fit.ma.size(); ++j) {
      if (t >= j + 1 && t - j - 1 < n) pred += fit.ma[j] * e[t - j - 1];
    }
    w.push_back(pred);
    e.push_back(0.0);
    if (spec.d == 1) {
      level += pred;
      out.push_back(level);
    } else {
      out.push_back(pred);
    }
  }
  return out;
}

LinearTrend fit_linear_trend(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("linear trend needs at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw ValidationError("linear trend needs distinct x values");
  return {my, sxy / sxx, mx};
}

std::string DemandForecast::method_label() const {
  if (method == ForecastMethod::Arima && arima) return arima->label();
  return "LinearTrend";
}

double DemandForecast::mean_admissions() const {
  if (point_forecast.empty()) return 0.0;
  double s = 0.0;
  for (double v : point_forecast) s += v;
  return s / static_cast<double>(point_forecast.size());
}

DemandForecast forecast_district(const District& d, int horizon, std::span<const ArimaSpec> grid) {
  const auto series = demand_series(d);
  if (horizon <= series.years.back()) {
    throw ValidationError("horizon " + std::to_string(horizon) + " must be after the last observed year " +
                          std::to_string(series.years.back()));
  }
  DemandForecast f;
  f.district_id = d.id;
  for (int y = series.years.back() + 1; y <= horizon; ++y) f.horizon_years.push_back(y);
  const int steps = static_cast<int>(f.horizon_years.size());

  std::optional<ArimaFit> best;
  for (const auto& spec : grid) {
    try {
      auto fit = fit_arima(series.per_capita, spec);
      if (!best || fit.aicc < best->aicc) best = std::move(fit);
    } catch (const FitError&) {
      // spec skipped; fallback below covers the all-fail case
    }
  }
  if (best) {
    f.method = ForecastMethod::Arima;
    f.arima = best->spec;
    f.aicc = best->aicc;
    f.per_capita_forecast = arima_forecast(*best, steps);
  } else {
    if (series.years.size() < 3) {
      throw ValidationError("district " + d.id + ": per-capita series too short for a linear trend (< 3 points)");
    }
    std::vector<double> xs(series.years.begin(), series.years.end());
    const auto trend = fit_linear_trend(xs, series.per_capita);
    f.method = ForecastMethod::LinearTrend;
    f.aicc = std::numeric_limits<double>::quiet_NaN();
    for (int y : f.horizon_years) f.per_capita_forecast.push_back(trend.at(y));
  }

  std::vector<double> py, pv;
  for (const auto& yv : d.population_history) {
    py.push_back(yv.year);
    pv.push_back(yv.value);
  }
  std::optional<LinearTrend> pop_trend;
  if (py.size() >= 2) pop_trend = fit_linear_trend(py, pv);
  for (std::size_t h = 0; h < f.horizon_years.size(); ++h) {
    const double pop = pop_trend ? std::max(0.0, pop_trend->at(f.horizon_years[h])) : pv.back();
    f.population_forecast.push_back(pop);
    double adm = f.per_capita_forecast[h] * pop;
    if (adm < 0.0) {
      adm = 0.0;
      f.clamped = true;
    }
    f.point_forecast.push_back(adm);
  }
  return f;
}

ForecastTable forecast_demand(const DataBundle& bundle, int horizon, std::span<const ArimaSpec> grid) {
  for (const auto& s : grid) s.validate();
  const auto n = static_cast<std::ptrdiff_t>(bundle.districts.size());
  std::vector<DemandForecast> results(bundle.districts.size());
  std::vector<std::exception_ptr> errors(bundle.districts.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      results[static_cast<std::size_t>(i)] = forecast_district(bundle.districts[static_cast<std::size_t>(i)], horizon, grid);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  ForecastTable table;
  for (auto& r : results) table.emplace(r.district_id, std::move(r));
  return table;
}

std::string forecasts_csv(const ForecastTable& table) {
  std::ostringstream out;
  out << "district_id,year,admissions,method\n";
  for (const auto& [id, f] : table) {
    for (std::size_t h = 0; h < f.horizon_years.size(); ++h) {
      out << csv::escape(id) << ',' << f.horizon_years[h] << ',' << csv::format_double(f.point_forecast[h]) << ','
          << csv::escape(f.method_label()) << '\n';
    }
  }
  return out.str();
}

}  // namespace equiplan
