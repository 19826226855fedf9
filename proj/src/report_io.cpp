#include "equiplan/report_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "equiplan/csv.hpp"
#include "equiplan/error.hpp"

namespace equiplan {

namespace fs = std::filesystem;

namespace {

// JSON has no infinity; ratios without demand are written as null.
Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json point(LatLon p) { return {{"type", "Point"}, {"coordinates", {p.lon, p.lat}}}; }

}  // namespace

Json to_json(const Hospital& h) {
  return {{"id", h.id}, {"name", h.name}, {"lat", h.location.lat}, {"lon", h.location.lon},
          {"beds", h.beds}, {"status", to_string(h.status)}};
}

Json to_json(const Plan& plan) {
  Json j;
  j["method"] = to_string(plan.method);
  j["opened"] = plan.opened;
  j["opened_sites"] = Json::array();
  for (const auto& h : plan.opened_sites) j["opened_sites"].push_back(to_json(h));
  j["assignment"] = Json::array();
  for (const auto& a : plan.assignment) {
    j["assignment"].push_back({{"district_id", a.district_id}, {"site_id", a.site_id}, {"minutes", a.minutes},
                               {"within_threshold", a.within_threshold}});
  }
  j["objective"] = plan.objective;
  j["feasible"] = plan.feasible;
  const auto& d = plan.diagnostics;
  j["diagnostics"] = {{"unassigned", d.unassigned},
                      {"max_assigned_minutes", d.max_assigned_minutes},
                      {"t_max_slack", d.t_max_slack},
                      {"min_separation_km", number_or_null(d.min_separation_km)},
                      {"separation_slack_km", number_or_null(d.separation_slack_km)},
                      {"penalty_minutes", d.penalty_minutes},
                      {"subsets_evaluated", d.subsets_evaluated},
                      {"swaps", d.swaps},
                      {"greedy_order", d.greedy_order}};
  return j;
}

Json to_json(const MetricsReport& r) {
  Json j;
  j["model"] = r.model;
  j["k"] = r.k;
  j["equity_score"] = r.equity_score;
  j["mean_tt"] = r.mean_tt;
  j["median_tt"] = r.median_tt;
  j["p95_tt"] = r.p95_tt;
  j["hfdr_aggregate"] = r.hfdr_aggregate;
  j["over_served_count"] = r.over_served_count;
  j["gini"] = r.gini;
  j["accessibility_score"] = r.accessibility_score;
  j["coverage_bands"] = r.coverage_bands;
  j["coverage"] = r.coverage;
  return j;
}

MetricsReport metrics_from_json(const Json& j) {
  MetricsReport r;
  try {
    r.model = j.at("model").get<std::string>();
    r.k = j.at("k").get<int>();
    r.equity_score = j.at("equity_score").get<double>();
    r.mean_tt = j.at("mean_tt").get<double>();
    r.median_tt = j.at("median_tt").get<double>();
    r.p95_tt = j.at("p95_tt").get<double>();
    r.hfdr_aggregate = j.at("hfdr_aggregate").get<double>();
    r.over_served_count = j.at("over_served_count").get<int>();
    r.gini = j.at("gini").get<double>();
    r.accessibility_score = j.at("accessibility_score").get<double>();
    r.coverage_bands = j.at("coverage_bands").get<std::vector<double>>();
    r.coverage = j.at("coverage").get<std::vector<double>>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed metrics document: ") + e.what());
  }
  return r;
}

Json to_json(const PlannerWeights& w) {
  return {{"theta", w.theta}, {"alpha_dep", w.alpha.deprivation}, {"alpha_eld", w.alpha.elderly},
          {"ring_scale", w.ring_scale}};
}

Json to_json(const WeightTuning& t) {
  Json j;
  j["params"] = Json::array();
  for (auto p : t.params) j["params"].push_back(to_string(p));
  j["weights"] = to_json(t.best);
  j["best_loss"] = t.cma.best_loss;
  j["baseline"] = to_json(t.baseline);
  j["baseline_loss"] = t.baseline_loss;
  j["evaluations"] = t.cma.evaluations;
  j["stop"] = to_string(t.cma.stop);
  j["history"] = Json::array();
  for (const auto& g : t.cma.history) {
    j["history"].push_back({{"generation", g.generation}, {"evaluations", g.evaluations}, {"best_loss", g.best_loss},
                            {"mean_loss", g.mean_loss}, {"sigma", g.sigma}});
  }
  return j;
}

Json to_json(const ScenarioRequest& r) {
  Json j;
  j["model"] = to_string(r.model);
  j["K"] = r.k;
  j["horizon"] = r.horizon;
  if (r.weights) j["weights"] = to_json(*r.weights);
  Json c = Json::object();
  if (r.t_max) c["t_max"] = *r.t_max;
  if (r.min_separation_km) c["min_separation_km"] = *r.min_separation_km;
  if (r.beds_per_new_site) c["beds_per_new_site"] = *r.beds_per_new_site;
  if (!c.empty()) j["constraints"] = c;
  if (r.seed) j["seed"] = *r.seed;
  return j;
}

RequestError::RequestError(std::vector<FieldError> fields)
    : ValidationError([&] {
        std::string msg = "invalid request:";
        for (const auto& f : fields) msg += " " + f.field + ": " + f.message + ";";
        return msg;
      }()),
      fields_(std::move(fields)) {}

namespace {

struct FieldParser {
  const Json& obj;
  std::string prefix;
  std::vector<FieldError>& errors;

  template <class T>
  std::optional<T> get(const char* name, auto&& check) {
    const auto it = obj.find(name);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    const std::string field = prefix + name;
    if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) {
        errors.push_back({field, "must be a string"});
        return std::nullopt;
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) {
        errors.push_back({field, "must be an integer"});
        return std::nullopt;
      }
    } else {
      if (!it->is_number()) {
        errors.push_back({field, "must be a number"});
        return std::nullopt;
      }
    }
    T v = it->get<T>();
    if (const char* msg = check(v)) {
      errors.push_back({field, msg});
      return std::nullopt;
    }
    return v;
  }
};

constexpr auto any = [](const auto&) -> const char* { return nullptr; };

}  // namespace

PlannerWeights parse_weights(const Json& j, const PlannerWeights& base) {
  const Json& w = j.contains("weights") && j["weights"].is_object() ? j["weights"] : j;
  if (!w.is_object()) throw RequestError(std::vector<FieldError>{{"weights", "must be an object"}});
  std::vector<FieldError> errors;
  FieldParser p{w, "weights.", errors};
  auto nonneg = [](double v) -> const char* { return v >= 0.0 && std::isfinite(v) ? nullptr : "must be >= 0"; };
  auto positive = [](double v) -> const char* { return v > 0.0 && std::isfinite(v) ? nullptr : "must be > 0"; };
  PlannerWeights out = base;
  if (auto v = p.get<double>("theta", nonneg)) out.theta = *v;
  auto dep = p.get<double>("alpha_dep", nonneg);
  auto eld = p.get<double>("alpha_eld", nonneg);
  if (auto v = p.get<double>("ring_scale", positive)) out.ring_scale = *v;
  if (dep || eld) {
    const double d = dep ? *dep : 1.0 - eld.value_or(0.0);
    const double e = eld ? *eld : 1.0 - d;
    if (std::abs(d + e - 1.0) > 1e-9 || d < 0.0 || e < 0.0) {
      errors.push_back({"weights.alpha_dep", "alpha_dep and alpha_eld must be nonnegative and sum to 1"});
    } else {
      out.alpha = {d, e};
    }
  }
  if (!errors.empty()) throw RequestError(std::move(errors));
  return out;
}

ScenarioRequest parse_request(const Json& body, int default_horizon) {
  if (!body.is_object()) throw RequestError(std::vector<FieldError>{{"body", "must be a JSON object"}});
  std::vector<FieldError> errors;
  FieldParser p{body, "", errors};
  ScenarioRequest r;
  r.model = ModelKind::Main;
  r.horizon = default_horizon;
  if (auto m = p.get<std::string>("model", any)) {
    try {
      r.model = parse_model(*m);
    } catch (const ValidationError& e) {
      errors.push_back({"model", e.what()});
    }
  }
  if (auto k = p.get<int>("K", [](int v) -> const char* { return v >= 0 ? nullptr : "must be >= 0"; })) r.k = *k;
  if (auto h = p.get<int>("horizon", [](int v) -> const char* {
        return v >= 1900 && v <= 2200 ? nullptr : "must be a calendar year";
      })) {
    r.horizon = *h;
  }
  if (auto s = p.get<std::uint64_t>("seed", any)) r.seed = *s;
  if (body.contains("weights") && !body["weights"].is_null()) {
    try {
      r.weights = parse_weights(body["weights"]);
    } catch (const RequestError& e) {
      errors.insert(errors.end(), e.fields().begin(), e.fields().end());
    }
  }
  if (body.contains("constraints") && !body["constraints"].is_null()) {
    const Json& c = body["constraints"];
    if (!c.is_object()) {
      errors.push_back({"constraints", "must be an object"});
    } else {
      FieldParser cp{c, "constraints.", errors};
      r.t_max = cp.get<double>("t_max", [](double v) -> const char* { return v > 0.0 ? nullptr : "must be > 0"; });
      r.min_separation_km =
          cp.get<double>("min_separation_km", [](double v) -> const char* { return v >= 0.0 ? nullptr : "must be >= 0"; });
      r.beds_per_new_site =
          cp.get<int>("beds_per_new_site", [](int v) -> const char* { return v >= 0 ? nullptr : "must be >= 0"; });
    }
  }
  if (!errors.empty()) throw RequestError(std::move(errors));
  return r;
}

Json districts_geojson(const DataBundle& bundle, const PipelineContext* ctx) {
  Json fc = {{"type", "FeatureCollection"}, {"features", Json::array()}};
  for (std::size_t i = 0; i < bundle.districts.size(); ++i) {
    const auto& d = bundle.districts[i];
    Json props = {{"id", d.id},
                  {"name", d.name},
                  {"population", d.latest_population()},
                  {"elderly_share", d.elderly_share},
                  {"deprivation", d.deprivation}};
    if (ctx) {
      props["access"] = ctx->access[i].score;
      props["vulnerability"] = ctx->equity[i].vulnerability;
      props["unmet_norm"] = ctx->equity[i].unmet_norm;
      props["equity_index"] = ctx->equity[i].equity_index;
      props["hfdr"] = number_or_null(ctx->hfdr[i].hfdr);
    }
    Json geom;
    if (d.boundary.empty()) {
      geom = point(d.centroid);
    } else {
      Json ring = Json::array();
      for (auto p : d.boundary) ring.push_back({p.lon, p.lat});
      if (d.boundary.front() != d.boundary.back()) ring.push_back({d.boundary.front().lon, d.boundary.front().lat});
      geom = {{"type", "Polygon"}, {"coordinates", Json::array({ring})}};
    }
    fc["features"].push_back({{"type", "Feature"}, {"properties", props}, {"geometry", geom}});
  }
  return fc;
}

Json plan_geojson(const DataBundle& bundle, const Plan& plan) {
  Json fc = {{"type", "FeatureCollection"}, {"features", Json::array()}};
  auto add = [&](const Hospital& h, const char* role) {
    fc["features"].push_back({{"type", "Feature"},
                              {"properties", {{"id", h.id}, {"name", h.name}, {"beds", h.beds}, {"role", role}}},
                              {"geometry", point(h.location)}});
  };
  for (const auto& h : bundle.hospitals) add(h, "existing");
  for (const auto& h : plan.opened_sites) add(h, "proposed");
  return fc;
}

std::string indices_csv(const PipelineContext& ctx) {
  std::ostringstream out;
  out << "district_id,access,vulnerability,unmet_norm,equity_index,hfdr\n";
  const auto& ds = ctx.bundle->districts;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << csv::escape(ds[i].id) << ',' << csv::format_double(ctx.access[i].score) << ','
        << csv::format_double(ctx.equity[i].vulnerability) << ',' << csv::format_double(ctx.equity[i].unmet_norm)
        << ',' << csv::format_double(ctx.equity[i].equity_index) << ','
        << (ctx.hfdr[i].zero_demand ? std::string("inf") : csv::format_double(ctx.hfdr[i].hfdr)) << '\n';
  }
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
  if (!out) throw ValidationError("cannot write " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace equiplan
