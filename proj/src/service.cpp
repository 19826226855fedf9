#include "equiplan/service.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "equiplan/csv.hpp"
#include "equiplan/error.hpp"
#include "httplib.h"

namespace equiplan {

namespace fs = std::filesystem;

const char* to_string(ScenarioStatus s) {
  switch (s) {
    case ScenarioStatus::Queued: return "Queued";
    case ScenarioStatus::Running: return "Running";
    case ScenarioStatus::Done: return "Done";
    case ScenarioStatus::Failed: return "Failed";
  }
  return "unknown";
}

ScenarioStatus parse_status(const std::string& s) {
  for (auto st : {ScenarioStatus::Queued, ScenarioStatus::Running, ScenarioStatus::Done, ScenarioStatus::Failed}) {
    if (s == to_string(st)) return st;
  }
  throw ValidationError("unknown scenario status '" + s + "'");
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
  return ss.str();
}

Json to_json(const ScenarioRecord& r) {
  Json j;
  j["id"] = r.id;
  j["kind"] = r.kind;
  j["request"] = to_json(r.request);
  if (r.kind == "tune") {
    j["tune"] = {{"params", r.tune_params}, {"budget", r.tune_budget}};
  }
  j["status"] = to_string(r.status);
  if (r.status == ScenarioStatus::Failed) j["message"] = r.message;
  if (r.result) {
    j["result"] = {{"plan", r.result->plan}, {"metrics", r.result->metrics}, {"tuning", r.result->tuning}};
  }
  j["created_at"] = r.created_at;
  j["finished_at"] = r.finished_at.empty() ? Json(nullptr) : Json(r.finished_at);
  return j;
}

ScenarioRecord record_from_json(const Json& j) {
  ScenarioRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.kind = j.value("kind", "scenario");
    r.request = parse_request(j.at("request"), 2030);
    if (j.contains("tune")) {
      r.tune_params = j["tune"].at("params").get<std::vector<std::string>>();
      r.tune_budget = j["tune"].at("budget").get<int>();
    }
    r.status = parse_status(j.at("status").get<std::string>());
    r.message = j.value("message", "");
    if (j.contains("result") && j["result"].is_object()) {
      const auto& res = j["result"];
      r.result = ScenarioResult{res.at("plan"), res.at("metrics"), res.value("tuning", Json(nullptr))};
    }
    r.created_at = j.value("created_at", "");
    if (j.contains("finished_at") && j["finished_at"].is_string()) r.finished_at = j["finished_at"].get<std::string>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed scenario document: ") + e.what());
  }
  return r;
}

ScenarioStore::ScenarioStore(std::string dir) : dir_(std::move(dir)) {}

std::string ScenarioStore::path_for(const std::string& id) const { return (fs::path(dir_) / (id + ".json")).string(); }

void ScenarioStore::persist(const ScenarioRecord& r) const {
  fs::create_directories(dir_);
  // write-then-rename so a crash never leaves a truncated document
  const auto final_path = path_for(r.id);
  const auto tmp = final_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << to_json(r).dump(2) << '\n';
  }
  fs::rename(tmp, final_path);
}

std::vector<std::string> ScenarioStore::load() {
  std::unique_lock lock(mu_);
  std::vector<std::string> pending;
  if (!fs::exists(dir_)) return pending;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    std::ifstream in(p);
    try {
      auto rec = record_from_json(Json::parse(in));
      if (rec.status == ScenarioStatus::Running) rec.status = ScenarioStatus::Queued;
      if (rec.status == ScenarioStatus::Queued) pending.push_back(rec.id);
      records_[rec.id] = std::move(rec);
    } catch (const std::exception& e) {
      std::cerr << "skipping unreadable scenario " << p.string() << ": " << e.what() << '\n';
    }
  }
  return pending;
}

ScenarioRecord ScenarioStore::create(ScenarioRecord r) {
  std::unique_lock lock(mu_);
  static thread_local std::mt19937_64 gen{std::random_device{}()};
  do {
    std::ostringstream id;
    id << 's' << std::hex << std::setw(6) << std::setfill('0') << (++counter_ & 0xffffff) << '-' << std::setw(8)
       << (gen() & 0xffffffffULL);
    r.id = id.str();
  } while (records_.count(r.id) || fs::exists(path_for(r.id)));
  r.status = ScenarioStatus::Queued;
  r.created_at = utc_now();
  persist(r);
  records_[r.id] = r;
  return r;
}

void ScenarioStore::put(const ScenarioRecord& r) {
  std::unique_lock lock(mu_);
  persist(r);
  records_[r.id] = r;
}

std::optional<ScenarioRecord> ScenarioStore::get(const std::string& id) const {
  std::shared_lock lock(mu_);
  const auto it = records_.find(id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<ScenarioRecord> ScenarioStore::list() const {
  std::shared_lock lock(mu_);
  std::vector<ScenarioRecord> out;
  for (const auto& [id, r] : records_) out.push_back(r);
  std::sort(out.begin(), out.end(), [](const ScenarioRecord& a, const ScenarioRecord& b) {
    return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
  });
  return out;
}

void ServiceConfig::apply_env() {
  if (const char* v = std::getenv("EQUIPLAN_DATA_DIR")) data_dir = v;
  if (const char* v = std::getenv("EQUIPLAN_RUN_DIR")) run_dir = v;
  if (const char* v = std::getenv("EQUIPLAN_PORT")) {
    long long p = 0;
    if (!csv::parse_int(v, p) || p < 0 || p > 65535) throw ConfigError(std::string("EQUIPLAN_PORT is not a port: ") + v);
    port = static_cast<int>(p);
  }
}

ScenarioResult run_scenario(const DataBundle& bundle, const PipelineConfig& base, const ScenarioRecord& record) {
  PipelineConfig cfg = base;
  if (record.kind == "tune") {
    cfg.tune_params = record.tune_params;
    cfg.tune_budget = record.tune_budget;
  }
  const auto run = run_request(bundle, cfg, record.request);
  ScenarioResult res;
  res.plan = to_json(run.plan);
  res.metrics = to_json(run.metrics);
  res.tuning = run.tuning ? to_json(*run.tuning) : Json(nullptr);
  return res;
}

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, const Json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(2) + "\n", kJson);
}

void send_error(httplib::Response& res, int status, const std::string& message,
                const std::vector<FieldError>& fields = {}) {
  Json j = {{"error", message}};
  if (!fields.empty()) {
    j["fields"] = Json::array();
    for (const auto& f : fields) j["fields"].push_back({{"field", f.field}, {"message", f.message}});
  }
  send_json(res, j, status);
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const Json::exception& e) {
    throw RequestError(std::vector<FieldError>{{"body", std::string("invalid JSON: ") + e.what()}});
  }
}

}  // namespace

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      store_((fs::path(config_.run_dir) / "scenarios").string()),
      server_(std::make_unique<httplib::Server>()) {
  if (config_.workers < 1) throw ConfigError("service needs at least one worker");
  bundle_ = load_bundle(BundlePaths::in_directory(config_.data_dir));
  base_ctx_ = std::make_unique<PipelineContext>(prepare_context(bundle_, config_.pipeline));
  base_ctx_->bundle = &bundle_;
  routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  const int port = config_.port == 0 ? server_->bind_to_any_port(config_.host)
                                     : (server_->bind_to_port(config_.host, config_.port) ? config_.port : -1);
  if (port < 0) throw std::runtime_error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  for (const auto& id : store_.load()) submit(id);
  for (int i = 0; i < config_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
  return port;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::stop() {
  {
    std::lock_guard lock(queue_mu_);
    if (stopping_) return;
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (server_) server_->stop();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
}

void Service::submit(const std::string& id) {
  {
    std::lock_guard lock(queue_mu_);
    queue_.push_back(id);
  }
  queue_cv_.notify_one();
}

void Service::worker_loop() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(queue_mu_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
    }
    execute(id);
  }
}

void Service::execute(const std::string& id) {
  auto rec = store_.get(id);
  if (!rec) return;
  rec->status = ScenarioStatus::Running;
  store_.put(*rec);
  try {
    rec->result = run_scenario(bundle_, config_.pipeline, *rec);
    rec->status = ScenarioStatus::Done;
  } catch (const std::exception& e) {
    rec->result.reset();
    rec->status = ScenarioStatus::Failed;
    rec->message = e.what();
  }
  rec->finished_at = utc_now();
  store_.put(*rec);
}

void Service::routes() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const RequestError& e) {
      send_error(res, 400, e.what(), e.fields());
    } catch (const ValidationError& e) {
      send_error(res, 400, e.what());
    } catch (const StageError& e) {
      send_error(res, e.is_validation() ? 400 : 500, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });
  s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  s.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, {{"status", "ok"}}); });

  s.Get("/districts.geojson", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(districts_geojson(bundle_, base_ctx_.get()).dump() + "\n", "application/geo+json");
  });

  s.Get("/hospitals", [this](const httplib::Request&, httplib::Response& res) {
    Json arr = Json::array();
    for (const auto& h : bundle_.hospitals) arr.push_back(to_json(h));
    send_json(res, arr);
  });

  s.Get("/indices", [this](const httplib::Request&, httplib::Response& res) {
    const auto& ctx = *base_ctx_;
    Json arr = Json::array();
    for (std::size_t i = 0; i < bundle_.districts.size(); ++i) {
      const auto& h = ctx.hfdr[i];
      arr.push_back({{"district_id", bundle_.districts[i].id},
                     {"access", ctx.access[i].score},
                     {"vulnerability", ctx.equity[i].vulnerability},
                     {"unmet_norm", ctx.equity[i].unmet_norm},
                     {"equity_index", ctx.equity[i].equity_index},
                     {"hfdr", h.zero_demand ? Json(nullptr) : Json(h.hfdr)}});
    }
    send_json(res, arr);
  });

  s.Get("/forecasts", [this](const httplib::Request& req, httplib::Response& res) {
    int horizon = config_.pipeline.horizon;
    if (req.has_param("horizon")) {
      long long h = 0;
      if (!csv::parse_int(req.get_param_value("horizon"), h) || h < 1900 || h > 2200) {
        return send_error(res, 400, "invalid request", {{"horizon", "must be a calendar year"}});
      }
      horizon = static_cast<int>(h);
    }
    const auto table = forecast_demand(bundle_, horizon, config_.pipeline.arima_grid);
    Json arr = Json::array();
    for (const auto& d : bundle_.districts) {
      const auto& f = table.at(d.id);
      arr.push_back({{"district_id", d.id},
                     {"method", f.method_label()},
                     {"years", f.horizon_years},
                     {"admissions", f.point_forecast},
                     {"mean_admissions", f.mean_admissions()}});
    }
    send_json(res, arr);
  });

  s.Post("/scenarios", [this](const httplib::Request& req, httplib::Response& res) {
    ScenarioRecord rec;
    rec.request = parse_request(parse_body(req), config_.pipeline.horizon);
    rec = store_.create(std::move(rec));
    submit(rec.id);
    send_json(res, {{"id", rec.id}, {"status", to_string(rec.status)}}, 202);
  });

  s.Post("/tune", [this](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    std::vector<FieldError> errors;
    ScenarioRecord rec;
    rec.kind = "tune";
    rec.tune_params = config_.pipeline.tune_params;
    rec.tune_budget = config_.pipeline.tune_budget;
    if (body.contains("params")) {
      if (!body["params"].is_array() || body["params"].empty()) {
        errors.push_back({"params", "must be a non-empty array of parameter names"});
      } else {
        rec.tune_params.clear();
        for (const auto& p : body["params"]) {
          try {
            rec.tune_params.push_back(to_string(parse_tunable(p.is_string() ? p.get<std::string>() : "")));
          } catch (const ValidationError& e) {
            errors.push_back({"params", e.what()});
          }
        }
      }
    }
    if (body.contains("budget")) {
      if (!body["budget"].is_number_integer() || body["budget"].get<long long>() < 1) {
        errors.push_back({"budget", "must be a positive integer"});
      } else {
        rec.tune_budget = body["budget"].get<int>();
      }
    }
    Json scenario = body;
    scenario.erase("params");
    scenario.erase("budget");
    if (!scenario.contains("model")) scenario["model"] = "main";
    if (!scenario.contains("K")) scenario["K"] = 3;
    try {
      rec.request = parse_request(scenario, config_.pipeline.horizon);
      if (rec.request.model != ModelKind::Main) errors.push_back({"model", "tuning applies to the main model only"});
      if (rec.request.weights) errors.push_back({"weights", "fixed weights cannot be tuned"});
    } catch (const RequestError& e) {
      errors.insert(errors.end(), e.fields().begin(), e.fields().end());
    }
    if (!errors.empty()) throw RequestError(std::move(errors));
    rec = store_.create(std::move(rec));
    submit(rec.id);
    send_json(res, {{"id", rec.id}, {"status", to_string(rec.status)}}, 202);
  });

  s.Get("/scenarios", [this](const httplib::Request&, httplib::Response& res) {
    Json arr = Json::array();
    for (const auto& r : store_.list()) {
      Json j = to_json(r);
      j.erase("result");
      arr.push_back(std::move(j));
    }
    send_json(res, arr);
  });

  auto with_record = [this](auto handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      const auto rec = store_.get(req.matches[1]);
      if (!rec) return send_error(res, 404, "unknown scenario id '" + std::string(req.matches[1]) + "'");
      handler(*rec, res);
    };
  };
  auto with_result = [with_record](auto handler) {
    return with_record([handler](const ScenarioRecord& rec, httplib::Response& res) {
      if (!rec.result) {
        return send_error(res, 409, "scenario " + rec.id + " is " + to_string(rec.status) + ", no result yet");
      }
      handler(rec, res);
    });
  };

  s.Get(R"(/scenarios/([A-Za-z0-9_-]+))",
        with_record([](const ScenarioRecord& rec, httplib::Response& res) { send_json(res, to_json(rec)); }));

  s.Get(R"(/scenarios/([A-Za-z0-9_-]+)/plan\.json)",
        with_result([](const ScenarioRecord& rec, httplib::Response& res) {
          res.set_content(rec.result->plan.dump(2) + "\n", kJson);
        }));

  s.Get(R"(/scenarios/([A-Za-z0-9_-]+)/metrics\.csv)",
        with_result([](const ScenarioRecord& rec, httplib::Response& res) {
          const std::vector<MetricsReport> reports{metrics_from_json(rec.result->metrics)};
          res.set_content(metrics_csv(reports), "text/csv");
        }));

  s.Get(R"(/scenarios/([A-Za-z0-9_-]+)/plan\.geojson)",
        with_result([this](const ScenarioRecord& rec, httplib::Response& res) {
          Plan plan;
          for (const auto& h : rec.result->plan.at("opened_sites")) {
            Hospital site;
            site.id = h.at("id").get<std::string>();
            site.name = h.at("name").get<std::string>();
            site.location = {h.at("lat").get<double>(), h.at("lon").get<double>()};
            site.beds = h.at("beds").get<int>();
            site.status = SiteStatus::Proposed;
            plan.opened_sites.push_back(std::move(site));
          }
          res.set_content(plan_geojson(bundle_, plan).dump() + "\n", "application/geo+json");
        }));

  s.Get("/compare", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("ids")) return send_error(res, 400, "invalid request", {{"ids", "required"}});
    std::vector<MetricsReport> reports;
    std::vector<std::string> ids;
    std::stringstream ss(req.get_param_value("ids"));
    for (std::string id; std::getline(ss, id, ',');) {
      if (id.empty()) continue;
      const auto rec = store_.get(id);
      if (!rec) return send_error(res, 404, "unknown scenario id '" + id + "'");
      if (!rec->result) return send_error(res, 409, "scenario " + id + " has no result yet");
      auto m = metrics_from_json(rec->result->metrics);
      ids.push_back(id);
      reports.push_back(std::move(m));
    }
    if (reports.empty()) return send_error(res, 400, "invalid request", {{"ids", "must name at least one scenario"}});
    const auto rows = normalize_across_models(reports);
    Json out;
    out["columns"] = metric_columns(reports.front().coverage_bands);
    out["rows"] = Json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out["rows"].push_back({{"id", ids[i]}, {"model", rows[i].model}, {"raw", metric_values(reports[i])},
                             {"normalized", rows[i].values}});
    }
    send_json(res, out);
  });
}

}  // namespace equiplan
