#pragma once

#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "equiplan/report_io.hpp"

namespace httplib {
class Server;
}

namespace equiplan {

enum class ScenarioStatus { Queued, Running, Done, Failed };

const char* to_string(ScenarioStatus s);
ScenarioStatus parse_status(const std::string& s);

struct ScenarioResult {
  Json plan;
  Json metrics;
  Json tuning;  // null unless the run tuned weights
};

struct ScenarioRecord {
  std::string id;
  std::string kind = "scenario";  // or "tune"
  ScenarioRequest request;
  std::vector<std::string> tune_params;  // kind == "tune"
  int tune_budget = 0;
  ScenarioStatus status = ScenarioStatus::Queued;
  std::string message;  // failure reason
  std::optional<ScenarioResult> result;
  std::string created_at;
  std::string finished_at;
};

Json to_json(const ScenarioRecord& r);
ScenarioRecord record_from_json(const Json& j);

/// One JSON document per scenario under `dir`. Readers share the lock;
/// every mutation takes it exclusively and rewrites the document.
class ScenarioStore {
 public:
  explicit ScenarioStore(std::string dir);

  /// Loads every persisted document. Records left Queued or Running by a
  /// previous process are returned so they can be resubmitted.
  std::vector<std::string> load();

  /// Assigns a fresh id, persists and returns the record.
  ScenarioRecord create(ScenarioRecord r);
  void put(const ScenarioRecord& r);
  std::optional<ScenarioRecord> get(const std::string& id) const;
  std::vector<ScenarioRecord> list() const;

 private:
  std::string path_for(const std::string& id) const;
  void persist(const ScenarioRecord& r) const;

  std::string dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, ScenarioRecord> records_;
  std::uint64_t counter_ = 0;
};

struct ServiceConfig {
  std::string data_dir = "data";
  std::string run_dir = "runs";
  std::string host = "127.0.0.1";
  int port = 8080;
  int workers = 2;
  PipelineConfig pipeline;

  /// Overrides from EQUIPLAN_DATA_DIR, EQUIPLAN_RUN_DIR and EQUIPLAN_PORT.
  void apply_env();
};

/// HTTP front end over one immutable bundle with a bounded worker pool.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds (port 0 picks a free port) and starts workers; returns the port.
  int bind();
  /// Serves until stop(). Call after bind().
  void listen();
  void stop();

  const DataBundle& bundle() const { return bundle_; }
  ScenarioStore& store() { return store_; }

  /// Queues a record for execution.
  void submit(const std::string& id);
  /// Runs a record synchronously (used by workers).
  void execute(const std::string& id);

 private:
  void routes();
  void worker_loop();

  ServiceConfig config_;
  DataBundle bundle_;
  std::unique_ptr<PipelineContext> base_ctx_;
  ScenarioStore store_;
  std::unique_ptr<httplib::Server> server_;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<std::string> queue_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

/// Executes one scenario request and packages the result documents.
ScenarioResult run_scenario(const DataBundle& bundle, const PipelineConfig& base, const ScenarioRecord& record);

std::string utc_now();

}  // namespace equiplan
