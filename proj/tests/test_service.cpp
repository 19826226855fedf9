#include <chrono>
#include <set>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "equiplan/cli.hpp"
#include "equiplan/service.hpp"
#include "support.hpp"

using namespace equiplan;
using namespace std::chrono_literals;

namespace {

class Running {
 public:
  explicit Running(const std::string& run_dir, int workers = 2) {
    ServiceConfig cfg;
    cfg.data_dir = testing::fixture_dir();
    cfg.run_dir = run_dir;
    cfg.port = 0;
    cfg.workers = workers;
    service_ = std::make_unique<Service>(cfg);
    port_ = service_->bind();
    thread_ = std::thread([this] { service_->listen(); });
  }
  ~Running() {
    service_->stop();
    thread_.join();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(120, 0);
    return c;
  }
  Service& service() { return *service_; }

 private:
  std::unique_ptr<Service> service_;
  int port_ = 0;
  std::thread thread_;
};

Json wait_done(httplib::Client& c, const std::string& id) {
  for (int i = 0; i < 1200; ++i) {
    auto r = c.Get("/scenarios/" + id);
    REQUIRE(r);
    auto j = Json::parse(r->body);
    const auto status = j["status"].get<std::string>();
    if (status == "Done" || status == "Failed") return j;
    std::this_thread::sleep_for(50ms);
  }
  FAIL("scenario " << id << " did not finish");
  return {};
}

std::string post(httplib::Client& c, const Json& body) {
  auto r = c.Post("/scenarios", body.dump(), "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 202);
  return Json::parse(r->body)["id"].get<std::string>();
}

}  // namespace

TEST_CASE("read-only endpoints") {
  testing::TempDir dir("svc-ro");
  Running svc(dir.str());
  auto c = svc.client();
  auto h = c.Get("/health");
  REQUIRE(h);
  CHECK(h->status == 200);
  CHECK(Json::parse(h->body)["status"] == "ok");
  CHECK(h->get_header_value("Access-Control-Allow-Origin") == "*");

  auto d = c.Get("/districts.geojson");
  REQUIRE(d);
  const auto gj = Json::parse(d->body);
  CHECK(gj["type"] == "FeatureCollection");
  CHECK(gj["features"].size() == 6);

  auto hs = c.Get("/hospitals");
  REQUIRE(hs);
  CHECK(Json::parse(hs->body).size() == 20);

  auto ind = c.Get("/indices");
  REQUIRE(ind);
  CHECK(ind->status == 200);

  auto f = c.Get("/forecasts?horizon=2028");
  REQUIRE(f);
  CHECK(f->status == 200);
  CHECK(Json::parse(f->body).size() == 6);
  auto bad = c.Get("/forecasts?horizon=1990");
  REQUIRE(bad);
  CHECK(bad->status == 400);
}

TEST_CASE("request validation") {
  testing::TempDir dir("svc-bad");
  Running svc(dir.str());
  auto c = svc.client();
  auto r = c.Post("/scenarios", R"({"model":"status_quo","K":-1})", "application/json");
  REQUIRE(r);
  CHECK(r->status == 400);
  const auto j = Json::parse(r->body);
  REQUIRE(j.contains("fields"));
  CHECK(j["fields"][0]["field"] == "K");

  r = c.Post("/scenarios", "{not json", "application/json");
  REQUIRE(r);
  CHECK(r->status == 400);

  r = c.Post("/scenarios", R"({"model":"nope"})", "application/json");
  REQUIRE(r);
  CHECK(r->status == 400);

  r = c.Post("/tune", R"({"params":["gamma"]})", "application/json");
  REQUIRE(r);
  CHECK(r->status == 400);

  auto g = c.Get("/scenarios/s0-unknown");
  REQUIRE(g);
  CHECK(g->status == 404);
  g = c.Get("/compare?ids=s0-unknown");
  REQUIRE(g);
  CHECK(g->status == 404);
}

TEST_CASE("scenario metrics match the command line byte for byte") {
  testing::TempDir dir("svc-eq");
  Running svc(dir.str());
  auto c = svc.client();
  for (const char* model : {"status_quo", "main", "ablation_travel"}) {
    const auto id = post(c, {{"model", model}, {"K", 3}});
    const auto rec = wait_done(c, id);
    REQUIRE(rec["status"] == "Done");
    auto m = c.Get("/scenarios/" + id + "/metrics.csv");
    REQUIRE(m);
    CHECK(m->status == 200);

    std::ostringstream out, err;
    REQUIRE(run_cli({"evaluate", "--data", testing::fixture_dir(), "--out", dir / model, "--model", model, "--k", "3"},
                    out, err) == 0);
    CHECK(m->body == read_text((dir / model) + "/metrics.csv"));

    auto p = c.Get("/scenarios/" + id + "/plan.geojson");
    REQUIRE(p);
    int proposed = 0;
    const auto gj = Json::parse(p->body);
    for (const auto& f : gj["features"]) proposed += f["properties"]["role"] == "proposed";
    CHECK(proposed == (std::string(model) == "status_quo" ? 0 : 3));
  }
  auto list = c.Get("/scenarios");
  REQUIRE(list);
  CHECK(Json::parse(list->body).size() == 3);
}

TEST_CASE("tune jobs and comparison") {
  testing::TempDir dir("svc-tune");
  Running svc(dir.str());
  auto c = svc.client();
  auto r = c.Post("/tune", R"({"K":2,"budget":12})", "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 202);
  const auto tid = Json::parse(r->body)["id"].get<std::string>();
  const auto sq = post(c, {{"model", "status_quo"}, {"K", 2}});
  const auto rec = wait_done(c, tid);
  REQUIRE(rec["status"] == "Done");
  CHECK(rec["kind"] == "tune");
  CHECK(rec["result"]["tuning"].is_object());
  wait_done(c, sq);
  auto cmp = c.Get("/compare?ids=" + tid + "," + sq);
  REQUIRE(cmp);
  CHECK(cmp->status == 200);
  const auto j = Json::parse(cmp->body);
  CHECK(j["rows"].size() == 2);
}

TEST_CASE("concurrent submissions get distinct ids") {
  testing::TempDir dir("svc-conc");
  Running svc(dir.str(), 2);
  std::vector<std::thread> threads;
  std::mutex mu;
  std::set<std::string> ids;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      auto c = svc.client();
      auto r = c.Post("/scenarios", R"({"model":"status_quo","K":0})", "application/json");
      if (r && r->status == 202) {
        std::lock_guard lock(mu);
        ids.insert(Json::parse(r->body)["id"].get<std::string>());
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ids.size() == 8);
  auto c = svc.client();
  for (const auto& id : ids) CHECK(wait_done(c, id)["status"] == "Done");
}

TEST_CASE("scenarios survive a restart") {
  testing::TempDir dir("svc-restart");
  std::string done_id;
  {
    Running svc(dir.str());
    auto c = svc.client();
    done_id = post(c, {{"model", "status_quo"}, {"K", 0}});
    wait_done(c, done_id);
  }
  // a record left queued by a crashed process is picked up again
  {
    ScenarioStore store(dir / "scenarios");
    store.load();
    ScenarioRecord pending;
    pending.request.model = ModelKind::StatusQuo;
    pending.status = ScenarioStatus::Running;
    pending = store.create(pending);
    pending.status = ScenarioStatus::Running;
    store.put(pending);
    Running svc(dir.str());
    auto c = svc.client();
    auto r = c.Get("/scenarios/" + done_id + "/metrics.csv");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(wait_done(c, pending.id)["status"] == "Done");
  }
}

TEST_CASE("records without a result answer 409") {
  testing::TempDir dir("svc-409");
  std::string id;
  {
    ScenarioStore store(dir / "scenarios");
    store.load();
    ScenarioRecord rec;
    rec.status = ScenarioStatus::Failed;
    rec.message = "stage plan: boom";
    id = store.create(rec).id;
    auto stored = *store.get(id);
    stored.status = ScenarioStatus::Failed;
    store.put(stored);
  }
  Running svc(dir.str());
  auto c = svc.client();
  auto r = c.Get("/scenarios/" + id + "/metrics.csv");
  REQUIRE(r);
  CHECK(r->status == 409);
  r = c.Get("/scenarios/" + id);
  REQUIRE(r);
  CHECK(Json::parse(r->body)["status"] == "Failed");
}

TEST_CASE("execute runs a record synchronously") {
  testing::TempDir dir("svc-exec");
  ServiceConfig cfg;
  cfg.data_dir = testing::fixture_dir();
  cfg.run_dir = dir.str();
  Service svc(cfg);
  ScenarioRecord rec;
  rec = svc.store().create(rec);
  CHECK(svc.store().get(rec.id)->status == ScenarioStatus::Queued);
  svc.execute(rec.id);
  const auto after = svc.store().get(rec.id);
  CHECK(after->status == ScenarioStatus::Done);
  CHECK(after->result.has_value());
}
