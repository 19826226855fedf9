// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "equiplan/cli.hpp"
#include "equiplan/cmaes.hpp"
#include "equiplan/error.hpp"
#include "equiplan/evaluation.hpp"
#include "equiplan/forecast.hpp"
#include "equiplan/service.hpp"
#include "support.hpp"

using namespace equiplan;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Criterion 1's instances: random cases with at least one separation-feasible K-subset.
struct Instances {
  std::vector<testing::PlanningCase> cases;
  std::vector<testing::OracleResult> oracle;
  int rejected = 0;
};

const Instances& instances() {
  static const Instances all = [] {
    Instances out;
    Rng rng(20240601);
    while (out.cases.size() < 50) {
      auto pc = testing::random_case(rng, 12, 3);
      auto o = testing::brute_force(pc);
      if (!o.feasible) {
        ++out.rejected;
        continue;
      }
      out.cases.push_back(std::move(pc));
      out.oracle.push_back(std::move(o));
    }
    return out;
  }();
  return all;
}

Outcome solver_optimality() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto& in = instances();
  int within = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < in.cases.size(); ++i) {
    const auto& pc = in.cases[i];
    const auto exact = solve_exact(pc.inst, pc.problem);
    o.require(exact.objective == in.oracle[i].objective, "instance " + std::to_string(i) + ": exact != brute force");
    const auto heur = solve_heuristic(pc.inst, pc.problem);
    const double gap = exact.objective > 0 ? (heur.objective - exact.objective) / exact.objective : 0.0;
    worst = std::max(worst, gap);
    if (gap <= 0.05) ++within;
  }
  const double secs = seconds_since(t0);
  o.require(within >= 45, "heuristic within 5% on only " + std::to_string(within) + " of 50");
  o.require(secs < 60.0, "took " + std::to_string(secs) + " s");
  std::ostringstream d;
  d << "50/50 exact, heuristic within 5% on " << within << "/50 (worst gap " << worst * 100 << "%), " << secs
    << " s, " << in.rejected << " instances without a feasible K-subset redrawn";
  if (o.pass) o.detail = d.str();
  return o;
}

Outcome constraint_soundness() {
  Outcome o;
  const auto& in = instances();
  int plans = 0, penalized = 0;
  for (std::size_t i = 0; i < in.cases.size(); ++i) {
    const auto& pc = in.cases[i];
    for (const auto& plan : {solve_exact(pc.inst, pc.problem), solve_heuristic(pc.inst, pc.problem)}) {
      const auto check = check_plan(plan, pc.problem, pc.matrix, pc.bundle.hospitals);
      ++plans;
      penalized += plan.diagnostics.unassigned > 0;
      o.require(check.ok(), "instance " + std::to_string(i) + ": " +
                                (check.ok() ? std::string() : check.violations.front().message));
    }
  }
  if (o.pass) {
    o.detail = std::to_string(plans) + " plans, zero violations (" + std::to_string(penalized) +
               " with penalized unreachable districts)";
  }
  return o;
}

Outcome fca_identity() {
  Outcome o;
  Rng rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int nd = 2 + static_cast<int>(rng.uniform() * 15), ns = 1 + static_cast<int>(rng.uniform() * 10);
    std::vector<District> ds;
    std::vector<Hospital> hs;
    std::vector<std::string> rows, cols;
    for (int i = 0; i < nd; ++i) {
      ds.push_back(testing::make_district("D" + std::to_string(i), testing::random_point(rng),
                                          std::round(rng.uniform(500, 3e5))));
      rows.push_back(ds.back().id);
    }
    double beds = 0;
    for (int j = 0; j < ns; ++j) {
      hs.push_back(testing::make_site("H" + std::to_string(j), testing::random_point(rng),
                                      1 + static_cast<int>(rng.uniform() * 900)));
      cols.push_back(hs.back().id);
      beds += hs.back().beds;
    }
    const double t0 = 30.0;
    std::vector<double> minutes;
    for (int k = 0; k < nd * ns; ++k) minutes.push_back(rng.uniform(0.0, t0));
    const TravelTimeMatrix m(rows, cols, minutes);
    const auto a = two_step_fca(ds, hs, m, t0);
    double lhs = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) lhs += a[i].score * ds[i].latest_population();
    const double rel = std::abs(lhs - beds) / beds;
    worst = std::max(worst, rel);
    o.require(rel <= 1e-9, "trial " + std::to_string(trial) + " relative error " + std::to_string(rel));
  }
  if (o.pass) {
    std::ostringstream d;
    d << "20 instances, worst relative error " << worst;
    o.detail = d.str();
  }
  return o;
}

Outcome gini() {
  Outcome o;
  const std::vector<double> eq{2.5, 2.5, 2.5, 2.5}, w4{1, 7, 3, 2};
  o.require(std::abs(gini_lorenz(eq, w4)) <= 1e-12, "equal values");
  for (double x : {0.01, 1.0, 123.0}) {
    o.require(std::abs(gini_lorenz(std::vector<double>{0.0, x}, std::vector<double>{5, 5}) - 0.5) <= 1e-12,
              "(0, x) case");
  }
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v, w;
    const int n = 2 + static_cast<int>(rng.uniform() * 10);
    for (int i = 0; i < n; ++i) {
      v.push_back(rng.uniform(0.0, 3.0));
      w.push_back(rng.uniform(1.0, 1e5));
    }
    const double g = gini_lorenz(v, w);
    for (int k : {2, 3, 5}) {
      std::vector<double> vr, wr;
      for (int r = 0; r < k; ++r) {
        vr.insert(vr.end(), v.begin(), v.end());
        wr.insert(wr.end(), w.begin(), w.end());
      }
      o.require(std::abs(gini_lorenz(vr, wr) - g) <= 1e-12, "replication k=" + std::to_string(k));
    }
  }
  if (o.pass) o.detail = "equal, (0,x) and replication k in {2,3,5} within 1e-12";
  return o;
}

Outcome forecast_recovery() {
  Outcome o;
  std::vector<double> phis;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::vector<double> x;
    double v = 0;
    for (int t = 0; t < 250; ++t) {
      v = 0.8 * v + rng.normal();
      if (t >= 50) x.push_back(v);
    }
    phis.push_back(fit_arima(x, {1, 0, 0}).ar[0]);
  }
  std::sort(phis.begin(), phis.end());
  const double med = 0.5 * (phis[9] + phis[10]);
  o.require(std::abs(med - 0.8) <= 0.1, "median phi " + std::to_string(med));

  Rng rng(77);
  std::vector<double> walk{5.0};
  for (int t = 0; t < 40; ++t) walk.push_back(walk.back() + rng.normal());
  const auto f = arima_forecast(fit_arima(walk, {0, 1, 0}), 10);
  for (double y : f) o.require(y == walk.back(), "random walk forecast differs from last value");
  if (o.pass) o.detail = "median phi-hat " + std::to_string(med) + " over 20 seeds; random walk exact";
  return o;
}

Outcome cma() {
  Outcome o;
  auto sphere = [](const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v * v;
    return s;
  };
  int solved = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CmaConfig c;
    c.initial_mean = std::vector<double>(5, 1.0);
    c.initial_sigma = 0.5;
    c.max_evaluations = 5000;
    c.target_loss = 1e-8;
    c.seed = seed;
    const auto r = cma_minimize(sphere, c);
    if (r.best_loss < 1e-8 && r.evaluations <= 5000) ++solved;
  }
  o.require(solved >= 18, "sphere solved for " + std::to_string(solved) + " of 20 seeds");

  auto rosen = [](const std::vector<double>& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  CmaConfig rc;
  rc.initial_mean = {-1.0, 1.5};
  rc.initial_sigma = 0.5;
  rc.max_evaluations = 20000;
  rc.tol_fun = 1e-18;
  rc.tol_x = 1e-14;
  const auto r = cma_minimize(rosen, rc);
  const double dist = std::hypot(r.best_params[0] - 1.0, r.best_params[1] - 1.0);
  o.require(dist <= 1e-3, "Rosenbrock ended " + std::to_string(dist) + " from (1,1)");

  CmaConfig dc = rc;
  dc.max_evaluations = 600;
  const auto a = cma_minimize(rosen, dc), b = cma_minimize(rosen, dc);
  o.require(a.best_params == b.best_params && a.best_loss == b.best_loss, "two runs differ");
  if (o.pass) {
    std::ostringstream d;
    d << "sphere " << solved << "/20, Rosenbrock distance " << dist << " after " << r.evaluations
      << " evaluations, fixed seed bit-exact";
    o.detail = d.str();
  }
  return o;
}

Outcome dominance() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto bundle = load_bundle(BundlePaths::in_directory(testing::fixture_dir()));
  PipelineConfig cfg;
  cfg.problem.k = 3;
  const auto ctx = prepare_context(bundle, cfg);
  std::map<ModelKind, MetricsReport> m;
  for (auto kind : kAllModels) m[kind] = run_model(kind, ctx, 3).metrics;
  const auto& main = m[ModelKind::Main];
  const auto& sq = m[ModelKind::StatusQuo];
  o.require(main.equity_score <= sq.equity_score, "main equity above status quo");
  o.require(main.mean_tt <= sq.mean_tt, "main mean_tt above status quo");
  const double travel = m[ModelKind::AblationTravelOnly].mean_tt;
  o.require(travel <= m[ModelKind::AblationDemandOnly].mean_tt && travel <= m[ModelKind::AblationDeprivationOnly].mean_tt,
            "travel-only ablation is not the fastest ablation");
  const double secs = seconds_since(t0);
  o.require(secs < 300.0, "took " + std::to_string(secs) + " s");
  if (o.pass) {
    std::ostringstream d;
    d << "equity main " << main.equity_score << " <= status quo " << sq.equity_score << ", mean_tt " << main.mean_tt
      << " <= " << sq.mean_tt << ", travel ablation " << travel << ", " << secs << " s";
    o.detail = d.str();
  }
  return o;
}

Outcome cli_service_equivalence() {
  Outcome o;
  testing::TempDir dir("acceptance");
  ServiceConfig sc;
  sc.data_dir = testing::fixture_dir();
  sc.run_dir = dir / "runs";
  sc.port = 0;
  Service svc(sc);
  const int port = svc.bind();
  std::thread server([&] { svc.listen(); });
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(300, 0);
  int compared = 0;
  for (auto kind : kAllModels) {
    const std::string model = to_string(kind);
    const Json body = {{"model", model}, {"K", 3}};
    auto r = client.Post("/scenarios", body.dump(), "application/json");
    if (!r || r->status != 202) {
      o.require(false, "POST failed for " + model);
      continue;
    }
    const auto id = Json::parse(r->body)["id"].get<std::string>();
    std::string status;
    for (int i = 0; i < 6000 && status != "Done" && status != "Failed"; ++i) {
      auto g = client.Get("/scenarios/" + id);
      status = g ? Json::parse(g->body)["status"].get<std::string>() : "Failed";
      if (status != "Done" && status != "Failed") std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    auto csv = client.Get("/scenarios/" + id + "/metrics.csv");
    std::ostringstream out, err;
    const int code = run_cli({"evaluate", "--data", testing::fixture_dir(), "--out", dir / model, "--model", model,
                              "--k", "3"},
                             out, err);
    o.require(code == 0, "CLI failed for " + model + ": " + err.str());
    o.require(csv && csv->status == 200, "service has no metrics for " + model);
    if (code == 0 && csv) {
      o.require(csv->body == read_text((dir / model) + "/metrics.csv"), "metrics differ for " + model);
      ++compared;
    }
  }
  svc.stop();
  server.join();
  if (o.pass) o.detail = std::to_string(compared) + " models byte-identical";
  return o;
}

Outcome monotonicity() {
  Outcome o;
  // coverage bands on every model report
  const auto bundle = load_bundle(BundlePaths::in_directory(testing::fixture_dir()));
  PipelineConfig cfg;
  const auto ctx = prepare_context(bundle, cfg);
  for (int k = 0; k <= 3; ++k) {
    for (auto kind : kAllModels) {
      const auto r = run_model(kind, ctx, k).metrics;
      o.require(std::is_sorted(r.coverage.begin(), r.coverage.end()), "coverage bands decrease for " + r.model);
    }
  }
  // nested open-site sequences never raise the unreachable fraction
  PlanProblem p = cfg.problem;
  p.min_separation_km = 0.0;
  const auto inst = make_instance(p, ctx.candidates.sites, bundle, ctx.matrix, ctx.equity, ctx.forecasts);
  Rng rng(5);
  int steps = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> order(inst.n_candidates());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform() * i)]);
    std::vector<std::size_t> open;
    double prev = compute_metrics(ctx, make_plan(inst, p, open, PlanMethod::Exact), "x", 0).accessibility_score;
    for (std::size_t s = 0; s < std::min<std::size_t>(5, order.size()); ++s) {
      open.push_back(order[s]);
      const double next =
          compute_metrics(ctx, make_plan(inst, p, open, PlanMethod::Exact), "x", static_cast<int>(open.size()))
              .accessibility_score;
      o.require(next <= prev, "unreachable fraction rose after opening a site");
      prev = next;
      ++steps;
    }
  }
  // K -> K+1 on criterion 1's instances, where the optimal K-set can be extended
  int pairs = 0, blocked = 0;
  for (const auto& pc : instances().cases) {
    auto q = pc.problem;
    const auto base = solve_exact(pc.inst, q);
    q.k += 1;
    std::vector<std::size_t> open;
    for (const auto& id : base.opened) {
      for (std::size_t c = 0; c < pc.inst.n_candidates(); ++c) {
        if (pc.inst.candidates[c].id == id) open.push_back(c);
      }
    }
    bool extendable = false;
    for (std::size_t c = 0; c < pc.inst.n_candidates() && !extendable; ++c) {
      extendable = std::none_of(open.begin(), open.end(), [&](std::size_t x) { return x == c || pc.inst.conflicts(x, c); });
    }
    if (!extendable) {
      ++blocked;
      continue;
    }
    o.require(solve_exact(pc.inst, q).objective <= base.objective, "objective rose from K to K+1");
    ++pairs;
  }
  if (o.pass) {
    o.detail = "coverage sorted on 24 reports, " + std::to_string(steps) + " nested openings, " +
               std::to_string(pairs) + " K->K+1 pairs (" + std::to_string(blocked) +
               " skipped: optimal set not extendable under separation)";
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 solver optimality", solver_optimality},
      {"2 constraint soundness", constraint_soundness},
      {"3 2SFCA accounting identity", fca_identity},
      {"4 Gini", gini},
      {"5 forecast recovery", forecast_recovery},
      {"6 CMA-ES", cma},
      {"7 end-to-end dominance", dominance},
      {"8 CLI/service equivalence", cli_service_equivalence},
      {"9 monotonicity", monotonicity},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << o.detail << std::endl;
  }
  return failed ? 1 : 0;
}
