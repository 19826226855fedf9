#include "equiplan/cli.hpp"

#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "equiplan/error.hpp"
#include "equiplan/evaluation.hpp"
#include "equiplan/report_io.hpp"
#include "equiplan/service.hpp"

namespace equiplan {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string out;
  std::string data;
  int horizon = 2030;
  int k = 3;
  std::optional<double> t_max;
  std::optional<double> separation;
  std::optional<int> beds;
  std::optional<double> theta;
  std::uint64_t seed = 42;
  bool lenient = false;

  std::string data_dir() const { return data.empty() ? out : data; }
};

void add_out(CLI::App* cmd, Common& c) {
  cmd->add_option("--out", c.out, "Output directory")->required();
}

void add_data(CLI::App* cmd, Common& c) {
  cmd->add_option("--data", c.data, "Bundle directory (defaults to --out)");
  cmd->add_flag("--lenient", c.lenient, "Skip rejected rows instead of failing");
}

void add_problem(CLI::App* cmd, Common& c, bool with_k) {
  cmd->add_option("--horizon", c.horizon, "Last forecast year")->check(CLI::Range(1900, 2200));
  if (with_k) cmd->add_option("--k", c.k, "New sites to open")->check(CLI::NonNegativeNumber);
  cmd->add_option("--t-max", c.t_max, "Assignment threshold in minutes")->check(CLI::PositiveNumber);
  cmd->add_option("--separation", c.separation, "Minimum site separation in km")->check(CLI::NonNegativeNumber);
  cmd->add_option("--beds", c.beds, "Beds per new site")->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", c.seed, "Random seed");
}

DataBundle load(const Common& c, std::ostream& err) {
  LoadReport report;
  auto bundle = load_bundle(BundlePaths::in_directory(c.data_dir()), &report, LoadOptions{!c.lenient});
  for (const auto& f : report.files) {
    for (const auto& d : f.diagnostics) err << "rejected: " << d << '\n';
  }
  return bundle;
}

ScenarioRequest request_from(const Common& c, ModelKind model) {
  ScenarioRequest r;
  r.model = model;
  r.k = c.k;
  r.horizon = c.horizon;
  r.t_max = c.t_max;
  r.min_separation_km = c.separation;
  r.beds_per_new_site = c.beds;
  r.seed = c.seed;
  return r;
}

std::string out_path(const Common& c, const char* name) { return (fs::path(c.out) / name).string(); }

Service* g_service = nullptr;

void handle_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Equity-aware hospital siting: forecasts, indices, planning and evaluation", "equiplan"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "equiplan 0.1.0");
  Common c;

  auto* synth = app.add_subcommand("synth", "Write a synthetic Saarland-like bundle");
  int n_districts = 6, n_hospitals = 20;
  add_out(synth, c);
  synth->add_option("--seed", c.seed, "Random seed");
  synth->add_option("--districts", n_districts, "Number of districts")->check(CLI::Range(2, 1000));
  synth->add_option("--hospitals", n_hospitals, "Number of hospitals")->check(CLI::Range(1, 100000));

  auto* ingest = app.add_subcommand("ingest", "Validate a bundle and write it in normalized form");
  add_out(ingest, c);
  add_data(ingest, c);

  auto* forecast = app.add_subcommand("forecast", "Forecast inpatient demand per district");
  add_out(forecast, c);
  add_data(forecast, c);
  forecast->add_option("--horizon", c.horizon, "Last forecast year")->check(CLI::Range(1900, 2200));

  auto* indices = app.add_subcommand("indices", "Accessibility, vulnerability, equity and HFDR per district");
  add_out(indices, c);
  add_data(indices, c);
  add_problem(indices, c, false);

  auto* plan = app.add_subcommand("plan", "Site new hospitals");
  std::string model_name = "main", weights_file;
  add_out(plan, c);
  add_data(plan, c);
  add_problem(plan, c, true);
  plan->add_option("--model", model_name, "Model to plan with");
  plan->add_option("--weights", weights_file, "Weights JSON (for example tune.json)");
  plan->add_option("--theta", c.theta, "Equity weight")->check(CLI::NonNegativeNumber);

  auto* tune = app.add_subcommand("tune", "Tune planner weights with CMA-ES");
  std::vector<std::string> tune_params{"theta"};
  int budget = 60;
  double sigma = 1.0;
  add_out(tune, c);
  add_data(tune, c);
  add_problem(tune, c, true);
  tune->add_option("--params", tune_params, "Weights to tune: theta, alpha_dep, alpha_eld, ring_scale")->delimiter(',');
  tune->add_option("--budget", budget, "Objective evaluations")->check(CLI::PositiveNumber);
  tune->add_option("--sigma", sigma, "Initial step size")->check(CLI::PositiveNumber);

  auto* evaluate = app.add_subcommand("evaluate", "Six-metric report for one or all models");
  std::string eval_model;
  add_out(evaluate, c);
  add_data(evaluate, c);
  add_problem(evaluate, c, true);
  evaluate->add_option("--model", eval_model, "Single model (default: all six)");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  ServiceConfig svc;
  svc.apply_env();
  serve->add_option("--data", svc.data_dir, "Bundle directory")->capture_default_str();
  serve->add_option("--run-dir", svc.run_dir, "Scenario store")->capture_default_str();
  serve->add_option("--host", svc.host, "Bind address")->capture_default_str();
  serve->add_option("--port", svc.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535))->capture_default_str();
  serve->add_option("--workers", svc.workers, "Concurrent scenario runs")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << "equiplan 0.1.0\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 1;
  }

  auto base_config = [&] {
    PipelineConfig cfg;
    cfg.horizon = c.horizon;
    cfg.seed = c.seed;
    if (c.t_max) cfg.problem.t_max = *c.t_max;
    if (c.separation) {
      cfg.problem.min_separation_km = *c.separation;
      cfg.candidates.min_separation_km = *c.separation;
    }
    if (c.beds) {
      cfg.problem.beds_per_new_site = *c.beds;
      cfg.candidates.beds = *c.beds;
    }
    return cfg;
  };

  try {
    if (synth->parsed()) {
      const auto bundle = synth_fixture(c.seed, n_districts, n_hospitals);
      write_bundle(bundle, c.out);
      out << "wrote " << bundle.districts.size() << " districts and " << bundle.hospitals.size() << " hospitals to "
          << c.out << '\n';
    } else if (ingest->parsed()) {
      LoadReport report;
      const auto bundle = load_bundle(BundlePaths::in_directory(c.data_dir()), &report, LoadOptions{!c.lenient});
      Json j;
      j["files"] = Json::array();
      for (const auto& f : report.files) {
        j["files"].push_back({{"path", f.path}, {"rows", f.rows}, {"accepted", f.accepted}, {"rejected", f.rejected},
                              {"diagnostics", f.diagnostics}});
        for (const auto& d : f.diagnostics) err << "rejected: " << d << '\n';
      }
      j["districts"] = bundle.districts.size();
      j["hospitals"] = bundle.hospitals.size();
      j["loaded_at"] = bundle.meta.loaded_at;
      if (fs::weakly_canonical(c.data_dir()) != fs::weakly_canonical(c.out)) write_bundle(bundle, c.out);
      write_text(out_path(c, "ingest_report.json"), j.dump(2) + "\n");
      out << "ingested " << bundle.districts.size() << " districts, " << bundle.hospitals.size() << " hospitals ("
          << report.total_rejected() << " rejected rows)\n";
    } else if (forecast->parsed()) {
      const auto bundle = load(c, err);
      PipelineConfig cfg = base_config();
      const auto table = forecast_demand(bundle, c.horizon, cfg.arima_grid);
      write_text(out_path(c, "forecasts.csv"), forecasts_csv(table));
      out << "wrote " << out_path(c, "forecasts.csv") << '\n';
    } else if (indices->parsed()) {
      const auto bundle = load(c, err);
      const auto ctx = prepare_context(bundle, base_config());
      write_text(out_path(c, "indices.csv"), indices_csv(ctx));
      write_text(out_path(c, "districts.geojson"), districts_geojson(bundle, &ctx).dump() + "\n");
      out << "equity score " << aggregate_equity(ctx.equity, ctx.populations) << ", HFDR aggregate "
          << hfdr_aggregate(ctx.hfdr) << '\n';
    } else if (plan->parsed()) {
      const auto bundle = load(c, err);
      auto req = request_from(c, parse_model(model_name));
      if (!weights_file.empty() || c.theta) {
        PipelineConfig cfg = base_config();
        PlannerWeights w{cfg.problem.theta, cfg.vulnerability, cfg.candidates.ring_scale};
        if (!weights_file.empty()) {
          try {
            w = parse_weights(Json::parse(read_text(weights_file)), w);
          } catch (const Json::exception& e) {
            throw ValidationError(weights_file + ": " + e.what());
          }
        }
        if (c.theta) w.theta = *c.theta;
        req.weights = w;
      }
      const auto run = run_request(bundle, base_config(), req);
      write_text(out_path(c, "plan.json"), to_json(run.plan).dump(2) + "\n");
      write_text(out_path(c, "plan.geojson"), plan_geojson(bundle, run.plan).dump() + "\n");
      out << to_string(run.kind) << ": opened " << run.plan.opened.size() << " site(s), objective "
          << run.plan.objective << (run.plan.feasible ? "" : " (infeasible)") << '\n';
    } else if (tune->parsed()) {
      const auto bundle = load(c, err);
      PipelineConfig cfg = base_config();
      cfg.problem.k = c.k;
      cfg.tune_params = tune_params;
      cfg.tune_budget = budget;
      cfg.tune_sigma = sigma;
      const auto ctx = prepare_context(bundle, cfg);
      std::vector<TunableParam> params;
      for (const auto& p : tune_params) params.push_back(parse_tunable(p));
      CmaConfig cma;
      cma.initial_sigma = sigma;
      cma.max_evaluations = budget;
      cma.seed = c.seed;
      const PlannerWeights baseline{cfg.problem.theta, cfg.vulnerability, cfg.candidates.ring_scale};
      const auto t = tune_planner_weights(ctx, cfg.problem, params, baseline, cma);
      write_text(out_path(c, "tune.json"), to_json(t).dump(2) + "\n");
      out << "loss " << t.baseline_loss << " -> " << t.cma.best_loss << " after " << t.cma.evaluations
          << " evaluations\n";
    } else if (evaluate->parsed()) {
      const auto bundle = load(c, err);
      std::vector<MetricsReport> reports;
      if (!eval_model.empty()) {
        const auto run = run_request(bundle, base_config(), request_from(c, parse_model(eval_model)));
        reports.push_back(run.metrics);
        write_text(out_path(c, "plan.json"), to_json(run.plan).dump(2) + "\n");
      } else {
        const auto cfg = config_for(base_config(), request_from(c, ModelKind::Main));
        const auto ctx = prepare_context(bundle, cfg);
        for (auto kind : kAllModels) reports.push_back(run_model(kind, ctx, c.k).metrics);
      }
      write_text(out_path(c, "metrics.csv"), metrics_csv(reports));
      write_text(out_path(c, "metrics_norm.csv"), metrics_norm_csv(reports));
      Json j = Json::array();
      for (const auto& r : reports) j.push_back(to_json(r));
      write_text(out_path(c, "metrics.json"), j.dump(2) + "\n");
      out << metrics_csv(reports);
    } else if (serve->parsed()) {
      Service service(svc);
      const int port = service.bind();
      out << "listening on http://" << svc.host << ':' << port << std::endl;
      g_service = &service;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      service.listen();
      g_service = nullptr;
    }
  } catch (const StageError& e) {
    err << "error in " << e.stage() << ": " << e.what() << '\n';
    return e.is_validation() ? 1 : 2;
  } catch (const LoadError& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& row : e.rows()) err << "  " << row << '\n';
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace equiplan
