// Command-line front end: fit, evaluate, forecast, export-rates, simulate.
//
// Exit codes: 0 success, 1 data error, 2 numeric divergence, 3 bad flags.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dde/dde.hpp"

namespace fs = std::filesystem;
using dde::json;

namespace {

enum ExitCode { kOk = 0, kDataError = 1, kNumericError = 2, kUsageError = 3 };

struct UsageError : dde::Error {
  using dde::Error::Error;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_hidden(const std::string& text) {
  std::vector<std::size_t> sizes;
  for (const auto& item : split_list(text)) {
    std::size_t pos = 0;
    long value = 0;
    try {
      value = std::stol(item, &pos);
    } catch (const std::exception&) {
      throw UsageError("--hidden expects a comma list of positive integers");
    }
    if (pos != item.size() || value <= 0) {
      throw UsageError("--hidden expects a comma list of positive integers");
    }
    sizes.push_back(static_cast<std::size_t>(value));
  }
  if (sizes.empty()) throw UsageError("--hidden needs at least one layer");
  return sizes;
}

std::string manifest_comment(const json& manifest) { return "# manifest: " + manifest.dump() + "\n"; }

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dde::DataError("cannot write '" + path.string() + "'");
  out << content;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
  } else {
    write_file(out_path, content);
  }
}

// ---------------------------------------------------------------- fit

struct FitOptions {
  std::string data;
  std::string region;
  double population = 0.0;
  std::string variant = "sird";
  std::string method = "dde";
  std::string integrator = "euler";
  int substeps = 4;
  std::string hidden = "16,16";
  int iterations = 5000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t test_days = 20;
  std::string out = "out";
  bool grid = false;
  unsigned jobs = 0;
};

json make_fit_manifest(const FitOptions& o, const std::string& variant, const std::string& method,
                       const std::string& out_dir) {
  return {{"command", "fit"},
          {"data", o.data},
          {"region", o.region},
          {"population", o.population},
          {"variant", variant},
          {"method", method},
          {"integrator", {{"scheme", o.integrator}, {"substeps_per_day", o.substeps}}},
          {"training",
           {{"iterations", o.iterations},
            {"learning_rate", o.lr},
            {"hidden", o.hidden},
            {"test_days", o.test_days}}},
          {"seed", o.seed},
          {"out", out_dir}};
}

struct LoadedData {
  dde::ObservedSeries series;
  dde::SplitConfig split;
};

LoadedData load_data(const std::string& data_path, const std::string& region_path,
                     double population_flag) {
  LoadedData d;
  std::string region_id = fs::path(data_path).stem().string();
  double population = population_flag;
  if (!region_path.empty()) {
    auto region = dde::load_region_config(region_path);
    region_id = region.region_id;
    d.split = region.split;
    if (population <= 0) population = region.population;
  }
  if (!(population > 0)) throw UsageError("population unknown: pass --region or --population");
  d.series = dde::load_region_csv(data_path, population, region_id);
  return d;
}

int run_single_fit(const FitOptions& o, const LoadedData& data, const std::string& variant,
                   const std::string& method, const fs::path& out_dir) {
  dde::TrainingConfig cfg;
  cfg.variant = dde::parse_variant(variant);
  cfg.method = dde::parse_method(method);
  cfg.integrator = {dde::parse_scheme(o.integrator), o.substeps};
  cfg.hidden = parse_hidden(o.hidden);
  cfg.iterations = o.iterations;
  cfg.learning_rate = o.lr;
  cfg.seed = o.seed;
  cfg.test_days = o.test_days;
  cfg.split = data.split;
  cfg.validate();

  const json manifest = make_fit_manifest(o, variant, method, out_dir.string());
  dde::FitResult result = dde::fit(data.series, cfg);

  write_file(out_dir / "fit.json", dde::fit_to_json(result, manifest).dump(2) + "\n");
  std::string curve = manifest_comment(manifest) + "iteration,loss\n";
  for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
    curve += std::to_string(i) + "," + dde::format_number(result.loss_curve[i]) + "\n";
  }
  write_file(out_dir / "loss_curve.csv", curve);

  std::cerr << variant << "/" << method << ": loss " << result.final_loss;
  if (result.metrics) {
    std::cerr << ", test mse(1e4) " << result.metrics->mean_mse_1e4;
    if (result.metrics->mean_pearson) std::cerr << ", pearson " << *result.metrics->mean_pearson;
  }
  std::cerr << " -> " << (out_dir / "fit.json").string() << "\n";
  if (result.diverged) {
    std::cerr << "error: training diverged (" << result.divergence
              << "); wrote the best finite parameters\n";
    return kNumericError;
  }
  return kOk;
}

int cmd_fit(const FitOptions& o) {
  if (o.iterations < 1) throw UsageError("--iters must be >= 1");
  if (o.substeps < 1) throw UsageError("--substeps must be >= 1");
  if (!(o.lr > 0)) throw UsageError("--lr must be positive");
  const auto variants = split_list(o.variant);
  const auto methods = split_list(o.method);
  if (variants.empty() || methods.empty()) throw UsageError("--variant and --method are required");
  for (const auto& v : variants) dde::parse_variant(v);
  for (const auto& m : methods) dde::parse_method(m);
  parse_hidden(o.hidden);
  dde::parse_scheme(o.integrator);
  if (!o.grid && (variants.size() > 1 || methods.size() > 1)) {
    throw UsageError("comma lists in --variant/--method need --grid");
  }

  const LoadedData data = load_data(o.data, o.region, o.population);
  if (!o.grid) return run_single_fit(o, data, variants[0], methods[0], o.out);

  std::vector<std::pair<std::string, std::string>> jobs;
  for (const auto& v : variants) {
    for (const auto& m : methods) jobs.emplace_back(v, m);
  }
  const unsigned workers =
      std::max(1u, o.jobs ? o.jobs : std::max(1u, std::thread::hardware_concurrency()));
  int worst = kOk;
  for (std::size_t first = 0; first < jobs.size(); first += workers) {
    std::vector<std::future<int>> running;
    for (std::size_t i = first; i < std::min(jobs.size(), first + workers); ++i) {
      const auto& [v, m] = jobs[i];
      running.push_back(std::async(std::launch::async, [&, v = v, m = m] {
        try {
          return run_single_fit(o, data, v, m, fs::path(o.out) / (v + "-" + m));
        } catch (const dde::NumericError& e) {
          std::cerr << v << "/" << m << ": error: " << e.what() << "\n";
          return static_cast<int>(kNumericError);
        } catch (const dde::ConfigError& e) {
          std::cerr << v << "/" << m << ": error: " << e.what() << "\n";
          return static_cast<int>(kUsageError);
        } catch (const dde::Error& e) {
          std::cerr << v << "/" << m << ": error: " << e.what() << "\n";
          return static_cast<int>(kDataError);
        }
      }));
    }
    for (auto& f : running) worst = std::max(worst, f.get());
  }
  return worst;
}

// ---------------------------------------------------------------- shared

struct Reloaded {
  dde::FitResult fit;
  json manifest;
};

Reloaded reload_fit(const std::string& path) {
  json j = dde::load_json(path);
  Reloaded r{dde::fit_from_json(j), j.value("manifest", json::object())};
  return r;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
  std::string fit;
  std::string data;
  std::string region;
  std::string variant;
  std::string out;
};

int cmd_evaluate(const EvaluateOptions& o) {
  Reloaded loaded = reload_fit(o.fit);
  auto& fit = loaded.fit;
  if (!o.variant.empty() && dde::parse_variant(o.variant) != fit.variant) {
    throw UsageError("fit variant " + std::string(dde::to_string(fit.variant)) +
                     " does not match --variant " + o.variant);
  }
  LoadedData data = load_data(o.data, o.region, fit.model.params.population());
  if (!o.region.empty() && !fit.region_id.empty() && data.series.region_id != fit.region_id) {
    throw UsageError("fit region '" + fit.region_id + "' does not match data region '" +
                     data.series.region_id + "'");
  }
  if (fit.test_days == 0) throw UsageError("fit has no test window to evaluate");
  if (data.series.size() <= fit.test_days) throw dde::DataError("data shorter than the test window");
  const std::size_t first = data.series.size() - fit.test_days;
  auto traj = dde::simulate(fit.model, fit.initial_state,
                            static_cast<int>(data.series.size()) - 1, fit.config.integrator);
  auto report = dde::evaluate_window(fit.variant, traj,
                                     data.series.slice(first, fit.test_days), first);
  json manifest = {{"command", "evaluate"},
                   {"fit", o.fit},
                   {"data", o.data},
                   {"region", o.region},
                   {"fit_manifest", loaded.manifest}};
  json doc = dde::report_to_json(report);
  doc["manifest"] = manifest;
  doc["variant"] = std::string(dde::to_string(fit.variant));
  doc["method"] = std::string(dde::to_string(fit.method));
  emit(o.out, doc.dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------- forecast

struct ForecastOptions {
  std::string fit;
  int horizon = 20;
  std::string out;
};

int cmd_forecast(const ForecastOptions& o) {
  if (o.horizon < 1) throw UsageError("--horizon must be >= 1");
  json j = dde::load_json(o.fit);
  Reloaded loaded{dde::fit_from_json(j), j.value("manifest", json::object())};
  auto& fit = loaded.fit;
  if (!j.contains("last_train_state")) throw dde::DataError("fit has no last training-day state");
  const auto start = dde::state_from_json(fit.variant, j.at("last_train_state"));
  auto traj = dde::simulate(fit.model, start, o.horizon, fit.config.integrator);

  json manifest = {{"command", "forecast"},
                   {"fit", o.fit},
                   {"horizon", o.horizon},
                   {"fit_manifest", loaded.manifest}};
  std::string csv = manifest_comment(manifest) + "day";
  for (auto c : dde::layout(fit.variant)) csv += "," + std::string(dde::to_string(c));
  csv += ",I_hat\n";
  for (std::size_t t = 1; t < traj.states.size(); ++t) {
    const auto& s = traj.states[t];
    csv += std::to_string(s.day);
    for (double x : s.values) csv += "," + dde::format_number(x);
    csv += "," + dde::format_number(dde::predicted_infected(fit.variant, s.values)) + "\n";
  }
  emit(o.out, csv);
  return kOk;
}

// ---------------------------------------------------------------- export-rates

struct ExportOptions {
  std::string fit;
  std::string data;
  std::string region;
  std::string out;
};

int cmd_export_rates(const ExportOptions& o) {
  Reloaded loaded = reload_fit(o.fit);
  auto& fit = loaded.fit;
  if (fit.method != dde::Method::DDE || !fit.model.network) {
    throw UsageError("export-rates needs a dde fit with an effect network");
  }
  LoadedData data = load_data(o.data, o.region, fit.model.params.population());
  auto traj = dde::simulate(fit.model, fit.initial_state,
                            static_cast<int>(data.series.size()) - 1, fit.config.integrator);
  const auto beta = dde::effective_beta(fit.model, traj);
  const double beta_star = fit.model.params.get(dde::Rate::Beta);

  json manifest = {{"command", "export-rates"},
                   {"fit", o.fit},
                   {"data", o.data},
                   {"region", o.region},
                   {"fit_manifest", loaded.manifest}};
  std::string csv = manifest_comment(manifest) + "day,beta_initial,beta_effective\n";
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    csv += std::to_string(traj.states[t].day) + "," + dde::format_number(beta_star) + "," +
           dde::format_number(beta[t]) + "\n";
  }
  emit(o.out, csv);
  return kOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string variant = "sird";
  double population = 1e6;
  double i0 = 100;
  int days = 60;
  int substeps = 16;
  std::vector<std::string> rates;
  double decline = 0.0;
  std::string start_date = "2020-01-24";
  std::string out;
};

// Synthetic case series from the model itself; beta(t) = beta * (1 - decline * t / days).
int cmd_simulate(const SimulateOptions& o) {
  if (o.days < 1) throw UsageError("--days must be >= 1");
  if (o.substeps < 1) throw UsageError("--substeps must be >= 1");
  const auto v = dde::parse_variant(o.variant);
  dde::RateParameters params = dde::InitialRates{}.for_variant(v, o.population);
  for (const auto& kv : o.rates) {
    auto eq = kv.find('=');
    auto rate = eq == std::string::npos ? std::nullopt : dde::parse_rate(kv.substr(0, eq));
    if (!rate) throw UsageError("--rate expects name=value, got '" + kv + "'");
    if (!params.is_active(*rate)) throw UsageError("rate '" + kv.substr(0, eq) + "' is not used by " + o.variant);
    params.set(*rate, std::stod(kv.substr(eq + 1)));
  }
  params.validate();
  auto z = dde::initial_state(v, o.i0, 0, 0, params, {});
  const auto r_idx = *dde::index_of(v, dde::Compartment::R);
  const auto d_idx = dde::index_of(v, dde::Compartment::D);
  const auto e_idx = dde::index_of(v, dde::Compartment::E);
  const double beta0 = params.get(dde::Rate::Beta);
  const double dt = 1.0 / o.substeps;

  json manifest = {{"command", "simulate"},   {"variant", o.variant}, {"population", o.population},
                   {"i0", o.i0},              {"days", o.days},       {"substeps", o.substeps},
                   {"rates", o.rates},        {"decline", o.decline}, {"start_date", o.start_date}};
  std::string csv = manifest_comment(manifest) + "date,cumulative_cases,recovered,deaths\n";
  dde::Date date = dde::parse_date(o.start_date);
  double last_cumulative = 0.0;
  for (int d = 0; d < o.days; ++d) {
    double cumulative = o.population - z.values[0] - (e_idx ? z.values[*e_idx] : 0.0);
    const double r = std::round(z.values[r_idx]);
    const double dd = d_idx ? std::round(z.values[*d_idx]) : 0.0;
    cumulative = std::max({std::round(cumulative), r + dd, last_cumulative});
    last_cumulative = cumulative;
    csv += dde::format_date(date) + "," + dde::format_number(cumulative) + "," +
           dde::format_number(r) + "," + dde::format_number(dd) + "\n";
    date = dde::next_day(date);
    for (int s = 0; s < o.substeps; ++s) {
      const double t = d + s * dt;
      z = dde::rk4_step(v, z, params, beta0 * (1.0 - o.decline * t / o.days), dt);
    }
  }
  emit(o.out, csv);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compartmental epidemic model fitting with a neural effect network"};
  app.require_subcommand(1);

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a regional case series");
  fit_cmd->add_option("--data", fit.data, "Case CSV (date,cumulative_cases,recovered,deaths)")->required();
  fit_cmd->add_option("--region", fit.region, "Region config JSON");
  fit_cmd->add_option("--population", fit.population, "Population N (overrides the region config)");
  fit_cmd->add_option("--variant", fit.variant, "sir|seir|sird|seird|smcrd|semcrd (comma list with --grid)");
  fit_cmd->add_option("--method", fit.method, "dde|const-grad|nelder-mead (comma list with --grid)");
  fit_cmd->add_option("--integrator", fit.integrator, "euler|rk4");
  fit_cmd->add_option("--substeps", fit.substeps, "Integrator substeps per day");
  fit_cmd->add_option("--hidden", fit.hidden, "Hidden layer widths, e.g. 16,16");
  fit_cmd->add_option("--iters", fit.iterations, "Training iterations");
  fit_cmd->add_option("--lr", fit.lr, "Base learning rate");
  fit_cmd->add_option("--seed", fit.seed, "Network initialization seed");
  fit_cmd->add_option("--test-days", fit.test_days, "Held-out final days");
  fit_cmd->add_option("--out", fit.out, "Output directory");
  fit_cmd->add_flag("--grid", fit.grid, "Fit every variant x method combination");
  fit_cmd->add_option("--jobs", fit.jobs, "Worker threads for --grid");

  EvaluateOptions ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score a fit on the test window of a series");
  ev_cmd->add_option("--fit", ev.fit, "fit.json")->required();
  ev_cmd->add_option("--data", ev.data, "Case CSV")->required();
  ev_cmd->add_option("--region", ev.region, "Region config JSON");
  ev_cmd->add_option("--variant", ev.variant, "Expected variant");
  ev_cmd->add_option("--out", ev.out, "Report path (default stdout)");

  ForecastOptions fc;
  auto* fc_cmd = app.add_subcommand("forecast", "Integrate forward from the last training day");
  fc_cmd->add_option("--fit", fc.fit, "fit.json")->required();
  fc_cmd->add_option("--horizon", fc.horizon, "Days to forecast");
  fc_cmd->add_option("--out", fc.out, "CSV path (default stdout)");

  ExportOptions ex;
  auto* ex_cmd = app.add_subcommand("export-rates", "Infection rate along the fitted trajectory");
  ex_cmd->add_option("--fit", ex.fit, "fit.json")->required();
  ex_cmd->add_option("--data", ex.data, "Case CSV")->required();
  ex_cmd->add_option("--region", ex.region, "Region config JSON");
  ex_cmd->add_option("--out", ex.out, "CSV path (default stdout)");

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Write a synthetic case series");
  sim_cmd->add_option("--variant", sim.variant, "Model variant");
  sim_cmd->add_option("--population", sim.population, "Population N");
  sim_cmd->add_option("--i0", sim.i0, "Initial infections");
  sim_cmd->add_option("--days", sim.days, "Number of days");
  sim_cmd->add_option("--substeps", sim.substeps, "RK4 substeps per day");
  sim_cmd->add_option("--rate", sim.rates, "Rate override, e.g. beta=0.3 (repeatable)");
  sim_cmd->add_option("--decline", sim.decline, "Relative beta decline over the series");
  sim_cmd->add_option("--start-date", sim.start_date, "First date (YYYY-MM-DD)");
  sim_cmd->add_option("--out", sim.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit);
    if (*ev_cmd) return cmd_evaluate(ev);
    if (*fc_cmd) return cmd_forecast(fc);
    if (*ex_cmd) return cmd_export_rates(ex);
    if (*sim_cmd) return cmd_simulate(sim);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const dde::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const dde::StructuralError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const dde::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericError;
  } catch (const dde::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}
