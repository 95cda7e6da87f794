#pragma once

// JSON serialization of networks, rates, evaluation reports and fit results.
// Doubles are written in shortest round-trip form, so a reloaded fit
// reproduces trajectories and metrics bit for bit.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dde/compartments.hpp"
#include "dde/effect_net.hpp"
#include "dde/errors.hpp"
#include "dde/integrator.hpp"
#include "dde/metrics.hpp"
#include "dde/training.hpp"

namespace dde {

using json = nlohmann::json;

inline json network_to_json(const EffectNetwork& net) {
  json weights = json::array(), biases = json::array(), activations = json::array();
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    weights.push_back(net.layers()[l].weights);
    biases.push_back(net.layers()[l].biases);
    activations.push_back(l + 1 == net.layers().size() ? "sigmoid" : "elu");
  }
  return {{"layer_sizes", net.layer_sizes()},
          {"weights", weights},
          {"biases", biases},
          {"activations", activations},
          {"seed", net.seed()}};
}

inline EffectNetwork network_from_json(const json& j) {
  EffectNetwork net(j.at("layer_sizes").get<std::vector<std::size_t>>(),
                    j.value("seed", std::uint64_t{0}));
  const auto& w = j.at("weights");
  const auto& b = j.at("biases");
  if (w.size() != net.layers().size() || b.size() != net.layers().size()) {
    throw StructuralError("network JSON has the wrong number of layers");
  }
  if (j.contains("activations")) {
    const auto& a = j.at("activations");
    for (std::size_t l = 0; l < a.size(); ++l) {
      const std::string expected = l + 1 == a.size() ? "sigmoid" : "elu";
      if (a[l].get<std::string>() != expected) {
        throw StructuralError("unsupported activation '" + a[l].get<std::string>() + "'");
      }
    }
  }
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    auto weights = w[l].get<std::vector<double>>();
    auto biases = b[l].get<std::vector<double>>();
    if (weights.size() != layer.weights.size() || biases.size() != layer.biases.size()) {
      throw StructuralError("network JSON layer " + std::to_string(l) + " has the wrong shape");
    }
    layer.weights = std::move(weights);
    layer.biases = std::move(biases);
  }
  return net;
}

inline json params_to_json(const RateParameters& p) {
  json j = {{"population", p.population()}};
  for (Rate r : active_rates(p.variant())) j[std::string(to_string(r))] = p.get(r);
  return j;
}

inline RateParameters params_from_json(Variant v, const json& j) {
  RateParameters p(v, j.at("population").get<double>());
  for (Rate r : active_rates(v)) p.set(r, j.at(std::string(to_string(r))).get<double>());
  return p;
}

inline json state_to_json(Variant v, const CompartmentState& s) {
  json labels = json::array();
  for (Compartment c : layout(v)) labels.push_back(std::string(to_string(c)));
  return {{"day", s.day}, {"labels", labels}, {"values", s.values}};
}

inline CompartmentState state_from_json(Variant v, const json& j) {
  CompartmentState s{j.at("values").get<std::vector<double>>(), j.at("day").get<int>()};
  detail::check_dimension(v, s.values.size());
  return s;
}

inline json series_metrics_to_json(const SeriesMetrics& m) {
  return {{"mse_1e4", m.mse_1e4},
          {"pearson", m.pearson ? json(*m.pearson) : json(nullptr)},
          {"pearson_defined", m.pearson.has_value()}};
}

inline json report_to_json(const EvaluationReport& r) {
  json series = json::object();
  if (r.infected) series["I"] = series_metrics_to_json(*r.infected);
  if (r.recovered) series["R"] = series_metrics_to_json(*r.recovered);
  if (r.deaths) series["D"] = series_metrics_to_json(*r.deaths);
  return {{"window", {{"first_day", r.first_day}, {"last_day", r.last_day}}},
          {"series", series},
          {"aggregate",
           {{"mean_mse_1e4", r.mean_mse_1e4},
            {"mean_pearson", r.mean_pearson ? json(*r.mean_pearson) : json(nullptr)},
            {"undefined_pearson", r.undefined_pearson}}}};
}

inline json config_to_json(const TrainingConfig& c) {
  const auto& ir = c.initial;
  return {{"method", std::string(to_string(c.method))},
          {"variant", std::string(to_string(c.variant))},
          {"iterations", c.iterations},
          {"learning_rate", c.learning_rate},
          {"decay_factor", c.decay_factor},
          {"decay_every", c.decay_every},
          {"seed", c.seed},
          {"integrator",
           {{"scheme", std::string(to_string(c.integrator.scheme))},
            {"substeps_per_day", c.integrator.substeps_per_day}}},
          {"hidden", c.hidden},
          {"test_days", c.test_days},
          {"initial_rates",
           {{"beta", ir.beta},
            {"gamma", ir.gamma},
            {"delta", ir.delta},
            {"delta1", ir.delta1},
            {"delta2", ir.delta2},
            {"alpha", ir.alpha},
            {"epsilon", ir.epsilon}}},
          {"split", {{"e0_ratio", c.split.e0_ratio}, {"mild_fraction", c.split.mild_fraction}}},
          {"nelder_mead",
           {{"x_tolerance", c.nelder_mead.x_tolerance},
            {"f_tolerance", c.nelder_mead.f_tolerance}}}};
}

inline TrainingConfig config_from_json(const json& j) {
  TrainingConfig c;
  c.method = parse_method(j.at("method").get<std::string>());
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.iterations = j.at("iterations").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.decay_factor = j.at("decay_factor").get<double>();
  c.decay_every = j.at("decay_every").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.integrator.scheme = parse_scheme(j.at("integrator").at("scheme").get<std::string>());
  c.integrator.substeps_per_day = j.at("integrator").at("substeps_per_day").get<int>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.test_days = j.at("test_days").get<std::size_t>();
  const auto& ir = j.at("initial_rates");
  c.initial = {ir.at("beta"),   ir.at("gamma"), ir.at("delta"),  ir.at("delta1"),
               ir.at("delta2"), ir.at("alpha"), ir.at("epsilon")};
  c.split.e0_ratio = j.at("split").at("e0_ratio").get<double>();
  c.split.mild_fraction = j.at("split").at("mild_fraction").get<double>();
  c.nelder_mead.x_tolerance = j.at("nelder_mead").at("x_tolerance").get<double>();
  c.nelder_mead.f_tolerance = j.at("nelder_mead").at("f_tolerance").get<double>();
  return c;
}

/// fit.json document. `manifest` is embedded verbatim.
inline json fit_to_json(const FitResult& r, const json& manifest = json::object()) {
  json j = {{"manifest", manifest},
            {"variant", std::string(to_string(r.variant))},
            {"method", std::string(to_string(r.method))},
            {"region_id", r.region_id},
            {"params", params_to_json(r.model.params)},
            {"loss_curve", r.loss_curve},
            {"best_iteration", r.best_iteration},
            {"final_loss", r.final_loss},
            {"diverged", r.diverged},
            {"divergence", r.divergence},
            {"initial_state", state_to_json(r.variant, r.initial_state)},
            {"train_days", r.train_days},
            {"test_days", r.test_days},
            {"config", config_to_json(r.config)},
            {"seed", r.config.seed},
            {"clamp_events", r.trajectory.clamps.events},
            {"wall_time_s", r.wall_time_s}};
  if (!r.trajectory.states.empty() && r.train_days > 0) {
    j["last_train_state"] = state_to_json(r.variant, r.last_train_state());
  }
  if (r.model.network) j["network"] = network_to_json(*r.model.network);
  j["metrics"] = r.metrics ? report_to_json(*r.metrics) : json(nullptr);
  return j;
}

/// Reloads the fields needed to re-simulate a fit. The trajectory and metrics
/// are left empty; callers recompute them.
inline FitResult fit_from_json(const json& j) {
  FitResult r;
  try {
    r.variant = parse_variant(j.at("variant").get<std::string>());
    r.method = parse_method(j.at("method").get<std::string>());
    r.region_id = j.value("region_id", std::string{});
    r.model.params = params_from_json(r.variant, j.at("params"));
    if (j.contains("network") && !j.at("network").is_null()) {
      r.model.network = network_from_json(j.at("network"));
    }
    r.loss_curve = j.at("loss_curve").get<std::vector<double>>();
    r.best_iteration = j.at("best_iteration").get<std::size_t>();
    r.final_loss = j.at("final_loss").get<double>();
    r.diverged = j.value("diverged", false);
    r.divergence = j.value("divergence", std::string{});
    r.initial_state = state_from_json(r.variant, j.at("initial_state"));
    r.train_days = j.at("train_days").get<std::size_t>();
    r.test_days = j.at("test_days").get<std::size_t>();
    r.config = config_from_json(j.at("config"));
    r.wall_time_s = j.value("wall_time_s", 0.0);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed fit document: ") + e.what());
  }
  return r;
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("invalid JSON in '" + path + "': " + e.what());
  }
}

}  // namespace dde
