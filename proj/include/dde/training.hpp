#pragma once

// Fitting drivers: the effect-network method (dde), constant-rate gradient
// fitting (const-grad) and the Nelder-Mead constant-rate baseline. All three
// minimize the same log-space loss on the training window and are scored on
// the held-out final days by forward integration without refitting.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dde/compartments.hpp"
#include "dde/data.hpp"
#include "dde/effect_net.hpp"
#include "dde/errors.hpp"
#include "dde/gradients.hpp"
#include "dde/integrator.hpp"
#include "dde/loss.hpp"
#include "dde/metrics.hpp"
#include "dde/optim.hpp"

namespace dde {

enum class Method { DDE, ConstGrad, NelderMead };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::DDE: return "dde";
    case Method::ConstGrad: return "const-grad";
    case Method::NelderMead: return "nelder-mead";
  }
  return "dde";
}

inline Method parse_method(std::string_view text) {
  if (text == "dde") return Method::DDE;
  if (text == "const-grad") return Method::ConstGrad;
  if (text == "nelder-mead") return Method::NelderMead;
  throw ConfigError("unknown method '" + std::string(text) + "'");
}

/// Starting values of the rates. beta is the base infection rate beta*.
struct InitialRates {
  double beta = 0.3;
  double gamma = 0.15;
  double delta = 0.07;
  double delta1 = 0.07;
  double delta2 = 0.03;
  double alpha = 0.15;
  double epsilon = 0.03;

  double value(Rate r) const {
    switch (r) {
      case Rate::Beta: return beta;
      case Rate::Gamma: return gamma;
      case Rate::Delta: return delta;
      case Rate::Delta1: return delta1;
      case Rate::Delta2: return delta2;
      case Rate::Alpha: return alpha;
      case Rate::Epsilon: return epsilon;
    }
    return 0.0;
  }

  RateParameters for_variant(Variant v, double population) const {
    RateParameters p(v, population);
    for (Rate r : active_rates(v)) p.set(r, value(r));
    return p;
  }
};

struct TrainingConfig {
  Method method = Method::DDE;
  Variant variant = Variant::SIRD;
  int iterations = 5000;
  double learning_rate = 1e-3;
  double decay_factor = 0.95;
  int decay_every = 400;
  std::uint64_t seed = 0;
  IntegratorConfig integrator{Scheme::Euler, 4};
  std::vector<std::size_t> hidden{16, 16};
  std::size_t test_days = 20;
  InitialRates initial;
  SplitConfig split;
  NelderMeadOptions nelder_mead{};

  void validate() const {
    integrator.validate();
    if (iterations < 0) throw ConfigError("iterations must be non-negative");
    if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (!(decay_factor > 0 && decay_factor <= 1)) throw ConfigError("decay factor must lie in (0, 1]");
    if (decay_every < 1) throw ConfigError("decay interval must be >= 1");
    if (method == Method::DDE && hidden.empty()) {
      throw ConfigError("effect network needs at least one hidden layer");
    }
    if (method != Method::NelderMead && integrator.scheme != Scheme::Euler) {
      throw ConfigError("gradient methods train with the euler integrator");
    }
  }
};

/// Rates plus the optional effect network: everything needed to simulate.
struct FittedModel {
  RateParameters params;
  std::optional<EffectNetwork> network;
};

inline Trajectory simulate(const FittedModel& model, const CompartmentState& initial, int days,
                           const IntegratorConfig& config) {
  const Variant v = model.params.variant();
  if (model.network) {
    NetworkBeta beta(*model.network, model.params.get(Rate::Beta), model.params.population());
    return integrate(v, initial, model.params, beta, days, config);
  }
  return integrate(v, initial, model.params, days, config);
}

/// beta_eff along a trajectory; constant beta when there is no network.
inline std::vector<double> effective_beta(const FittedModel& model, const Trajectory& traj) {
  std::vector<double> out;
  out.reserve(traj.states.size());
  const double beta_star = model.params.get(Rate::Beta);
  std::optional<NetworkBeta> beta;
  if (model.network) beta.emplace(*model.network, beta_star, model.params.population());
  for (const auto& s : traj.states) out.push_back(beta ? (*beta)(s.values) : beta_star);
  return out;
}

/// Scores trajectory days [first, first + observed.size()) against `observed`.
inline EvaluationReport evaluate_window(Variant v, const Trajectory& traj,
                                        const ObservedSeries& observed, std::size_t first) {
  const std::size_t count = observed.size();
  if (first + count > traj.states.size()) {
    throw StructuralError("trajectory does not cover the evaluation window");
  }
  const LossTargets targets = loss_targets(v, observed);
  const auto idx = output_indices(v);
  std::vector<double> pi(count), pr(count), pd(count);
  for (std::size_t t = 0; t < count; ++t) {
    const auto& z = traj.states[first + t].values;
    pi[t] = predicted_infected(v, z);
    pr[t] = z[idx.recovered];
    if (idx.deaths) pd[t] = z[*idx.deaths];
  }
  EvaluationReport report;
  report.infected = score_series(pi, targets.infected);
  report.recovered = score_series(pr, targets.recovered);
  if (idx.deaths) report.deaths = score_series(pd, targets.deaths);
  report.first_day = static_cast<int>(first);
  report.last_day = static_cast<int>(first + count) - 1;
  aggregate(report);
  return report;
}

struct FitResult {
  Method method = Method::DDE;
  Variant variant = Variant::SIRD;
  FittedModel model;
  std::vector<double> loss_curve;
  std::size_t best_iteration = 0;
  double final_loss = 0.0;  // training loss of the reported (best) parameters
  bool diverged = false;
  std::string divergence;  // iteration and cause when diverged
  std::string region_id;
  CompartmentState initial_state;
  Trajectory trajectory;  // initial day through the end of the test window
  std::size_t train_days = 0;
  std::size_t test_days = 0;
  std::optional<EvaluationReport> metrics;
  TrainingConfig config;
  double wall_time_s = 0.0;

  const CompartmentState& last_train_state() const { return trajectory.states.at(train_days - 1); }
};

namespace detail {

struct Prepared {
  SplitSeries split;
  LossTargets targets;
  CompartmentState initial;
  RateParameters params;
};

inline Prepared prepare(const ObservedSeries& observed, const TrainingConfig& cfg) {
  cfg.validate();
  if (!(observed.population > 0)) throw DataError("series population must be positive");
  SplitSeries split = cfg.test_days > 0 ? split_train_test(observed, cfg.test_days)
                                        : SplitSeries{observed, observed.slice(0, 0)};
  if (split.train.size() < 2) {
    throw DataError("training window needs at least 2 days, got " +
                    std::to_string(split.train.size()));
  }
  RateParameters params = cfg.initial.for_variant(cfg.variant, observed.population);
  params.validate();
  CompartmentState initial =
      initial_state(cfg.variant, observed.active_infected[0], observed.recovered[0],
                    observed.deaths[0], params, cfg.split);
  LossTargets targets = loss_targets(cfg.variant, split.train);
  return {std::move(split), std::move(targets), std::move(initial), std::move(params)};
}

inline void finish(FitResult& r, const ObservedSeries& observed, const Prepared& p,
                   std::chrono::steady_clock::time_point start) {
  r.region_id = observed.region_id;
  r.initial_state = p.initial;
  r.train_days = p.split.train.size();
  r.test_days = p.split.test.size();
  r.trajectory = simulate(r.model, p.initial, static_cast<int>(observed.size()) - 1,
                          r.config.integrator);
  if (r.test_days > 0) r.metrics = evaluate_window(r.variant, r.trajectory, p.split.test, r.train_days);
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline FitResult gradient_fit(const ObservedSeries& observed, const TrainingConfig& cfg,
                              bool with_network) {
  const auto start = std::chrono::steady_clock::now();
  Prepared p = prepare(observed, cfg);

  FitResult r;
  r.method = cfg.method;
  r.variant = cfg.variant;
  r.config = cfg;
  r.model.params = p.params;
  if (with_network) {
    r.model.network = init_network(effect_layer_sizes(cfg.variant, cfg.hidden), cfg.seed);
  }

  const std::size_t rate_count = active_rates(cfg.variant).size();
  auto pack = [&](const FittedModel& m) {
    std::vector<double> theta = m.params.to_vector();
    if (m.network) {
      auto w = m.network->flatten();
      theta.insert(theta.end(), w.begin(), w.end());
    }
    return theta;
  };
  auto unpack = [&](std::span<const double> theta, FittedModel& m) {
    m.params.assign(theta.first(rate_count));
    if (m.network) m.network->assign(theta.subspan(rate_count));
  };

  FittedModel current = r.model;
  std::vector<double> theta = pack(current);
  std::vector<double> best = theta;
  double best_loss = std::numeric_limits<double>::infinity();
  AdamState adam;
  AdamOptions opt;
  opt.bounded_prefix = rate_count;

  r.loss_curve.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int it = 0; it < cfg.iterations; ++it) {
    GradientResult g;
    try {
      g = fit_gradients(cfg.variant, p.initial, current.params,
                        current.network ? &*current.network : nullptr, p.targets, cfg.integrator);
    } catch (const NumericError& e) {
      r.diverged = true;
      r.divergence = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
    if (!std::isfinite(g.loss.total)) {
      r.diverged = true;
      r.divergence = "iteration " + std::to_string(it) + ": non-finite loss";
      break;
    }
    r.loss_curve.push_back(g.loss.total);
    if (g.loss.total < best_loss) {
      best_loss = g.loss.total;
      best = theta;
      r.best_iteration = static_cast<std::size_t>(it);
    }
    const auto grads = g.gradients.flatten();
    adam_step(theta, grads, adam, lr_schedule(cfg.learning_rate, it, cfg.decay_factor, cfg.decay_every), opt);
    unpack(theta, current);
  }

  unpack(best, r.model);
  if (r.loss_curve.empty()) {
    best_loss = trajectory_loss(cfg.variant,
                                simulate(r.model, p.initial, static_cast<int>(p.targets.days()) - 1,
                                         cfg.integrator)
                                    .states,
                                p.targets)
                    .total;
  }
  r.final_loss = best_loss;
  finish(r, observed, p, start);
  return r;
}

}  // namespace detail

/// Effect-network fit: beta_eff(t) = beta* * Eff(Z(t) / N), trained with Adam
/// on exact unrolled gradients.
inline FitResult train_dde(const ObservedSeries& observed, TrainingConfig cfg) {
  cfg.method = Method::DDE;
  return detail::gradient_fit(observed, cfg, true);
}

/// Constant rates trained by the same gradient machinery (beta_eff = beta*).
inline FitResult fit_constant_gradient(const ObservedSeries& observed, TrainingConfig cfg) {
  cfg.method = Method::ConstGrad;
  return detail::gradient_fit(observed, cfg, false);
}

/// Constant rates minimized by Nelder-Mead; rates are clamped to [0, 1]
/// inside the objective. `cfg.iterations` caps the simplex iterations.
inline FitResult nelder_mead_fit(const ObservedSeries& observed, TrainingConfig cfg) {
  cfg.method = Method::NelderMead;
  const auto start = std::chrono::steady_clock::now();
  detail::Prepared p = detail::prepare(observed, cfg);

  FitResult r;
  r.method = Method::NelderMead;
  r.variant = cfg.variant;
  r.config = cfg;
  r.model.params = p.params;

  const int days = static_cast<int>(p.targets.days()) - 1;
  auto clamp_rates = [](std::span<const double> x) {
    std::vector<double> c(x.begin(), x.end());
    for (double& v : c) v = std::clamp(v, 0.0, 1.0);
    return c;
  };
  auto objective = [&](std::span<const double> x) {
    RateParameters params = p.params;
    params.assign(clamp_rates(x));
    try {
      auto traj = integrate(cfg.variant, p.initial, params, days, cfg.integrator);
      return trajectory_loss(cfg.variant, traj.states, p.targets).total;
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  NelderMeadOptions opt = cfg.nelder_mead;
  opt.max_iterations = cfg.iterations;
  NelderMeadResult nm = nelder_mead(objective, p.params.to_vector(), opt);

  r.model.params.assign(clamp_rates(nm.x));
  r.loss_curve = nm.best_per_iteration;
  r.best_iteration = r.loss_curve.empty() ? 0 : r.loss_curve.size() - 1;
  r.final_loss = nm.value;
  r.diverged = !std::isfinite(nm.value);
  if (r.diverged) r.divergence = "no finite loss found by the simplex search";
  detail::finish(r, observed, p, start);
  return r;
}

inline FitResult fit(const ObservedSeries& observed, const TrainingConfig& cfg) {
  switch (cfg.method) {
    case Method::DDE: return train_dde(observed, cfg);
    case Method::ConstGrad: return fit_constant_gradient(observed, cfg);
    case Method::NelderMead: return nelder_mead_fit(observed, cfg);
  }
  throw ConfigError("unknown method");
}

}  // namespace dde
