#pragma once

// Randomized fit_gradients instances and a central finite-difference check.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "dde/effect_net.hpp"
#include "dde/gradients.hpp"
#include "dde/integrator.hpp"
#include "dde/loss.hpp"

namespace dde::testing {

struct GradientInstance {
  Variant variant = Variant::SIRD;
  CompartmentState initial;
  RateParameters params;
  std::optional<EffectNetwork> network;
  LossTargets targets;
  IntegratorConfig config{Scheme::Euler, 4};
};

/// Rates in [0.01, 0.5], network weights with std 0.01, `days` observed days.
/// Targets come from the same model with perturbed rates and mild noise.
inline GradientInstance random_instance(Variant v, std::mt19937_64& rng, int days = 10,
                                        bool with_network = true) {
  std::uniform_real_distribution<double> rate(0.01, 0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GradientInstance inst;
  inst.variant = v;
  const double n = 1e4 * (1.0 + 9.0 * unit(rng));
  inst.params = RateParameters(v, n);
  for (Rate r : active_rates(v)) inst.params.set(r, rate(rng));
  const double i0 = n * (0.01 + 0.05 * unit(rng));
  const double r0 = n * 0.01 * unit(rng);
  const double d0 = n * 0.002 * unit(rng);
  inst.initial = initial_state(v, i0, r0, d0, inst.params, {0.5 + unit(rng), 0.5 + 0.4 * unit(rng)});
  if (with_network) {
    inst.network = init_network(effect_layer_sizes(v, {8, 8}), rng());
  }

  RateParameters truth = inst.params;
  for (Rate r : active_rates(v)) truth.set(r, std::clamp(truth.get(r) * (0.7 + 0.6 * unit(rng)), 0.0, 1.0));
  auto traj = integrate(v, inst.initial, truth, days - 1, inst.config);
  const auto idx = output_indices(v);
  std::lognormal_distribution<double> noise(0.0, 0.05);
  for (const auto& s : traj.states) {
    inst.targets.infected.push_back(predicted_infected(v, s.values) * noise(rng));
    inst.targets.recovered.push_back(s.values[idx.recovered] * noise(rng));
    if (idx.deaths) inst.targets.deaths.push_back(s.values[*idx.deaths] * noise(rng));
  }
  return inst;
}

/// Loss from a plain forward integration (no gradient bookkeeping).
inline double forward_loss(const GradientInstance& inst, const RateParameters& params,
                           const EffectNetwork* net) {
  const int days = static_cast<int>(inst.targets.days()) - 1;
  Trajectory traj = net ? integrate(inst.variant, inst.initial, params,
                                    NetworkBeta(*net, params.get(Rate::Beta), params.population()),
                                    days, inst.config)
                        : integrate(inst.variant, inst.initial, params, days, inst.config);
  return trajectory_loss(inst.variant, traj.states, inst.targets).total;
}

/// The same loss evaluated independently in extended precision: Euler steps
/// with clamping, the network forward pass and the log residuals all in long
/// double. Finite differences of this function resolve gradient components
/// far below double round-off.
inline long double extended_loss(const GradientInstance& inst, const RateParameters& params,
                                 const EffectNetwork* net) {
  using R = long double;
  const Variant v = inst.variant;
  const std::size_t dim = dimension(v);
  const int k = inst.config.substeps_per_day;
  const R dt = R(1) / k;
  const R n = params.population();
  const R beta_star = params.get(Rate::Beta);

  auto effect = [&](const std::vector<R>& z) -> R {
    if (!net) return R(1);
    std::vector<R> a(z.begin() + 1, z.end());
    for (R& x : a) x /= n;
    const auto& layers = net->layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::vector<R> next(layers[l].outputs);
      for (std::size_t o = 0; o < layers[l].outputs; ++o) {
        R s = layers[l].biases[o];
        for (std::size_t i = 0; i < layers[l].inputs; ++i) s += R(layers[l].weight(o, i)) * a[i];
        next[o] = l + 1 < layers.size() ? (s >= 0 ? s : std::expm1(s)) : R(1) / (R(1) + std::exp(-s));
      }
      a = std::move(next);
    }
    return a[0];
  };

  const auto idx = output_indices(v);
  auto day_term = [&](const std::vector<R>& z, std::size_t t) {
    auto res = [](R obs, R pred) { return std::log(obs + 1) - std::log(pred + 1); };
    const R i_hat = has_mild_critical(v) ? z[*index_of(v, Compartment::M)] + z[*index_of(v, Compartment::C)]
                                         : z[*index_of(v, Compartment::I)];
    const R a = res(inst.targets.infected[t], i_hat);
    const R b = res(inst.targets.recovered[t], z[idx.recovered]);
    const R c = idx.deaths ? res(inst.targets.deaths[t], z[*idx.deaths]) : R(0);
    return (a * a + b * b + c * c) / 3;
  };

  std::vector<R> z(inst.initial.values.begin(), inst.initial.values.end()), f(dim);
  const std::size_t days = inst.targets.days();
  R total = day_term(z, 0);
  for (std::size_t d = 1; d < days; ++d) {
    for (int s = 0; s < k; ++s) {
      const R beta = beta_star * effect(z);
      std::fill(f.begin(), f.end(), R(0));
      for (const Flow& fl : flows(v)) {
        const R m = fl.infection ? beta * z[fl.from] * z[fl.infectious] / n
                                 : R(params.get(fl.rate)) * z[fl.from];
        f[fl.from] -= m;
        f[fl.to] += m;
      }
      for (std::size_t i = 0; i < dim; ++i) z[i] = std::max(R(0), z[i] + dt * f[i]);
    }
    total += day_term(z, d);
  }
  return total / static_cast<R>(days);
}

struct FiniteDifferenceReport {
  std::size_t components = 0;
  std::size_t failures = 0;
  double worst_relative_error = 0.0;
};

/// Compares every component of fit_gradients against central differences of
/// extended_loss with step h, relative error denominator max(|a|, |b|, floor).
inline FiniteDifferenceReport check_gradients(const GradientInstance& inst, double h = 1e-5,
                                              double tolerance = 1e-4, double floor = 1e-8) {
  const EffectNetwork* net = inst.network ? &*inst.network : nullptr;
  const auto analytic =
      fit_gradients(inst.variant, inst.initial, inst.params, net, inst.targets, inst.config)
          .gradients.flatten();

  const std::size_t rate_count = active_rates(inst.variant).size();
  std::vector<double> theta = inst.params.to_vector();
  if (net) {
    auto w = net->flatten();
    theta.insert(theta.end(), w.begin(), w.end());
  }
  auto loss_at = [&](const std::vector<double>& t) {
    RateParameters p = inst.params;
    p.assign(std::span<const double>(t).first(rate_count));
    if (!net) return extended_loss(inst, p, nullptr);
    EffectNetwork n = *net;
    n.assign(std::span<const double>(t).subspan(rate_count));
    return extended_loss(inst, p, &n);
  };

  FiniteDifferenceReport report;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    auto tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    const double fd = static_cast<double>((loss_at(tp) - loss_at(tm)) / (2.0L * h));
    const double a = analytic.at(k);
    const double rel = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), floor});
    ++report.components;
    report.worst_relative_error = std::max(report.worst_relative_error, rel);
    if (!(rel <= tolerance)) ++report.failures;
  }
  return report;
}

}  // namespace dde::testing
