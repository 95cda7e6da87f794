#pragma once

// Exact gradients of the trajectory loss with respect to the epidemiological
// rates and the effect-network parameters.
//
// The forward pass unrolls fixed-step Euler integration and keeps every
// substep state. The reverse pass carries the adjoint a_n = dL/dZ_n backward:
//   g   = a_{n+1} with clamped components zeroed
//   a_n = g + dt * g^T dF/dZ + dt * (g^T dF/dbeta_eff) * dbeta_eff/dZ
// picking up the loss sensitivity at every observed day boundary and
// accumulating dt * g^T dF/dtheta into the rate gradients. This is the
// discrete counterpart of the continuous adjoint equations and is the exact
// derivative of the computed loss.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dde/compartments.hpp"
#include "dde/effect_net.hpp"
#include "dde/errors.hpp"
#include "dde/integrator.hpp"
#include "dde/loss.hpp"

namespace dde {

struct ParameterGradients {
  Variant variant = Variant::SIR;
  std::array<double, kRateCount> rates{};  // indexed by Rate; only active entries are meaningful
  std::optional<NetworkGradients> network;

  double rate(Rate r) const { return rates[static_cast<std::size_t>(r)]; }

  /// Active rate gradients in canonical order, then network gradients.
  std::vector<double> flatten() const {
    std::vector<double> out;
    for (Rate r : active_rates(variant)) out.push_back(rate(r));
    if (network) {
      auto net = network->flatten();
      out.insert(out.end(), net.begin(), net.end());
    }
    return out;
  }
};

struct GradientResult {
  LossValue loss;
  ParameterGradients gradients;
};

/// Loss and gradients for one parameter set. With `net == nullptr` the
/// infection rate is the constant beta of `params`; otherwise it is
/// beta * Eff(Z / N). Requires the Euler scheme.
inline GradientResult fit_gradients(Variant variant, const CompartmentState& initial,
                                    const RateParameters& params, const EffectNetwork* net,
                                    const LossTargets& targets, const IntegratorConfig& config) {
  config.validate();
  if (config.scheme != Scheme::Euler) {
    throw ConfigError("gradient computation requires the euler integrator");
  }
  detail::check_dimension(variant, initial.values.size());
  if (params.variant() != variant) throw StructuralError("parameters belong to another variant");
  const std::size_t days = targets.days();
  if (days == 0) throw DataError("no observed days for the loss");
  if (net && net->input_size() != dimension(variant) - 1) {
    throw StructuralError("effect network input size does not match the variant");
  }

  const std::size_t dim = initial.values.size();
  const int k = config.substeps_per_day;
  const double dt = config.step_size();
  const std::size_t steps = (days - 1) * static_cast<std::size_t>(k);
  const double beta_star = params.get(Rate::Beta);
  const double population = params.population();

  // Forward pass. Arithmetic mirrors euler_step so the loss matches a
  // separate integrate() call bit for bit.
  std::vector<std::vector<double>> z(steps + 1);
  std::vector<std::vector<unsigned char>> clamped(steps + 1);
  std::vector<double> beta_eff(steps), effect(steps);
  std::vector<ForwardCache> caches(net ? steps : 0);
  std::vector<double> input, f(dim);
  z[0] = initial.values;
  for (std::size_t n = 0; n < steps; ++n) {
    const auto& cur = z[n];
    if (net) {
      network_input(cur, population, input);
      effect[n] = forward(*net, input, caches[n]);
      beta_eff[n] = beta_star * effect[n];
    } else {
      effect[n] = 1.0;
      beta_eff[n] = beta_star;
    }
    vector_field(variant, cur, params, beta_eff[n], f);
    detail::check_finite(variant, f);
    auto& next = z[n + 1];
    next = cur;
    clamped[n + 1].assign(dim, 0);
    for (std::size_t i = 0; i < dim; ++i) {
      next[i] += dt * f[i];
      if (next[i] < 0.0) {
        next[i] = 0.0;
        clamped[n + 1][i] = 1;
      }
    }
  }

  std::vector<CompartmentState> daily(days);
  for (std::size_t d = 0; d < days; ++d) {
    daily[d].values = z[d * static_cast<std::size_t>(k)];
    daily[d].day = initial.day + static_cast<int>(d);
  }
  GradientResult result;
  result.loss = trajectory_loss(variant, daily, targets);

  // Reverse pass.
  ParameterGradients& grads = result.gradients;
  grads.variant = variant;
  if (net) grads.network = zero_gradients(*net);
  std::vector<double> adjoint(dim, 0.0), g(dim), g_dt(dim);
  VectorFieldCotangent cot;
  accumulate_loss_gradient(variant, z[steps], targets, days - 1, adjoint);
  for (std::size_t n = steps; n-- > 0;) {
    for (std::size_t i = 0; i < dim; ++i) g[i] = clamped[n + 1][i] ? 0.0 : adjoint[i];
    cot.state.assign(dim, 0.0);
    cot.rates.fill(0.0);
    cot.beta_eff = 0.0;
    for (std::size_t i = 0; i < dim; ++i) g_dt[i] = dt * g[i];
    vector_field_vjp(variant, z[n], params, beta_eff[n], g_dt, cot);
    for (std::size_t i = 0; i < dim; ++i) adjoint[i] = g[i] + cot.state[i];
    for (Rate r : active_rates(variant)) {
      if (r != Rate::Beta) grads.rates[static_cast<std::size_t>(r)] += cot.rates[static_cast<std::size_t>(r)];
    }
    if (net) {
      grads.rates[static_cast<std::size_t>(Rate::Beta)] += cot.beta_eff * effect[n];
      auto& ng = *grads.network;
      std::fill(ng.input_gradient.begin(), ng.input_gradient.end(), 0.0);
      backward_accumulate(*net, caches[n], cot.beta_eff * beta_star, ng);
      for (std::size_t i = 1; i < dim; ++i) adjoint[i] += ng.input_gradient[i - 1] / population;
    } else {
      grads.rates[static_cast<std::size_t>(Rate::Beta)] += cot.beta_eff;
    }
    if (n % static_cast<std::size_t>(k) == 0) {
      accumulate_loss_gradient(variant, z[n], targets, n / static_cast<std::size_t>(k), adjoint);
    }
  }
  if (grads.network) std::fill(grads.network->input_gradient.begin(), grads.network->input_gradient.end(), 0.0);

  for (double x : grads.flatten()) {
    if (!std::isfinite(x)) throw NumericError("non-finite gradient");
  }
  return result;
}

inline GradientResult fit_gradients(Variant variant, const CompartmentState& initial,
                                    const RateParameters& params, const EffectNetwork* net,
                                    const ObservedSeries& observed, const IntegratorConfig& config) {
  return fit_gradients(variant, initial, params, net, loss_targets(variant, observed), config);
}

}  // namespace dde
