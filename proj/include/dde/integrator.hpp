#pragma once

// Fixed-step integration of the compartment vector fields over day-indexed
// time. Each day is split into `substeps_per_day` steps of either explicit
// Euler or classical RK4.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dde/compartments.hpp"
#include "dde/errors.hpp"

namespace dde {

enum class Scheme { Euler, RK4 };

inline std::string_view to_string(Scheme s) { return s == Scheme::Euler ? "euler" : "rk4"; }

inline Scheme parse_scheme(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "euler") return Scheme::Euler;
  if (lower == "rk4") return Scheme::RK4;
  throw ConfigError("unknown integrator '" + std::string(text) + "'");
}

struct IntegratorConfig {
  Scheme scheme = Scheme::RK4;
  int substeps_per_day = 1;

  double step_size() const { return 1.0 / substeps_per_day; }

  void validate() const {
    if (substeps_per_day < 1) throw ConfigError("substeps_per_day must be >= 1");
  }
  bool operator==(const IntegratorConfig&) const = default;
};

/// Record of negative components reset to zero after a step.
struct ClampLog {
  std::size_t events = 0;
  double max_magnitude = 0.0;

  void record(double negative_value) {
    ++events;
    max_magnitude = std::max(max_magnitude, -negative_value);
  }
};

struct Trajectory {
  Variant variant = Variant::SIR;
  std::vector<CompartmentState> states;
  ClampLog clamps;

  std::size_t days() const { return states.empty() ? 0 : states.size() - 1; }
};

/// beta_eff as a function of the current state.
struct ConstantBeta {
  double value;
  double operator()(std::span<const double>) const { return value; }
};

namespace detail {

inline void check_finite(Variant variant, std::span<const double> derivative) {
  for (std::size_t i = 0; i < derivative.size(); ++i) {
    if (!std::isfinite(derivative[i])) {
      throw NumericError("non-finite derivative in compartment " +
                         std::string(to_string(layout(variant)[i])));
    }
  }
}

inline void clamp_negative(std::span<double> z, ClampLog* log) {
  for (double& x : z) {
    if (x < 0.0) {
      if (log) log->record(x);
      x = 0.0;
    }
  }
}

}  // namespace detail

/// Z + dt * F(Z), with negative components clamped to zero.
template <class BetaFn>
CompartmentState euler_step(Variant variant, const CompartmentState& state,
                            const RateParameters& params, BetaFn&& beta_eff, double dt,
                            ClampLog* log = nullptr) {
  if (!(dt > 0.0)) throw ConfigError("step size must be positive");
  detail::check_dimension(variant, state.values.size());
  std::vector<double> f(state.values.size());
  vector_field(variant, state.values, params, beta_eff(std::span<const double>(state.values)), f);
  detail::check_finite(variant, f);
  CompartmentState next{state.values, state.day};
  for (std::size_t i = 0; i < f.size(); ++i) next.values[i] += dt * f[i];
  detail::clamp_negative(next.values, log);
  return next;
}

inline CompartmentState euler_step(Variant variant, const CompartmentState& state,
                                   const RateParameters& params, double beta_eff, double dt,
                                   ClampLog* log = nullptr) {
  return euler_step(variant, state, params, ConstantBeta{beta_eff}, dt, log);
}

/// Classical four-stage Runge-Kutta step. `beta_eff` is queried at every stage
/// state.
template <class BetaFn>
CompartmentState rk4_step(Variant variant, const CompartmentState& state,
                          const RateParameters& params, BetaFn&& beta_eff, double dt,
                          ClampLog* log = nullptr) {
  if (!(dt > 0.0)) throw ConfigError("step size must be positive");
  const std::size_t n = state.values.size();
  detail::check_dimension(variant, n);
  std::vector<double> k1(n), k2(n), k3(n), k4(n), stage(n);

  auto eval = [&](std::span<const double> z, std::span<double> k) {
    vector_field(variant, z, params, beta_eff(z), k);
    detail::check_finite(variant, k);
  };

  const auto& z = state.values;
  eval(z, k1);
  for (std::size_t i = 0; i < n; ++i) stage[i] = z[i] + 0.5 * dt * k1[i];
  eval(stage, k2);
  for (std::size_t i = 0; i < n; ++i) stage[i] = z[i] + 0.5 * dt * k2[i];
  eval(stage, k3);
  for (std::size_t i = 0; i < n; ++i) stage[i] = z[i] + dt * k3[i];
  eval(stage, k4);

  CompartmentState next{z, state.day};
  for (std::size_t i = 0; i < n; ++i) {
    next.values[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  detail::clamp_negative(next.values, log);
  return next;
}

inline CompartmentState rk4_step(Variant variant, const CompartmentState& state,
                                 const RateParameters& params, double beta_eff, double dt,
                                 ClampLog* log = nullptr) {
  return rk4_step(variant, state, params, ConstantBeta{beta_eff}, dt, log);
}

/// Integrates `days` whole days from `initial`, recording the state at every
/// integer day. States carry day indices initial.day, initial.day + 1, ...
template <class BetaFn>
Trajectory integrate(Variant variant, const CompartmentState& initial,
                     const RateParameters& params, BetaFn&& beta_eff, int days,
                     const IntegratorConfig& config) {
  if (days < 0) throw ConfigError("number of days must be non-negative");
  config.validate();
  detail::check_dimension(variant, initial.values.size());

  Trajectory traj;
  traj.variant = variant;
  traj.states.reserve(static_cast<std::size_t>(days) + 1);
  traj.states.push_back(initial);

  const double dt = config.step_size();
  CompartmentState current = initial;
  for (int d = 0; d < days; ++d) {
    try {
      for (int s = 0; s < config.substeps_per_day; ++s) {
        current = config.scheme == Scheme::Euler
                      ? euler_step(variant, current, params, beta_eff, dt, &traj.clamps)
                      : rk4_step(variant, current, params, beta_eff, dt, &traj.clamps);
      }
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at day " + std::to_string(initial.day + d));
    }
    current.day = initial.day + d + 1;
    traj.states.push_back(current);
  }
  return traj;
}

inline Trajectory integrate(Variant variant, const CompartmentState& initial,
                            const RateParameters& params, int days,
                            const IntegratorConfig& config) {
  return integrate(variant, initial, params, ConstantBeta{params.get(Rate::Beta)}, days, config);
}

}  // namespace dde
