#pragma once

// Log-space trajectory loss. Per day t:
//   (1/3) * [ (ln(I_t+1) - ln(Î_t+1))^2 + (ln(R_t+1) - ln(R̂_t+1))^2 + (ln(D_t+1) - ln(D̂_t+1))^2 ]
// averaged over the observed days. Î is M̂ + Ĉ for the mild/critical variants.
// Variants without a death compartment compare their removed compartment
// against observed recoveries plus deaths and carry no death term.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dde/compartments.hpp"
#include "dde/data.hpp"
#include "dde/errors.hpp"
#include "dde/integrator.hpp"

namespace dde {

struct LossValue {
  double total = 0.0;
  double infection = 0.0;  // day-averaged (1/3) * infection term
  double recovery = 0.0;
  double death = 0.0;
  std::vector<double> per_day;
};

/// Observed targets in the variant's frame, one entry per day.
struct LossTargets {
  std::vector<double> infected;
  std::vector<double> recovered;
  std::vector<double> deaths;  // empty when the variant has no D

  std::size_t days() const { return infected.size(); }
};

inline LossTargets loss_targets(Variant v, const ObservedSeries& observed) {
  LossTargets t;
  t.infected = observed.active_infected;
  if (has_deaths(v)) {
    t.recovered = observed.recovered;
    t.deaths = observed.deaths;
  } else {
    t.recovered.resize(observed.size());
    for (std::size_t i = 0; i < observed.size(); ++i) {
      t.recovered[i] = observed.recovered[i] + observed.deaths[i];
    }
  }
  return t;
}

/// Indices of the predicted recovered and dead compartments.
struct OutputIndices {
  std::size_t recovered;
  std::optional<std::size_t> deaths;
};

inline OutputIndices output_indices(Variant v) {
  return {*index_of(v, Compartment::R), index_of(v, Compartment::D)};
}

namespace detail {

inline double checked_prediction(double x, const char* what, std::size_t day) {
  if (!std::isfinite(x) || x < 0.0) {
    throw NumericError(std::string("invalid predicted ") + what + " on day " +
                       std::to_string(day) + ": " + std::to_string(x));
  }
  return x;
}

inline double log_residual(double obs, double pred) { return std::log(obs + 1.0) - std::log(pred + 1.0); }

}  // namespace detail

/// Loss of `states` (one per day, starting at observed day 0) against the
/// targets.
inline LossValue trajectory_loss(Variant variant, std::span<const CompartmentState> states,
                                 const LossTargets& targets) {
  const std::size_t days = targets.days();
  if (days == 0) throw DataError("no observed days for the loss");
  if (states.size() < days) {
    throw StructuralError("trajectory covers " + std::to_string(states.size()) +
                          " days, observations need " + std::to_string(days));
  }
  const auto idx = output_indices(variant);
  LossValue loss;
  loss.per_day.resize(days);
  for (std::size_t t = 0; t < days; ++t) {
    const auto& z = states[t].values;
    detail::check_dimension(variant, z.size());
    const double i_hat = detail::checked_prediction(predicted_infected(variant, z), "infected", t);
    const double r_hat = detail::checked_prediction(z[idx.recovered], "recovered", t);
    const double ui = detail::log_residual(targets.infected[t], i_hat);
    const double ur = detail::log_residual(targets.recovered[t], r_hat);
    double ud = 0.0;
    if (idx.deaths) {
      const double d_hat = detail::checked_prediction(z[*idx.deaths], "deaths", t);
      ud = detail::log_residual(targets.deaths[t], d_hat);
    }
    loss.infection += ui * ui / 3.0;
    loss.recovery += ur * ur / 3.0;
    loss.death += ud * ud / 3.0;
    loss.per_day[t] = (ui * ui + ur * ur + ud * ud) / 3.0;
  }
  const double inv_days = 1.0 / static_cast<double>(days);
  loss.infection *= inv_days;
  loss.recovery *= inv_days;
  loss.death *= inv_days;
  double sum = 0.0;
  for (double x : loss.per_day) sum += x;
  loss.total = sum * inv_days;
  return loss;
}

inline LossValue trajectory_loss(const Trajectory& predicted, const ObservedSeries& observed) {
  return trajectory_loss(predicted.variant, predicted.states,
                         loss_targets(predicted.variant, observed));
}

/// Adds dLoss/dZ for day `t` (with `days` observed days) into `grad`.
inline void accumulate_loss_gradient(Variant variant, std::span<const double> z,
                                     const LossTargets& targets, std::size_t t,
                                     std::span<double> grad) {
  const double scale = 2.0 / (3.0 * static_cast<double>(targets.days()));
  auto dterm = [&](double obs, double pred) {
    return -scale * detail::log_residual(obs, pred) / (pred + 1.0);
  };
  const auto idx = output_indices(variant);
  const double gi = dterm(targets.infected[t], predicted_infected(variant, z));
  if (has_mild_critical(variant)) {
    grad[*index_of(variant, Compartment::M)] += gi;
    grad[*index_of(variant, Compartment::C)] += gi;
  } else {
    grad[*index_of(variant, Compartment::I)] += gi;
  }
  grad[idx.recovered] += dterm(targets.recovered[t], z[idx.recovered]);
  if (idx.deaths) grad[*idx.deaths] += dterm(targets.deaths[t], z[*idx.deaths]);
}

}  // namespace dde
