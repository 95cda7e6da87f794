#pragma once

// Adam with a step-decay learning rate schedule, and the Nelder-Mead simplex
// method.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "dde/errors.hpp"

namespace dde {

/// base_lr * decay^floor(iteration / every).
inline double lr_schedule(double base_lr, int iteration, double decay = 0.95, int every = 400) {
  if (iteration < 0) throw ConfigError("iteration must be non-negative");
  return base_lr * std::pow(decay, iteration / every);
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Leading entries projected onto [lower, upper] after each update.
  std::size_t bounded_prefix = 0;
  double lower = 0.0;
  double upper = 1.0;
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                      double lr, const AdamOptions& opt = {}) {
  if (params.size() != grads.size()) throw StructuralError("parameter/gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw StructuralError("optimizer state size mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * grads[i];
    state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
  }
  for (std::size_t i = 0; i < std::min(opt.bounded_prefix, params.size()); ++i) {
    params[i] = std::clamp(params[i], opt.lower, opt.upper);
  }
}

struct NelderMeadOptions {
  int max_iterations = 2000;
  double x_tolerance = 1e-8;  // max |x_i - x_best| over the simplex
  double f_tolerance = 1e-8;  // max |f_i - f_best| over the simplex
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> best_per_iteration;
};

/// Minimizes `f` from `x0`. The initial simplex perturbs each coordinate by
/// 5% (0.00025 for zero coordinates). Stops when both the vertex spread and
/// the value spread fall below tolerance, or after max_iterations.
template <class Objective>
NelderMeadResult nelder_mead(Objective&& f, std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  if (n == 0) throw ConfigError("Nelder-Mead needs at least one dimension");
  NelderMeadResult result;
  auto eval = [&](const std::vector<double>& x) {
    ++result.evaluations;
    const double v = f(std::span<const double>(x));
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) {
    double& c = simplex[i + 1][i];
    c = c != 0.0 ? 1.05 * c : 0.00025;
  }
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<std::vector<double>> s(n + 1);
    std::vector<double> v(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      s[i] = std::move(simplex[order[i]]);
      v[i] = values[order[i]];
    }
    simplex = std::move(s);
    values = std::move(v);
  };
  auto converged = [&] {
    double dx = 0.0, df = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      df = std::max(df, std::fabs(values[i] - values[0]));
      for (std::size_t j = 0; j < n; ++j) dx = std::max(dx, std::fabs(simplex[i][j] - simplex[0][j]));
    }
    return dx <= opt.x_tolerance && df <= opt.f_tolerance;
  };
  auto affine = [&](double t, const std::vector<double>& toward, std::vector<double>& out) {
    // centroid + t * (toward - centroid)
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (toward[j] - centroid[j]);
  };

  sort_simplex();
  while (result.iterations < opt.max_iterations) {
    if (converged()) {
      result.converged = true;
      break;
    }
    ++result.iterations;
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    auto& worst = simplex[n];
    affine(-opt.reflection, worst, trial);
    const double fr = eval(trial);
    if (fr < values[0]) {
      affine(-opt.reflection * opt.expansion, worst, trial2);
      const double fe = eval(trial2);
      if (fe < fr) {
        worst = trial2;
        values[n] = fe;
      } else {
        worst = trial;
        values[n] = fr;
      }
    } else if (fr < values[n - 1]) {
      worst = trial;
      values[n] = fr;
    } else {
      bool do_shrink = false;
      if (fr < values[n]) {
        affine(-opt.reflection * opt.contraction, worst, trial2);  // outside contraction
        const double fc = eval(trial2);
        if (fc <= fr) {
          worst = trial2;
          values[n] = fc;
        } else {
          do_shrink = true;
        }
      } else {
        affine(opt.contraction, worst, trial2);  // inside contraction
        const double fc = eval(trial2);
        if (fc < values[n]) {
          worst = trial2;
          values[n] = fc;
        } else {
          do_shrink = true;
        }
      }
      if (do_shrink) {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            simplex[i][j] = simplex[0][j] + opt.shrink * (simplex[i][j] - simplex[0][j]);
          }
          values[i] = eval(simplex[i]);
        }
      }
    }
    sort_simplex();
    result.best_per_iteration.push_back(values[0]);
  }
  if (!result.converged) result.converged = converged();
  result.x = simplex[0];
  result.value = values[0];
  return result;
}

}  // namespace dde
