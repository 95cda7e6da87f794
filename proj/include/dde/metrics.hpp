#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "dde/errors.hpp"

namespace dde {

inline void check_lengths(std::span<const double> a, std::span<const double> b,
                          std::size_t minimum) {
  if (a.size() != b.size()) {
    throw DataError("series lengths differ (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  if (a.size() < minimum) {
    throw DataError("series needs at least " + std::to_string(minimum) + " points");
  }
}

/// Mean squared error with counts expressed in units of ten thousand people.
inline double mse_ten_thousand(std::span<const double> pred, std::span<const double> obs) {
  check_lengths(pred, obs, 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = (pred[i] - obs[i]) / 1e4;
    sum += e * e;
  }
  return sum / static_cast<double>(pred.size());
}

/// Sample Pearson correlation; nullopt when either series has zero variance.
inline std::optional<double> pearson(std::span<const double> pred, std::span<const double> obs) {
  check_lengths(pred, obs, 2);
  const double n = static_cast<double>(pred.size());
  double mean_p = 0.0, mean_o = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mean_p += pred[i];
    mean_o += obs[i];
  }
  mean_p /= n;
  mean_o /= n;
  double spp = 0.0, soo = 0.0, spo = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dp = pred[i] - mean_p;
    const double d_o = obs[i] - mean_o;
    spp += dp * dp;
    soo += d_o * d_o;
    spo += dp * d_o;
  }
  if (spp == 0.0 || soo == 0.0) return std::nullopt;
  const double r = spo / std::sqrt(spp * soo);
  return std::fmax(-1.0, std::fmin(1.0, r));
}

struct SeriesMetrics {
  double mse_1e4 = 0.0;
  std::optional<double> pearson;
};

/// Test-window scores for the infected, recovered and dead series. A series
/// that the variant does not model is left empty (deaths for SIR/SEIR).
struct EvaluationReport {
  std::optional<SeriesMetrics> infected;
  std::optional<SeriesMetrics> recovered;
  std::optional<SeriesMetrics> deaths;
  double mean_mse_1e4 = 0.0;
  std::optional<double> mean_pearson;  // over defined per-series values
  std::size_t undefined_pearson = 0;
  int first_day = 0;
  int last_day = 0;
};

inline SeriesMetrics score_series(std::span<const double> pred, std::span<const double> obs) {
  SeriesMetrics m;
  m.mse_1e4 = mse_ten_thousand(pred, obs);
  if (pred.size() >= 2) m.pearson = pearson(pred, obs);
  return m;
}

/// Fills the aggregate fields from the per-series entries.
inline void aggregate(EvaluationReport& report) {
  double mse = 0.0, corr = 0.0;
  std::size_t series = 0, defined = 0;
  report.undefined_pearson = 0;
  for (const auto* s : {&report.infected, &report.recovered, &report.deaths}) {
    if (!s->has_value()) continue;
    ++series;
    mse += (*s)->mse_1e4;
    if ((*s)->pearson) {
      ++defined;
      corr += *(*s)->pearson;
    } else {
      ++report.undefined_pearson;
    }
  }
  report.mean_mse_1e4 = series ? mse / static_cast<double>(series) : 0.0;
  report.mean_pearson = defined ? std::optional<double>(corr / static_cast<double>(defined))
                                : std::nullopt;
}

}  // namespace dde
