#pragma once

// Compartmental model variants (SIR, SEIR, SIRD, SEIRD, SMCRD, SEMCRD),
// their state layouts, rate sets and right-hand-side vector fields.
//
// Every variant is described as a list of flows between compartments. A flow
// removes mass from one compartment and adds it to another, so conservation of
// the total population holds structurally.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dde/errors.hpp"

namespace dde {

enum class Variant { SIR, SEIR, SIRD, SEIRD, SMCRD, SEMCRD };

enum class Compartment { S, E, I, M, C, R, D };

enum class Rate { Beta, Gamma, Delta, Delta1, Delta2, Alpha, Epsilon };

inline constexpr std::size_t kRateCount = 7;

inline constexpr std::array<Variant, 6> kAllVariants = {
    Variant::SIR, Variant::SEIR, Variant::SIRD, Variant::SEIRD, Variant::SMCRD, Variant::SEMCRD};

/// One transfer between compartments. Infection flows have magnitude
/// beta_eff * S * X / N where X is the `infectious` compartment; linear flows
/// have magnitude rate * Z[from].
struct Flow {
  std::size_t from;
  std::size_t to;
  Rate rate;
  bool infection;
  std::size_t infectious;
};

namespace detail {

struct VariantSpec {
  std::string_view name;
  std::span<const Compartment> layout;
  std::span<const Rate> rates;
  std::span<const Flow> flows;
};

using C = Compartment;

inline constexpr std::array<C, 3> kSirLayout = {C::S, C::I, C::R};
inline constexpr std::array<C, 4> kSeirLayout = {C::S, C::E, C::I, C::R};
inline constexpr std::array<C, 4> kSirdLayout = {C::S, C::I, C::R, C::D};
inline constexpr std::array<C, 5> kSeirdLayout = {C::S, C::E, C::I, C::R, C::D};
inline constexpr std::array<C, 5> kSmcrdLayout = {C::S, C::M, C::C, C::R, C::D};
inline constexpr std::array<C, 6> kSemcrdLayout = {C::S, C::E, C::M, C::C, C::R, C::D};

inline constexpr std::array<Rate, 2> kSirRates = {Rate::Beta, Rate::Delta};
inline constexpr std::array<Rate, 3> kSeirRates = {Rate::Beta, Rate::Gamma, Rate::Delta};
inline constexpr std::array<Rate, 3> kSirdRates = {Rate::Beta, Rate::Delta, Rate::Epsilon};
inline constexpr std::array<Rate, 4> kSeirdRates = {Rate::Beta, Rate::Gamma, Rate::Delta,
                                                    Rate::Epsilon};
inline constexpr std::array<Rate, 5> kSmcrdRates = {Rate::Beta, Rate::Delta1, Rate::Delta2,
                                                    Rate::Alpha, Rate::Epsilon};
inline constexpr std::array<Rate, 6> kSemcrdRates = {Rate::Beta,   Rate::Gamma, Rate::Delta1,
                                                     Rate::Delta2, Rate::Alpha, Rate::Epsilon};

// Indices below refer to positions in the matching layout.
inline constexpr std::array<Flow, 2> kSirFlows = {{
    {0, 1, Rate::Beta, true, 1},
    {1, 2, Rate::Delta, false, 0},
}};
inline constexpr std::array<Flow, 3> kSeirFlows = {{
    {0, 1, Rate::Beta, true, 2},
    {1, 2, Rate::Gamma, false, 0},
    {2, 3, Rate::Delta, false, 0},
}};
inline constexpr std::array<Flow, 3> kSirdFlows = {{
    {0, 1, Rate::Beta, true, 1},
    {1, 2, Rate::Delta, false, 0},
    {1, 3, Rate::Epsilon, false, 0},
}};
inline constexpr std::array<Flow, 4> kSeirdFlows = {{
    {0, 1, Rate::Beta, true, 2},
    {1, 2, Rate::Gamma, false, 0},
    {2, 3, Rate::Delta, false, 0},
    {2, 4, Rate::Epsilon, false, 0},
}};
// Only mild cases transmit; deaths come from critical cases only.
inline constexpr std::array<Flow, 5> kSmcrdFlows = {{
    {0, 1, Rate::Beta, true, 1},
    {1, 2, Rate::Alpha, false, 0},
    {1, 3, Rate::Delta1, false, 0},
    {2, 3, Rate::Delta2, false, 0},
    {2, 4, Rate::Epsilon, false, 0},
}};
inline constexpr std::array<Flow, 6> kSemcrdFlows = {{
    {0, 1, Rate::Beta, true, 2},
    {1, 2, Rate::Gamma, false, 0},
    {2, 3, Rate::Alpha, false, 0},
    {2, 4, Rate::Delta1, false, 0},
    {3, 4, Rate::Delta2, false, 0},
    {3, 5, Rate::Epsilon, false, 0},
}};

inline constexpr VariantSpec spec(Variant v) {
  switch (v) {
    case Variant::SIR: return {"SIR", kSirLayout, kSirRates, kSirFlows};
    case Variant::SEIR: return {"SEIR", kSeirLayout, kSeirRates, kSeirFlows};
    case Variant::SIRD: return {"SIRD", kSirdLayout, kSirdRates, kSirdFlows};
    case Variant::SEIRD: return {"SEIRD", kSeirdLayout, kSeirdRates, kSeirdFlows};
    case Variant::SMCRD: return {"SMCRD", kSmcrdLayout, kSmcrdRates, kSmcrdFlows};
    case Variant::SEMCRD: return {"SEMCRD", kSemcrdLayout, kSemcrdRates, kSemcrdFlows};
  }
  return {"SIR", kSirLayout, kSirRates, kSirFlows};
}

}  // namespace detail

inline constexpr std::size_t dimension(Variant v) { return detail::spec(v).layout.size(); }

inline constexpr std::span<const Compartment> layout(Variant v) { return detail::spec(v).layout; }

/// Active rates in canonical order; beta always comes first.
inline constexpr std::span<const Rate> active_rates(Variant v) { return detail::spec(v).rates; }

inline constexpr std::span<const Flow> flows(Variant v) { return detail::spec(v).flows; }

inline constexpr std::string_view to_string(Variant v) { return detail::spec(v).name; }

inline constexpr std::string_view to_string(Compartment c) {
  constexpr std::array<std::string_view, 7> names = {"S", "E", "I", "M", "C", "R", "D"};
  return names[static_cast<std::size_t>(c)];
}

inline constexpr std::string_view to_string(Rate r) {
  constexpr std::array<std::string_view, kRateCount> names = {
      "beta", "gamma", "delta", "delta1", "delta2", "alpha", "epsilon"};
  return names[static_cast<std::size_t>(r)];
}

inline Variant parse_variant(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Variant v : kAllVariants) {
    std::string name(to_string(v));
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (name == lower) return v;
  }
  throw ConfigError("unknown model variant '" + std::string(text) + "'");
}

inline std::optional<Rate> parse_rate(std::string_view text) {
  for (std::size_t i = 0; i < kRateCount; ++i) {
    if (to_string(static_cast<Rate>(i)) == text) return static_cast<Rate>(i);
  }
  return std::nullopt;
}

inline std::optional<std::size_t> index_of(Variant v, Compartment c) {
  auto l = layout(v);
  auto it = std::find(l.begin(), l.end(), c);
  if (it == l.end()) return std::nullopt;
  return static_cast<std::size_t>(it - l.begin());
}

inline bool has_exposed(Variant v) { return index_of(v, Compartment::E).has_value(); }
inline bool has_mild_critical(Variant v) { return index_of(v, Compartment::M).has_value(); }
inline bool has_deaths(Variant v) { return index_of(v, Compartment::D).has_value(); }

/// Population counts of one variant at one day.
struct CompartmentState {
  std::vector<double> values;
  int day = 0;

  double total() const {
    double sum = 0.0;
    for (double x : values) sum += x;
    return sum;
  }
  bool operator==(const CompartmentState&) const = default;
};

/// Epidemiological rates of one variant. Rates outside the variant's active
/// set cannot be read or written.
class RateParameters {
 public:
  RateParameters() = default;
  RateParameters(Variant variant, double population) : variant_(variant), population_(population) {}

  Variant variant() const { return variant_; }
  double population() const { return population_; }
  void set_population(double n) { population_ = n; }

  bool is_active(Rate r) const {
    auto rates = active_rates(variant_);
    return std::find(rates.begin(), rates.end(), r) != rates.end();
  }

  double get(Rate r) const {
    require_active(r);
    return values_[static_cast<std::size_t>(r)];
  }

  void set(Rate r, double value) {
    require_active(r);
    values_[static_cast<std::size_t>(r)] = value;
  }

  /// Active rates packed in canonical order.
  std::vector<double> to_vector() const {
    std::vector<double> out;
    for (Rate r : active_rates(variant_)) out.push_back(values_[static_cast<std::size_t>(r)]);
    return out;
  }

  void assign(std::span<const double> packed) {
    auto rates = active_rates(variant_);
    if (packed.size() != rates.size()) {
      throw StructuralError("rate vector has " + std::to_string(packed.size()) +
                            " entries, variant " + std::string(to_string(variant_)) + " needs " +
                            std::to_string(rates.size()));
    }
    for (std::size_t i = 0; i < rates.size(); ++i) {
      values_[static_cast<std::size_t>(rates[i])] = packed[i];
    }
  }

  /// Throws ConfigError unless every active rate is in [0, 1] and N > 0.
  void validate() const {
    if (!(population_ > 0.0) || !std::isfinite(population_)) {
      throw ConfigError("population must be positive");
    }
    for (Rate r : active_rates(variant_)) {
      double x = values_[static_cast<std::size_t>(r)];
      if (!(x >= 0.0 && x <= 1.0)) {
        throw ConfigError("rate " + std::string(to_string(r)) + " = " + std::to_string(x) +
                          " outside [0, 1]");
      }
    }
  }

  bool operator==(const RateParameters&) const = default;

 private:
  void require_active(Rate r) const {
    if (!is_active(r)) {
      throw StructuralError("rate " + std::string(to_string(r)) + " is not part of variant " +
                            std::string(to_string(variant_)));
    }
  }

  Variant variant_ = Variant::SIR;
  double population_ = 1.0;
  std::array<double, kRateCount> values_{};
};

/// Initial-state split of the first observed infections.
struct SplitConfig {
  double e0_ratio = 1.0;       // E0 = e0_ratio * I0
  double mild_fraction = 0.9;  // M0 = mild_fraction * I0, C0 = rest
};

namespace detail {

inline void check_dimension(Variant v, std::size_t n) {
  if (n != dimension(v)) {
    throw StructuralError("state has " + std::to_string(n) + " compartments, " +
                          std::string(to_string(v)) + " needs " + std::to_string(dimension(v)));
  }
}

inline double flow_magnitude(const Flow& f, std::span<const double> z, double rate, double inv_n) {
  return f.infection ? rate * z[f.from] * z[f.infectious] * inv_n : rate * z[f.from];
}

}  // namespace detail

/// dZ/dt written into `out`. The infection term uses `beta_eff`; the stored
/// beta of `params` is ignored here.
inline void vector_field(Variant variant, std::span<const double> state,
                         const RateParameters& params, double beta_eff, std::span<double> out) {
  detail::check_dimension(variant, state.size());
  detail::check_dimension(variant, out.size());
  std::fill(out.begin(), out.end(), 0.0);
  const double inv_n = 1.0 / params.population();
  for (const Flow& f : flows(variant)) {
    const double rate = f.infection ? beta_eff : params.get(f.rate);
    const double magnitude = detail::flow_magnitude(f, state, rate, inv_n);
    out[f.from] -= magnitude;
    out[f.to] += magnitude;
  }
}

inline std::vector<double> vector_field(Variant variant, const CompartmentState& state,
                                        const RateParameters& params, double beta_eff) {
  std::vector<double> out(state.values.size());
  vector_field(variant, state.values, params, beta_eff, out);
  return out;
}

/// Cotangents of a vector-field evaluation: given g = dL/d(dZ/dt), the
/// contributions to dL/dZ, dL/d(rate) for each active rate (indexed by Rate)
/// and dL/d(beta_eff).
struct VectorFieldCotangent {
  std::vector<double> state;
  std::array<double, kRateCount> rates{};
  double beta_eff = 0.0;
};

/// Accumulates g^T dF/dZ, g^T dF/dtheta and g^T dF/dbeta_eff into `acc`.
inline void vector_field_vjp(Variant variant, std::span<const double> state,
                             const RateParameters& params, double beta_eff,
                             std::span<const double> g, VectorFieldCotangent& acc) {
  const double inv_n = 1.0 / params.population();
  for (const Flow& f : flows(variant)) {
    const double w = g[f.to] - g[f.from];
    if (f.infection) {
      const double s = state[f.from];
      const double x = state[f.infectious];
      acc.state[f.from] += w * beta_eff * x * inv_n;
      acc.state[f.infectious] += w * beta_eff * s * inv_n;
      acc.beta_eff += w * s * x * inv_n;
    } else {
      const double rate = params.get(f.rate);
      acc.state[f.from] += w * rate;
      acc.rates[static_cast<std::size_t>(f.rate)] += w * state[f.from];
    }
  }
}

/// Builds Z0 from the first observation (I0, R0, D0). For SIR/SEIR the
/// removed compartment receives R0 + D0.
inline CompartmentState initial_state(Variant variant, double i0, double r0, double d0,
                                      const RateParameters& params, const SplitConfig& split) {
  const double n = params.population();
  if (i0 < 0 || r0 < 0 || d0 < 0) throw DataError("initial observation has negative counts");
  if (split.e0_ratio < 0) throw ConfigError("e0_ratio must be non-negative");
  if (split.mild_fraction < 0 || split.mild_fraction > 1) {
    throw ConfigError("mild_fraction must lie in [0, 1]");
  }

  CompartmentState z;
  z.values.assign(dimension(variant), 0.0);
  double occupied = 0.0;
  auto put = [&](Compartment c, double value) {
    if (auto idx = index_of(variant, c)) {
      z.values[*idx] = value;
      occupied += value;
    }
  };
  if (has_exposed(variant)) put(Compartment::E, split.e0_ratio * i0);
  if (has_mild_critical(variant)) {
    put(Compartment::M, split.mild_fraction * i0);
    put(Compartment::C, (1.0 - split.mild_fraction) * i0);
  } else {
    put(Compartment::I, i0);
  }
  if (has_deaths(variant)) {
    put(Compartment::R, r0);
    put(Compartment::D, d0);
  } else {
    put(Compartment::R, r0 + d0);
  }
  const double s0 = n - occupied;
  if (s0 < 0) {
    throw InfeasibleInitError("initial susceptible count is negative (" + std::to_string(s0) +
                              "); population too small for the first observation");
  }
  z.values[0] = s0;
  return z;
}

/// Predicted active infections: I, or M + C for the mild/critical variants.
inline double predicted_infected(Variant v, std::span<const double> z) {
  if (has_mild_critical(v)) return z[*index_of(v, Compartment::M)] + z[*index_of(v, Compartment::C)];
  return z[*index_of(v, Compartment::I)];
}

}  // namespace dde
