#pragma once

// Regional case series: CSV ingestion and validation, derivation of active
// infections, train/test splitting and region configuration.
//
// CSV schema (UTF-8, LF, header required):
//   date,cumulative_cases,recovered,deaths
// with ISO-8601 dates on consecutive days.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dde/compartments.hpp"
#include "dde/errors.hpp"

namespace dde {

using Date = std::chrono::year_month_day;

inline Date parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  auto fail = [&]() -> Date { throw DataError("malformed date '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return fail();
  auto parse = [&](std::string_view part, auto& value) {
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc{} || ptr != part.data() + part.size()) fail();
  };
  parse(text.substr(0, 4), y);
  parse(text.substr(5, 2), m);
  parse(text.substr(8, 2), d);
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) return fail();
  return date;
}

inline std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

inline Date next_day(const Date& date) {
  return Date{std::chrono::sys_days{date} + std::chrono::days{1}};
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

/// One region's observed epidemic, one entry per consecutive day.
struct ObservedSeries {
  std::string region_id;
  std::vector<Date> dates;
  std::vector<double> cumulative_cases;
  std::vector<double> recovered;
  std::vector<double> deaths;
  std::vector<double> active_infected;  // cumulative - recovered - deaths
  double population = 0.0;

  std::size_t size() const { return dates.size(); }

  /// Days [first, first + count).
  ObservedSeries slice(std::size_t first, std::size_t count) const {
    if (first + count > size()) throw DataError("slice exceeds series length");
    auto cut = [&](const auto& v) {
      using V = std::decay_t<decltype(v)>;
      return V(v.begin() + static_cast<std::ptrdiff_t>(first),
               v.begin() + static_cast<std::ptrdiff_t>(first + count));
    };
    ObservedSeries s;
    s.region_id = region_id;
    s.population = population;
    s.dates = cut(dates);
    s.cumulative_cases = cut(cumulative_cases);
    s.recovered = cut(recovered);
    s.deaths = cut(deaths);
    s.active_infected = cut(active_infected);
    return s;
  }

  bool operator==(const ObservedSeries&) const = default;
};

/// Builds a validated series from raw columns; throws DataError naming the
/// first offending row (1-based data rows).
inline ObservedSeries make_series(std::string region_id, std::vector<Date> dates,
                                  std::vector<double> cumulative, std::vector<double> recovered,
                                  std::vector<double> deaths, double population) {
  const std::size_t n = dates.size();
  if (cumulative.size() != n || recovered.size() != n || deaths.size() != n) {
    throw DataError("series columns have different lengths");
  }
  if (n == 0) throw DataError("series is empty");
  ObservedSeries s;
  s.region_id = std::move(region_id);
  s.population = population;
  s.active_infected.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::string row = "row " + std::to_string(t + 1) + " (" + format_date(dates[t]) + ")";
    if (t > 0 && dates[t] != next_day(dates[t - 1])) {
      throw DataError("gap in dates: " + format_date(dates[t - 1]) + " is followed by " +
                      format_date(dates[t]) + " at " + row);
    }
    if (!std::isfinite(cumulative[t]) || !std::isfinite(recovered[t]) || !std::isfinite(deaths[t])) {
      throw DataError("non-finite count at " + row);
    }
    if (cumulative[t] < 0 || recovered[t] < 0 || deaths[t] < 0) {
      throw DataError("negative count at " + row);
    }
    if (t > 0) {
      if (cumulative[t] < cumulative[t - 1]) {
        throw DataError("cumulative_cases decreases at " + row);
      }
      if (recovered[t] < recovered[t - 1]) throw DataError("recovered decreases at " + row);
      if (deaths[t] < deaths[t - 1]) throw DataError("deaths decreases at " + row);
    }
    if (recovered[t] + deaths[t] > cumulative[t]) {
      throw DataError("recovered + deaths exceed cumulative_cases at " + row);
    }
    s.active_infected[t] = cumulative[t] - recovered[t] - deaths[t];
  }
  if (population > 0 && cumulative.back() > population) {
    throw DataError("cumulative cases exceed the population");
  }
  s.dates = std::move(dates);
  s.cumulative_cases = std::move(cumulative);
  s.recovered = std::move(recovered);
  s.deaths = std::move(deaths);
  return s;
}

inline ObservedSeries parse_region_csv(std::istream& in, double population,
                                       std::string region_id = {}) {
  std::string line;
  bool first = true;
  // Leading '#' lines carry run manifests and are skipped.
  do {
    if (!std::getline(in, line)) throw DataError("empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    first = false;
  } while (!line.empty() && line.front() == '#');
  if (line != "date,cumulative_cases,recovered,deaths") {
    throw DataError("unexpected CSV header '" + line + "'");
  }
  std::vector<Date> dates;
  std::vector<double> cumulative, recovered, deaths;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 4) {
      throw DataError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                      " fields, expected 4");
    }
    auto number = [&](std::string_view f) {
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
      if (ec != std::errc{} || ptr != f.data() + f.size()) {
        throw DataError("row " + std::to_string(row) + ": malformed number '" + std::string(f) +
                        "'");
      }
      return value;
    };
    dates.push_back(parse_date(fields[0]));
    cumulative.push_back(number(fields[1]));
    recovered.push_back(number(fields[2]));
    deaths.push_back(number(fields[3]));
  }
  return make_series(std::move(region_id), std::move(dates), std::move(cumulative),
                     std::move(recovered), std::move(deaths), population);
}

inline ObservedSeries load_region_csv(const std::string& path, double population,
                                      std::string region_id = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  return parse_region_csv(in, population, std::move(region_id));
}

inline void write_region_csv(std::ostream& out, const ObservedSeries& s) {
  out << "date,cumulative_cases,recovered,deaths\n";
  for (std::size_t t = 0; t < s.size(); ++t) {
    out << format_date(s.dates[t]) << ',' << format_number(s.cumulative_cases[t]) << ','
        << format_number(s.recovered[t]) << ',' << format_number(s.deaths[t]) << '\n';
  }
}

struct SplitSeries {
  ObservedSeries train;
  ObservedSeries test;
};

/// The final `holdout_days` form the test window.
inline SplitSeries split_train_test(const ObservedSeries& series, std::size_t holdout_days = 20) {
  if (series.size() <= holdout_days) {
    throw DataError("series of " + std::to_string(series.size()) +
                    " days is too short for a holdout of " + std::to_string(holdout_days));
  }
  const std::size_t train = series.size() - holdout_days;
  return {series.slice(0, train), series.slice(train, holdout_days)};
}

/// Per-region settings: {region_id, population, e0_ratio, mild_fraction}.
struct RegionConfig {
  std::string region_id;
  double population = 0.0;
  SplitConfig split;
};

inline void to_json(nlohmann::json& j, const RegionConfig& c) {
  j = {{"region_id", c.region_id},
       {"population", c.population},
       {"e0_ratio", c.split.e0_ratio},
       {"mild_fraction", c.split.mild_fraction}};
}

inline void from_json(const nlohmann::json& j, RegionConfig& c) {
  c.region_id = j.at("region_id").get<std::string>();
  c.population = j.at("population").get<double>();
  c.split.e0_ratio = j.value("e0_ratio", SplitConfig{}.e0_ratio);
  c.split.mild_fraction = j.value("mild_fraction", SplitConfig{}.mild_fraction);
  if (!(c.population > 0)) throw DataError("region population must be positive");
}

inline RegionConfig load_region_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open region config '" + path + "'");
  try {
    return nlohmann::json::parse(in).get<RegionConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid region config '" + path + "': " + e.what());
  }
}

}  // namespace dde
