#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "dde/data.hpp"

namespace {

using namespace dde;

ObservedSeries parse(const std::string& text, double population = 1e6) {
  std::istringstream in(text);
  return parse_region_csv(in, population, "test");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

const std::string kHeader = "date,cumulative_cases,recovered,deaths\n";

TEST(Dates, ParseFormatNext) {
  auto d = parse_date("2020-02-28");
  EXPECT_EQ(format_date(d), "2020-02-28");
  EXPECT_EQ(format_date(next_day(d)), "2020-02-29");
  EXPECT_EQ(format_date(next_day(parse_date("2020-12-31"))), "2021-01-01");
  EXPECT_THROW(parse_date("2020-2-28"), DataError);
  EXPECT_THROW(parse_date("2021-02-29"), DataError);
  EXPECT_THROW(parse_date("20200228"), DataError);
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(100.0), "100");
  EXPECT_EQ(format_number(0.1), "0.1");
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_number(x)), x);
}

TEST(Csv, ActiveInfected) {
  auto s = parse(kHeader + "2020-01-24,100,30,5\n");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.active_infected[0], 65.0);
  EXPECT_EQ(s.region_id, "test");
}

TEST(Csv, MonotonicityErrorNamesRow) {
  auto msg = error_of(kHeader + "2020-01-24,100,0,0\n2020-01-25,90,0,0\n");
  EXPECT_NE(msg.find("decreases"), std::string::npos) << msg;
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
}

TEST(Csv, GapErrorNamesDates) {
  auto msg = error_of(kHeader + "2020-01-31,1,0,0\n2020-02-02,2,0,0\n");
  EXPECT_NE(msg.find("gap"), std::string::npos) << msg;
  EXPECT_NE(msg.find("2020-01-31"), std::string::npos) << msg;
}

TEST(Csv, ConsistencyError) {
  auto msg = error_of(kHeader + "2020-01-24,10,8,5\n");
  EXPECT_NE(msg.find("exceed"), std::string::npos) << msg;
}

TEST(Csv, OtherErrors) {
  EXPECT_NE(error_of(""), "");
  EXPECT_NE(error_of("date,cases\n"), "");
  EXPECT_NE(error_of(kHeader), "");
  EXPECT_NE(error_of(kHeader + "2020-01-24,10,1\n"), "");
  EXPECT_NE(error_of(kHeader + "2020-01-24,ten,1,0\n"), "");
  EXPECT_NE(error_of(kHeader + "2020-01-24,-1,0,0\n"), "");
  EXPECT_NE(error_of(kHeader + "2020-01-24,nan,0,0\n"), "");
  EXPECT_NE(error_of(kHeader + "2020-01-24,inf,0,0\n"), "");
  EXPECT_NE(error_of(kHeader + "2020-01-24,10,5,0\n2020-01-25,10,4,0\n"), "");
  EXPECT_THROW(parse(kHeader + "2020-01-24,2000,0,0\n", 1000), DataError);
}

TEST(Csv, ToleratesCrlfBomAndCommentLines) {
  auto s = parse("\xEF\xBB\xBF# manifest: {}\r\n" + std::string("date,cumulative_cases,recovered,deaths\r\n") +
                 "2020-01-24,10,1,0\r\n2020-01-25,12,2,1\r\n\r\n");
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.active_infected[1], 9.0);
}

TEST(Csv, WriteReadRoundTrip) {
  auto s = parse(kHeader + "2020-01-24,100.5,30,5\n2020-01-25,120,31,6\n");
  std::ostringstream out;
  write_region_csv(out, s);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_region_csv(in, 1e6, "test"), s);
}

TEST(Csv, LoadMissingFile) {
  EXPECT_THROW(load_region_csv("/nonexistent/x.csv", 1e6), DataError);
}

ObservedSeries days(std::size_t n) {
  std::string text = kHeader;
  Date d = parse_date("2020-01-24");
  for (std::size_t i = 0; i < n; ++i) {
    text += format_date(d) + "," + std::to_string(10 + i) + ",0,0\n";
    d = next_day(d);
  }
  return parse(text);
}

TEST(Split, EightyThreeDayWindow) {
  auto s = days(83);
  EXPECT_EQ(format_date(s.dates.back()), "2020-04-15");
  auto split = split_train_test(s, 20);
  EXPECT_EQ(split.train.size(), 63u);
  EXPECT_EQ(split.test.size(), 20u);
  EXPECT_EQ(split.test.dates.front(), s.dates[63]);
}

TEST(Split, Boundaries) {
  auto split = split_train_test(days(21), 20);
  EXPECT_EQ(split.train.size(), 1u);
  EXPECT_EQ(split.test.size(), 20u);
  EXPECT_THROW(split_train_test(days(20), 20), DataError);
}

TEST(RegionConfig, LoadAndDefaults) {
  auto path = std::filesystem::temp_directory_path() / "dde_region_test.json";
  {
    std::ofstream out(path);
    out << R"({"region_id": "XX", "population": 1000})";
  }
  auto c = load_region_config(path.string());
  EXPECT_EQ(c.region_id, "XX");
  EXPECT_EQ(c.population, 1000.0);
  EXPECT_EQ(c.split.e0_ratio, 1.0);
  EXPECT_EQ(c.split.mild_fraction, 0.9);
  {
    std::ofstream out(path);
    out << R"({"region_id": "XX", "population": -3})";
  }
  EXPECT_THROW(load_region_config(path.string()), DataError);
  {
    std::ofstream out(path);
    out << "{not json";
  }
  EXPECT_THROW(load_region_config(path.string()), DataError);
  std::filesystem::remove(path);
}

}  // namespace
