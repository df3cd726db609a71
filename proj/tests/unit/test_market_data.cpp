#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <unistd.h>

#include "doctest.h"
#include "masaat/errors.hpp"
#include "masaat/market_data.hpp"

using namespace masaat;
using namespace masaat::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / ("masaat_md_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& body) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p) << body;
  return p;
}

std::string load_error(const fs::path& p) {
  try {
    load_csv(p);
  } catch (const IngestionError& e) {
    return e.what();
  }
  return {};
}

Date ymd(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

AssetSeries flat_series(const std::string& id, const std::vector<Date>& dates, double price) {
  AssetSeries s;
  s.asset_id = id;
  s.dates = dates;
  for (auto& ch : s.ohlc) ch.assign(dates.size(), price);
  return s;
}

std::vector<Date> consecutive_days(Date start, std::size_t n) {
  std::vector<Date> out;
  std::chrono::sys_days d{start};
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(d + std::chrono::days{i});
  return out;
}

MarketFrame two_asset_frame(std::vector<double> closes_a, std::vector<double> closes_b) {
  const auto dates = consecutive_days(ymd(2020, 1, 1), closes_a.size());
  AssetSeries a = flat_series("A", dates, 1.0), b = flat_series("B", dates, 1.0);
  for (auto& ch : a.ohlc) ch = closes_a;
  for (auto& ch : b.ohlc) ch = closes_b;
  return align({a, b});
}

}  // namespace

TEST_CASE("dates parse and format as ISO-8601") {
  Date d;
  REQUIRE(parse_date("2021-02-28", d));
  CHECK(format_date(d) == "2021-02-28");
  CHECK_FALSE(parse_date("2021-02-30", d));
  CHECK_FALSE(parse_date("2021/02/01", d));
  CHECK_FALSE(parse_date("21-02-01", d));
}

TEST_CASE("load_csv: well-formed fixture") {
  const auto p = write_file("AAA.csv",
                            "date,open,high,low,close\n"
                            "2020-01-02,10,11,9,10.5\n"
                            "2020-01-03,10.5,12,10,11\n"
                            "2020-01-06,11,11.5,10.2,10.8\n");
  const AssetSeries s = load_csv(p);
  CHECK(s.asset_id == "AAA");
  CHECK(s.length() == 3);
  CHECK(s.channel(Channel::Close)[2] == 10.8);
  CHECK(s.channel(Channel::High)[1] == 12.0);
}

TEST_CASE("load_csv: column order follows the header") {
  const auto p = write_file("BBB.csv",
                            "close,date,low,high,open\n"
                            "2,2020-01-02,1,3,1.5\n");
  const AssetSeries s = load_csv(p);
  CHECK(s.channel(Channel::Open)[0] == 1.5);
  CHECK(s.channel(Channel::Close)[0] == 2.0);
}

TEST_CASE("load_csv: validation errors name the row") {
  const auto neg = write_file("NEG.csv",
                              "date,open,high,low,close\n"
                              "2020-01-02,10,11,9,10\n"
                              "2020-01-03,10,11,9,-1\n");
  const std::string msg = load_error(neg);
  CHECK(msg.find("row 2") != std::string::npos);
  CHECK(msg.find("close") != std::string::npos);

  const auto shuffled = write_file("SHUF.csv",
                                   "date,open,high,low,close\n"
                                   "2020-01-03,10,11,9,10\n"
                                   "2020-01-02,10,11,9,10\n");
  CHECK(load_error(shuffled).find("dates not strictly increasing") != std::string::npos);

  const auto dup = write_file("DUP.csv",
                              "date,open,high,low,close\n"
                              "2020-01-02,10,11,9,10\n"
                              "2020-01-02,10,11,9,10\n");
  CHECK(load_error(dup).find("dates not strictly increasing") != std::string::npos);

  const auto missing = write_file("MISS.csv", "date,open,high,close\n2020-01-02,1,1,1\n");
  CHECK(load_error(missing).find("low") != std::string::npos);

  const auto text = write_file("TXT.csv", "date,open,high,low,close\n2020-01-02,1,1,x,1\n");
  CHECK(load_error(text).find("row 1") != std::string::npos);

  CHECK_THROWS_AS(load_csv(scratch_dir() / "absent.csv"), IngestionError);
}

TEST_CASE("write_csv round-trips exactly") {
  SynthSpec spec{{{"X", 0.001, 0.02}}, 30, 9};
  const MarketFrame f = synthesize(spec);
  const auto p = scratch_dir() / "X.csv";
  write_csv(f.assets[0], p);
  const AssetSeries back = load_csv(p);
  CHECK(back.dates == f.assets[0].dates);
  CHECK(back.ohlc == f.assets[0].ohlc);
}

TEST_CASE("align: identical, offset and disjoint calendars") {
  const auto d10 = consecutive_days(ymd(2020, 3, 1), 10);
  const MarketFrame same = align({flat_series("A", d10, 1), flat_series("B", d10, 2)});
  CHECK(same.calendar == d10);

  for (std::size_t k : {2u, 5u, 9u}) {
    const auto a = consecutive_days(ymd(2020, 3, 1), 10);
    std::chrono::sys_days shift{a[10 - k]};
    const auto b = consecutive_days(Date{shift}, 10);
    const MarketFrame f = align({flat_series("A", a, 1), flat_series("B", b, 2)});
    CHECK(f.num_days() == k);
    CHECK(f.calendar.front() == a[10 - k]);
    CHECK(f.assets[1].length() == k);
  }

  const auto late = consecutive_days(ymd(2021, 1, 1), 10);
  CHECK_THROWS_AS(align({flat_series("A", d10, 1), flat_series("B", late, 1)}), AlignmentError);
  CHECK_THROWS_AS(align({flat_series("A", d10, 1)}), AlignmentError);
  // intersection shorter than the required history
  CHECK_THROWS_AS(align({flat_series("A", d10, 1), flat_series("B", d10, 1)}, 11), AlignmentError);
}

TEST_CASE("align is idempotent") {
  std::mt19937_64 rng(4);
  std::vector<AssetSeries> assets;
  for (int i = 0; i < 4; ++i) {
    auto dates = consecutive_days(ymd(2020, 1, 1), 60);
    std::vector<Date> kept;
    for (auto& d : dates)
      if (rng() % 5 != 0) kept.push_back(d);
    assets.push_back(flat_series("S" + std::to_string(i), kept, 1.0 + i));
  }
  const MarketFrame once = align(assets);
  const MarketFrame twice = align(once.assets);
  CHECK(twice.calendar == once.calendar);
  for (std::size_t i = 0; i < once.num_assets(); ++i) {
    CHECK(twice.assets[i].dates == once.assets[i].dates);
    CHECK(twice.assets[i].ohlc == once.assets[i].ohlc);
  }
}

TEST_CASE("window normalises by the last close") {
  const MarketFrame flat = two_asset_frame(std::vector<double>(8, 100.0), std::vector<double>(8, 50.0));
  const auto w = window(flat, 7, 5);
  for (double v : w.tensor.values()) CHECK(v == 1.0);

  const MarketFrame f = two_asset_frame({100, 110}, {20, 10});
  const auto w2 = window(f, 1, 2, {Channel::Close});
  CHECK(w2.at(0, 0, 0) == doctest::Approx(0.9090909090909091).epsilon(1e-15));
  CHECK(w2.at(0, 0, 1) == 1.0);
  CHECK(w2.at(1, 0, 0) == 2.0);

  CHECK_THROWS_AS(window(flat, 3, 5), RangeError);  // t = T_w - 2
  CHECK_NOTHROW(window(flat, 4, 5));
  CHECK_THROWS_AS(window(flat, 8, 5), RangeError);
  CHECK_THROWS_AS(window(flat, 4, 1), ConfigError);
}

TEST_CASE("window entries are positive and the close ends at one") {
  SynthSpec spec{{{"A", 0.0005, 0.03}, {"B", -0.001, 0.05}, {"C", 0.0, 0.01}}, 300, 17};
  const MarketFrame f = synthesize(spec);
  for (std::size_t t = 15; t < f.num_days(); t += 7) {
    const auto w = window(f, t, 16);
    CHECK(w.tensor.shape() == nn::Shape{3, 4, 16});
    for (double v : w.tensor.values()) CHECK((std::isfinite(v) && v > 0.0));
    for (std::size_t i = 0; i < 3; ++i) CHECK(w.at(i, 3, 15) == 1.0);
  }
}

TEST_CASE("synthesize limits and determinism") {
  SynthSpec flat{{{"A", 0.0, 0.0}, {"B", 0.0, 0.0}}, 20, 1};
  const MarketFrame f = synthesize(flat);
  for (const auto& a : f.assets)
    for (const auto& ch : a.ohlc)
      for (double v : ch) CHECK(v == 100.0);

  SynthSpec up{{{"A", 0.01, 0.0}, {"B", 0.02, 0.0}}, 20, 1};
  const MarketFrame g = synthesize(up);
  for (std::size_t t = 1; t < 20; ++t) {
    CHECK(g.close(0, t) > g.close(0, t - 1));
    CHECK(g.close(0, t) / g.close(0, t - 1) == doctest::Approx(std::exp(0.01)).epsilon(1e-13));
    CHECK(g.relative_closes(t)[1] == doctest::Approx(std::exp(0.02)).epsilon(1e-13));
  }

  SynthSpec noisy{{{"A", 0.001, 0.02}, {"B", 0.0, 0.03}}, 100, 77};
  const MarketFrame a = synthesize(noisy), b = synthesize(noisy);
  CHECK(a.calendar == b.calendar);
  for (std::size_t i = 0; i < 2; ++i) CHECK(a.assets[i].ohlc == b.assets[i].ohlc);
  for (const auto& s : a.assets) {
    CHECK_NOTHROW(s.validate());
    for (std::size_t t = 0; t < s.length(); ++t) {
      CHECK(s.channel(Channel::Low)[t] <= s.channel(Channel::Close)[t]);
      CHECK(s.channel(Channel::High)[t] >= s.channel(Channel::Open)[t]);
    }
  }
  for (const auto& d : a.calendar) {
    const std::chrono::weekday wd{std::chrono::sys_days{d}};
    CHECK(wd != std::chrono::Saturday);
    CHECK(wd != std::chrono::Sunday);
  }
  noisy.seed = 78;
  CHECK(synthesize(noisy).assets[0].ohlc != a.assets[0].ohlc);

  SynthSpec bad{{{"A", 0.0, -0.1}}, 10, 1};
  CHECK_THROWS_AS(synthesize(bad), ConfigError);
  SynthSpec short_spec{{{"A", 0.0, 0.1}}, 1, 1};
  CHECK_THROWS_AS(synthesize(short_spec), ConfigError);
}

TEST_CASE("default split is chronological and non-overlapping") {
  for (std::size_t n : {16u, 100u, 1500u, 4001u}) {
    const SplitSpec s = default_split(n);
    CHECK(s.train.begin == 0);
    CHECK(s.train.end == s.validation.begin);
    CHECK(s.validation.end == s.test.begin);
    CHECK(s.test.end == n);
    CHECK(s.train.size() >= 3 * s.validation.size());
  }
  SplitSpec overlap{{0, 10}, {9, 12}, {12, 20}};
  CHECK_THROWS_AS(overlap.validate(20), ConfigError);
}

TEST_CASE("range_from_dates maps inclusive intervals") {
  const MarketFrame f = synthesize(SynthSpec{{{"A", 0, 0.01}, {"B", 0, 0.01}}, 10, 1});
  // 2000-01-03 is a Monday; the calendar skips the weekend of 8-9 January.
  const DayRange r = range_from_dates(f, ymd(2000, 1, 4), ymd(2000, 1, 9));
  CHECK(r == DayRange{1, 5});
  CHECK(range_from_dates(f, ymd(1999, 1, 1), ymd(2000, 1, 3)) == DayRange{0, 1});
  CHECK_THROWS_AS(range_from_dates(f, ymd(2000, 1, 8), ymd(2000, 1, 9)), RangeError);
}

TEST_CASE("channel names") {
  for (Channel c : default_channels()) CHECK(parse_channel(channel_name(c)) == c);
  CHECK_THROWS_AS(parse_channel("volume"), ConfigError);
}
