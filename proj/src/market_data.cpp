#include "masaat/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "masaat/errors.hpp"

namespace masaat::data {

namespace chr = std::chrono;

bool parse_date(const std::string& text, Date& out) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (text[i] < '0' || text[i] > '9') return false;
  }
  const int y = std::stoi(text.substr(0, 4));
  const unsigned m = static_cast<unsigned>(std::stoi(text.substr(5, 2)));
  const unsigned d = static_cast<unsigned>(std::stoi(text.substr(8, 2)));
  Date parsed{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!parsed.ok()) return false;
  out = parsed;
  return true;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::Open: return "open";
    case Channel::High: return "high";
    case Channel::Low: return "low";
    case Channel::Close: return "close";
  }
  return "?";
}

Channel parse_channel(const std::string& name) {
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    if (name == channel_name(static_cast<Channel>(i))) return static_cast<Channel>(i);
  }
  throw ConfigError("unknown price channel '" + name + "' (expected open, high, low or close)");
}

std::vector<Channel> default_channels() {
  return {Channel::Open, Channel::High, Channel::Low, Channel::Close};
}

void AssetSeries::validate() const {
  for (const auto& ch : ohlc) {
    if (ch.size() != dates.size()) {
      throw IngestionError(asset_id + ": channel lengths differ from date count");
    }
  }
  for (std::size_t t = 0; t < dates.size(); ++t) {
    if (t > 0 && !(dates[t - 1] < dates[t])) {
      throw IngestionError(asset_id + ": dates not strictly increasing at row " +
                           std::to_string(t + 1));
    }
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      const double v = ohlc[c][t];
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw IngestionError(asset_id + ": row " + std::to_string(t + 1) + ": " +
                             channel_name(static_cast<Channel>(c)) + " must be a positive price");
      }
    }
  }
}

std::vector<double> MarketFrame::relative_closes(std::size_t day) const {
  if (day == 0 || day >= num_days()) {
    throw RangeError("relative closes need 1 <= day < " + std::to_string(num_days()));
  }
  std::vector<double> x(num_assets());
  for (std::size_t i = 0; i < num_assets(); ++i) x[i] = close(i, day) / close(i, day - 1);
  return x;
}

std::size_t MarketFrame::lower_bound(const Date& d) const {
  return static_cast<std::size_t>(std::lower_bound(calendar.begin(), calendar.end(), d) -
                                  calendar.begin());
}

void SplitSpec::validate(std::size_t num_days) const {
  if (train.empty() || validation.empty() || test.empty()) {
    throw ConfigError("split: train, validation and test ranges must be non-empty");
  }
  if (train.end > validation.begin || validation.end > test.begin || test.end > num_days) {
    throw ConfigError("split: ranges must be chronological, non-overlapping and inside the data");
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string row_ref(std::size_t row) {
  return "row " + std::to_string(row) + " (line " + std::to_string(row + 1) + ")";
}

}  // namespace

AssetSeries load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  AssetSeries s;
  s.asset_id = path.stem().string();

  std::string line;
  if (!std::getline(in, line)) throw IngestionError(path.string() + ": missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  const char* required[] = {"date", "open", "high", "low", "close"};
  for (const char* name : required) {
    if (!col.contains(name)) {
      throw IngestionError(path.string() + ": missing column '" + name + "'");
    }
  }

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto f = split_csv_line(line);
    auto field = [&](const char* name) -> const std::string& {
      const std::size_t idx = col.at(name);
      if (idx >= f.size()) {
        throw IngestionError(path.string() + ": " + row_ref(row) + ": missing column '" + name + "'");
      }
      return f[idx];
    };
    Date d;
    if (!parse_date(field("date"), d)) {
      throw IngestionError(path.string() + ": " + row_ref(row) + ": invalid date '" +
                           field("date") + "'");
    }
    if (!s.dates.empty() && !(s.dates.back() < d)) {
      throw IngestionError(path.string() + ": " + row_ref(row) + ": dates not strictly increasing");
    }
    s.dates.push_back(d);
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      const char* name = channel_name(static_cast<Channel>(c));
      const std::string& text = field(name);
      double v = 0.0;
      std::size_t used = 0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != text.size()) {
        throw IngestionError(path.string() + ": " + row_ref(row) + ": " + name +
                             " is not a number: '" + text + "'");
      }
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw IngestionError(path.string() + ": " + row_ref(row) + ": " + name +
                             " must be a positive price, got " + text);
      }
      s.ohlc[c].push_back(v);
    }
  }
  return s;
}

void write_csv(const AssetSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "date,open,high,low,close\n" << std::setprecision(17);
  for (std::size_t t = 0; t < series.length(); ++t) {
    out << format_date(series.dates[t]);
    for (std::size_t c = 0; c < kChannelCount; ++c) out << ',' << series.ohlc[c][t];
    out << '\n';
  }
}

MarketFrame align(const std::vector<AssetSeries>& assets, std::size_t min_days) {
  if (assets.size() < 2) throw AlignmentError("alignment needs at least 2 assets");
  std::vector<Date> common = assets.front().dates;
  for (std::size_t i = 1; i < assets.size(); ++i) {
    std::vector<Date> next;
    std::set_intersection(common.begin(), common.end(), assets[i].dates.begin(),
                          assets[i].dates.end(), std::back_inserter(next));
    common = std::move(next);
  }
  if (common.empty()) throw AlignmentError("asset calendars do not intersect");
  if (common.size() < min_days) {
    throw AlignmentError("common calendar has " + std::to_string(common.size()) +
                         " days, need at least " + std::to_string(min_days));
  }
  MarketFrame frame;
  frame.calendar = common;
  for (const auto& a : assets) {
    AssetSeries r;
    r.asset_id = a.asset_id;
    r.dates = common;
    std::size_t j = 0;
    for (const Date& d : common) {
      while (a.dates[j] < d) ++j;
      for (std::size_t c = 0; c < kChannelCount; ++c) r.ohlc[c].push_back(a.ohlc[c][j]);
    }
    frame.assets.push_back(std::move(r));
  }
  return frame;
}

ObservationWindow window(const MarketFrame& frame, std::size_t end_day, std::size_t length,
                         const std::vector<Channel>& channels) {
  if (length < 2) throw ConfigError("observation window needs T_w >= 2");
  if (channels.empty()) throw ConfigError("observation window needs at least one channel");
  if (end_day >= frame.num_days() || end_day + 1 < length) {
    throw RangeError("window ending at day " + std::to_string(end_day) + " with T_w=" +
                     std::to_string(length) + " exceeds available history");
  }
  const std::size_t n = frame.num_assets(), m = channels.size();
  nn::Tensor t({n, m, length}, 0.0);
  const std::size_t first = end_day + 1 - length;
  for (std::size_t i = 0; i < n; ++i) {
    const double ref = frame.close(i, end_day);
    for (std::size_t c = 0; c < m; ++c) {
      const auto& series = frame.assets[i].channel(channels[c]);
      for (std::size_t k = 0; k < length; ++k) {
        t[(i * m + c) * length + k] = series[first + k] / ref;
      }
    }
  }
  return ObservationWindow{std::move(t), end_day};
}

MarketFrame synthesize(const SynthSpec& spec) {
  if (spec.days < 2) throw ConfigError("synthesize: need at least 2 days");
  if (spec.assets.empty()) throw ConfigError("synthesize: no assets");
  if (!(spec.initial_price > 0.0)) throw ConfigError("synthesize: initial_price must be positive");
  for (const auto& a : spec.assets) {
    if (a.volatility < 0.0) throw ConfigError("synthesize: volatility of " + a.asset_id + " < 0");
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  MarketFrame frame;
  chr::sys_days day{spec.start_date};
  while (frame.calendar.size() < spec.days) {
    const chr::weekday wd{day};
    if (wd != chr::Saturday && wd != chr::Sunday) frame.calendar.emplace_back(day);
    day += chr::days{1};
  }
  for (const auto& a : spec.assets) {
    AssetSeries s;
    s.asset_id = a.asset_id;
    s.dates = frame.calendar;
    frame.assets.push_back(std::move(s));
  }
  std::vector<double> close(spec.assets.size(), spec.initial_price);
  for (std::size_t t = 0; t < spec.days; ++t) {
    for (std::size_t i = 0; i < spec.assets.size(); ++i) {
      const auto& a = spec.assets[i];
      const double z = normal(rng);
      const double z_high = normal(rng), z_low = normal(rng), z_open = normal(rng);
      if (t > 0) {
        close[i] *= std::exp(a.drift - 0.5 * a.volatility * a.volatility + a.volatility * z);
      }
      const double noise = spec.intraday_noise < 0.0 ? 0.5 * a.volatility : spec.intraday_noise;
      const double c = close[i];
      const double high = c * (1.0 + std::fabs(noise * z_high));
      const double low = c * std::max(1e-3, 1.0 - std::fabs(noise * z_low));
      const double open = std::clamp(c * (1.0 + noise * z_open), low, high);
      auto& s = frame.assets[i];
      s.ohlc[static_cast<std::size_t>(Channel::Open)].push_back(open);
      s.ohlc[static_cast<std::size_t>(Channel::High)].push_back(high);
      s.ohlc[static_cast<std::size_t>(Channel::Low)].push_back(low);
      s.ohlc[static_cast<std::size_t>(Channel::Close)].push_back(c);
    }
  }
  return frame;
}

SplitSpec default_split(std::size_t num_days) {
  const std::size_t a = num_days * 10 / 16;
  const std::size_t b = num_days * 13 / 16;
  SplitSpec s{{0, a}, {a, b}, {b, num_days}};
  s.validate(num_days);
  return s;
}

DayRange range_from_dates(const MarketFrame& frame, const Date& first, const Date& last) {
  const std::size_t b = frame.lower_bound(first);
  std::size_t e = frame.lower_bound(last);
  if (e < frame.num_days() && frame.calendar[e] == last) ++e;
  if (e <= b) {
    throw RangeError("date range " + format_date(first) + ":" + format_date(last) +
                     " selects no trading days");
  }
  return {b, e};
}

}  // namespace masaat::data
