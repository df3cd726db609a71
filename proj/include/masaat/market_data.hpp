#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "masaat/tensor.hpp"

namespace masaat::data {

using Date = std::chrono::year_month_day;

// Parses YYYY-MM-DD; returns false on malformed or invalid calendar dates.
bool parse_date(const std::string& text, Date& out);
std::string format_date(const Date& d);

enum class Channel { Open = 0, High = 1, Low = 2, Close = 3 };
inline constexpr std::size_t kChannelCount = 4;
const char* channel_name(Channel c);
Channel parse_channel(const std::string& name);
std::vector<Channel> default_channels();

struct AssetSeries {
  std::string asset_id;
  std::vector<Date> dates;
  // ohlc[c][t] for c in Open, High, Low, Close.
  std::array<std::vector<double>, kChannelCount> ohlc;

  std::size_t length() const { return dates.size(); }
  const std::vector<double>& channel(Channel c) const { return ohlc[static_cast<std::size_t>(c)]; }
  // Throws IngestionError on unsorted dates, non-positive prices or ragged channels.
  void validate() const;
};

struct MarketFrame {
  std::vector<Date> calendar;
  std::vector<AssetSeries> assets;

  std::size_t num_assets() const { return assets.size(); }
  std::size_t num_days() const { return calendar.size(); }
  double close(std::size_t asset, std::size_t day) const {
    return assets[asset].ohlc[static_cast<std::size_t>(Channel::Close)][day];
  }
  // x_{t,i} = close_t / close_{t-1}; requires day >= 1.
  std::vector<double> relative_closes(std::size_t day) const;
  // Index of the first calendar day >= d (num_days() if none).
  std::size_t lower_bound(const Date& d) const;
};

// N x M x T_w tensor of prices divided by each asset's close on `end_day`.
struct ObservationWindow {
  nn::Tensor tensor;
  std::size_t end_day = 0;

  std::size_t num_assets() const { return tensor.shape()[0]; }
  std::size_t num_channels() const { return tensor.shape()[1]; }
  std::size_t length() const { return tensor.shape()[2]; }
  double at(std::size_t asset, std::size_t channel, std::size_t k) const {
    return tensor[(asset * num_channels() + channel) * length() + k];
  }
};

// Half-open day-index ranges [begin, end) over a frame calendar.
struct DayRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool empty() const { return end <= begin; }
  friend bool operator==(const DayRange&, const DayRange&) = default;
};

struct SplitSpec {
  DayRange train;
  DayRange validation;
  DayRange test;
  void validate(std::size_t num_days) const;
};

// CSV `date,open,high,low,close`; asset id is the file stem.
AssetSeries load_csv(const std::filesystem::path& path);
void write_csv(const AssetSeries& series, const std::filesystem::path& path);

// Restricts every asset to the intersection of all calendars.
MarketFrame align(const std::vector<AssetSeries>& assets, std::size_t min_days = 2);

ObservationWindow window(const MarketFrame& frame, std::size_t end_day, std::size_t length,
                         const std::vector<Channel>& channels = default_channels());

struct SynthAsset {
  std::string asset_id;
  double drift = 0.0;       // per-day
  double volatility = 0.0;  // per-day
};

struct SynthSpec {
  std::vector<SynthAsset> assets;
  std::size_t days = 0;
  std::uint64_t seed = 0;
  double initial_price = 100.0;
  double intraday_noise = -1.0;  // < 0: half of each asset's volatility
  Date start_date{std::chrono::year{2000}, std::chrono::January, std::chrono::day{3}};
};

// Geometric Brownian closes with OHLC wrapped around them; business-day calendar.
MarketFrame synthesize(const SynthSpec& spec);

// Train/validation/test split in proportions 10:3:3 of the calendar.
SplitSpec default_split(std::size_t num_days);
// Inclusive date interval mapped to day indices; RangeError if it selects nothing.
DayRange range_from_dates(const MarketFrame& frame, const Date& first, const Date& last);

}  // namespace masaat::data
