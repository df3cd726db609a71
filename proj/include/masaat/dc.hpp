#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "masaat/market_data.hpp"
#include "masaat/tensor.hpp"

namespace masaat::dc {

// Relative move that confirms a directional change, e.g. 0.01 for 1%.
class Threshold {
 public:
  explicit Threshold(double value);
  double value() const { return value_; }
  friend bool operator==(const Threshold&, const Threshold&) = default;

 private:
  double value_;
};

enum class Direction { Up, Down };
const char* direction_name(Direction d);

struct Event {
  Direction direction;
  std::size_t confirm_index;
  std::size_t extreme_index;  // index of the low (Up) or high (Down) being reversed
  friend bool operator==(const Event&, const Event&) = default;
};

enum class Trend { Undetermined, Up, Down };

// Scanner state. Before the first confirmation both extremes are tracked.
struct State {
  Trend trend = Trend::Undetermined;
  double low = 0.0;
  double high = 0.0;
  std::size_t low_index = 0;
  std::size_t high_index = 0;
  double confirm_price = 0.0;
};

// Left-to-right scan. An up event fires when p_t >= p_low * (1 + th),
// a down event when p_t <= p_high * (1 - th); both tested as price ratios.
std::vector<Event> detect_events(std::span<const double> prices, Threshold th);

// s_t = dir_t * (p_t - p_c) / p_c with p_c the last confirmation price.
// Zero before the first event and at every confirmation index.
std::vector<double> dc_transform(std::span<const double> prices, Threshold th);

// dc_transform applied to each asset/channel series of the window.
nn::Tensor dc_feature_map(const data::ObservationWindow& window, Threshold th);

// First difference along the last (time) axis with h_0 = 0. Works for any
// N x M x T tensor.
nn::Tensor high_order_signal(const nn::Tensor& features);

// sin(k * (pi/2) / (T_w - 1)) for k = 0..T_w-1.
std::vector<double> time_mask(std::size_t length);

}  // namespace masaat::dc
