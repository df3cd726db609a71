#include "masaat/dc.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "masaat/errors.hpp"

namespace masaat::dc {

Threshold::Threshold(double value) : value_(value) {
  if (!(value > 0.0 && value < 1.0)) {
    throw ConfigError("DC threshold must lie in (0, 1), got " + std::to_string(value));
  }
}

const char* direction_name(Direction d) { return d == Direction::Up ? "up" : "down"; }

namespace {

void require_prices(std::span<const double> prices) {
  if (prices.size() < 2) throw NumericDomainError("DC scan needs at least 2 prices");
  for (std::size_t t = 0; t < prices.size(); ++t) {
    if (!(prices[t] > 0.0) || !std::isfinite(prices[t])) {
      throw NumericDomainError("DC scan: non-positive price at index " + std::to_string(t));
    }
  }
}

// Advances the scanner by one price; returns true and fills `ev` on confirmation.
bool advance(State& s, std::span<const double> prices, std::size_t t, double th, Event& ev) {
  const double p = prices[t];
  const bool up_test = s.trend != Trend::Up && p / s.low >= 1.0 + th;
  const bool down_test = !up_test && s.trend != Trend::Down && p / s.high <= 1.0 - th;
  if (up_test) {
    ev = Event{Direction::Up, t, s.low_index};
    s.trend = Trend::Up;
    s.high = p;
    s.high_index = t;
    s.confirm_price = p;
    return true;
  }
  if (down_test) {
    ev = Event{Direction::Down, t, s.high_index};
    s.trend = Trend::Down;
    s.low = p;
    s.low_index = t;
    s.confirm_price = p;
    return true;
  }
  if (s.trend != Trend::Down && p > s.high) {
    s.high = p;
    s.high_index = t;
  }
  if (s.trend != Trend::Up && p < s.low) {
    s.low = p;
    s.low_index = t;
  }
  return false;
}

State initial_state(double first) { return State{Trend::Undetermined, first, first, 0, 0, first}; }

}  // namespace

std::vector<Event> detect_events(std::span<const double> prices, Threshold th) {
  require_prices(prices);
  std::vector<Event> events;
  State s = initial_state(prices[0]);
  Event ev{};
  for (std::size_t t = 1; t < prices.size(); ++t) {
    if (advance(s, prices, t, th.value(), ev)) events.push_back(ev);
  }
  return events;
}

std::vector<double> dc_transform(std::span<const double> prices, Threshold th) {
  require_prices(prices);
  std::vector<double> out(prices.size(), 0.0);
  State s = initial_state(prices[0]);
  Event ev{};
  for (std::size_t t = 1; t < prices.size(); ++t) {
    if (advance(s, prices, t, th.value(), ev)) continue;  // zero at confirmation
    if (s.trend == Trend::Undetermined) continue;
    const double dir = s.trend == Trend::Up ? 1.0 : -1.0;
    out[t] = dir * (prices[t] - s.confirm_price) / s.confirm_price;
  }
  return out;
}

nn::Tensor dc_feature_map(const data::ObservationWindow& window, Threshold th) {
  const std::size_t n = window.num_assets(), m = window.num_channels(), len = window.length();
  nn::Tensor out(window.tensor.shape(), 0.0);
  auto src = window.tensor.values();
  for (std::size_t row = 0; row < n * m; ++row) {
    const auto s = dc_transform(src.subspan(row * len, len), th);
    for (std::size_t k = 0; k < len; ++k) out[row * len + k] = s[k];
  }
  return out;
}

nn::Tensor high_order_signal(const nn::Tensor& features) {
  const std::size_t len = features.shape().back();
  const std::size_t rows = features.size() / len;
  nn::Tensor out(features.shape(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 1; k < len; ++k) {
      out[r * len + k] = features[r * len + k] - features[r * len + k - 1];
    }
  }
  return out;
}

std::vector<double> time_mask(std::size_t length) {
  if (length < 2) throw ConfigError("time mask needs T_w >= 2");
  std::vector<double> mask(length);
  const double step = (std::numbers::pi / 2.0) / static_cast<double>(length - 1);
  for (std::size_t k = 0; k < length; ++k) mask[k] = std::sin(static_cast<double>(k) * step);
  mask.back() = 1.0;
  return mask;
}

}  // namespace masaat::dc
