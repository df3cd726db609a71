#pragma once

#include <cstddef>
#include <span>

namespace masaat::backtest {

struct MetricConfig {
  std::size_t trading_days_per_year = 252;  // T_yr
  double risk_free = 0.0;                   // decimal, e.g. 0.03
  double cost_rate = 0.0;                   // proportional to turnover

  void validate() const;
  friend bool operator==(const MetricConfig&, const MetricConfig&) = default;
};

// ((C_T / C_1)^(T_yr / T) - 1) * 100
double annualised_return(double first_value, double last_value, std::size_t days,
                         std::size_t trading_days_per_year);

// Largest peak-to-trough loss in percent, O(T) with a running peak.
double max_drawdown(std::span<const double> curve);

// sqrt(T_yr / (T-1) * sum (r_t - mean)^2)
double annualised_volatility(std::span<const double> daily_returns,
                             std::size_t trading_days_per_year);

// (AR - r_f) / sigma_p with AR as a decimal. Zero volatility raises
// UndefinedVolatilityError rather than returning +-Inf.
double sharpe_ratio(double annual_return_decimal, double risk_free,
                    std::span<const double> daily_returns, std::size_t trading_days_per_year);

}  // namespace masaat::backtest
