#include "masaat/metrics.hpp"

#include <cmath>
#include <string>

#include "masaat/errors.hpp"

namespace masaat::backtest {

void MetricConfig::validate() const {
  if (trading_days_per_year < 1) throw ConfigError("metrics: trading_days_per_year must be >= 1");
  if (!(cost_rate >= 0.0 && cost_rate < 1.0)) throw ConfigError("metrics: cost_rate must be in [0, 1)");
  if (!std::isfinite(risk_free)) throw ConfigError("metrics: risk_free must be finite");
}

double annualised_return(double first_value, double last_value, std::size_t days,
                         std::size_t trading_days_per_year) {
  if (!(first_value > 0.0) || !(last_value > 0.0)) {
    throw ContractError("annualised_return: portfolio values must be positive");
  }
  if (days < 1) throw ContractError("annualised_return: need at least one trading day");
  const double exponent = static_cast<double>(trading_days_per_year) / static_cast<double>(days);
  return (std::pow(last_value / first_value, exponent) - 1.0) * 100.0;
}

double max_drawdown(std::span<const double> curve) {
  if (curve.size() < 2) throw ContractError("max_drawdown: curve needs at least 2 points");
  double peak = curve[0];
  double worst = 0.0;
  for (double c : curve) {
    if (!(c > 0.0)) throw ContractError("max_drawdown: curve must be positive");
    if (c > peak) peak = c;
    const double dd = (peak - c) / peak;
    if (dd > worst) worst = dd;
  }
  return worst * 100.0;
}

double annualised_volatility(std::span<const double> daily_returns,
                             std::size_t trading_days_per_year) {
  const std::size_t n = daily_returns.size();
  if (n < 2) throw ContractError("volatility needs at least 2 daily returns");
  double mean = 0.0;
  for (double r : daily_returns) mean += r;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double r : daily_returns) ss += (r - mean) * (r - mean);
  return std::sqrt(static_cast<double>(trading_days_per_year) / static_cast<double>(n - 1) * ss);
}

double sharpe_ratio(double annual_return_decimal, double risk_free,
                    std::span<const double> daily_returns, std::size_t trading_days_per_year) {
  const double sigma = annualised_volatility(daily_returns, trading_days_per_year);
  if (sigma == 0.0) {
    throw UndefinedVolatilityError("sharpe_ratio: zero volatility, ratio undefined");
  }
  return (annual_return_decimal - risk_free) / sigma;
}

}  // namespace masaat::backtest
