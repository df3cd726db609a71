#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "masaat/market_data.hpp"
#include "masaat/metrics.hpp"
#include "masaat/model.hpp"

namespace masaat::backtest {

using model::PortfolioVector;

struct BacktestState {
  double value = 1.0;
  std::vector<double> drifted;  // previous weights after the last day's price moves
  std::size_t days = 0;
};

struct ReturnsRecord {
  double gross = 1.0;       // rho_t = C_t / C_{t-1}
  double arithmetic = 0.0;  // r_t = rho_t - 1
  double turnover = 0.0;
};

// Rebalance to `w`, then apply relative closes `x`. Day one costs nothing.
ReturnsRecord step(BacktestState& state, const PortfolioVector& w, std::span<const double> x,
                   double cost_rate);

// Read-only view of a frame up to and including `last_day`. Anything later
// throws RangeError, so a strategy cannot peek at the day it trades into.
class HistoryView {
 public:
  HistoryView(const data::MarketFrame& frame, std::size_t last_day);

  std::size_t last_day() const { return last_day_; }
  std::size_t num_assets() const { return frame_->num_assets(); }
  double close(std::size_t asset, std::size_t day) const;
  std::vector<double> relative_closes(std::size_t day) const;
  data::ObservationWindow window(std::size_t length, const std::vector<data::Channel>& channels) const;

 private:
  void check(std::size_t day) const;
  const data::MarketFrame* frame_;
  std::size_t last_day_;
};

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string name() const = 0;
  // Days of history (ending at the decision day) needed before the first decision.
  virtual std::size_t min_history() const { return 1; }
  virtual void reset(std::size_t /*num_assets*/) {}
  virtual PortfolioVector decide(const HistoryView& history) = 0;
};

class PolicyStrategy : public Strategy {
 public:
  explicit PolicyStrategy(const model::MasaatPolicy& policy) : policy_(&policy) {}
  std::string name() const override { return "masaat"; }
  std::size_t min_history() const override { return policy_->config().window; }
  PortfolioVector decide(const HistoryView& history) override;

 private:
  const model::MasaatPolicy* policy_;
};

struct BacktestReport {
  std::string strategy;
  data::DayRange range;                 // return days
  std::vector<data::Date> dates;        // decision day before range, then each return day
  std::vector<double> equity;           // C_0 = 1, C_1..C_T
  std::vector<ReturnsRecord> returns;
  std::vector<PortfolioVector> weights;
  double ar_pct = 0.0;
  double mdd_pct = 0.0;
  std::optional<double> sharpe;         // empty when volatility is zero
  MetricConfig metrics;

  double final_value() const { return equity.back(); }
  std::vector<double> daily_returns() const;
};

// Trades every day d in `range`: weights come from history up to d-1, then
// day d's relative closes are applied.
BacktestReport run_backtest(const data::MarketFrame& frame, Strategy& strategy, data::DayRange range,
                            const MetricConfig& cfg);

std::string report_json(const BacktestReport& report);
std::string equity_csv(const BacktestReport& report);

}  // namespace masaat::backtest
