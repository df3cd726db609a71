#include "masaat/backtest.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "masaat/errors.hpp"

namespace masaat::backtest {

ReturnsRecord step(BacktestState& state, const PortfolioVector& w, std::span<const double> x,
                   double cost_rate) {
  if (x.size() != w.size()) throw ContractError("step: weight and price vectors differ in length");
  for (double xi : x) {
    if (!(xi > 0.0) || !std::isfinite(xi)) throw ContractError("step: relative closes must be positive");
  }
  w.validate();
  double turnover = 0.0;
  if (state.days > 0) {
    for (std::size_t i = 0; i < w.size(); ++i) turnover += std::fabs(w[i] - state.drifted[i]);
  }
  double growth = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) growth += w[i] * x[i];
  const double rho = growth * (1.0 - cost_rate * turnover);
  if (!(rho > 0.0)) throw AccountingError("step: non-positive gross return " + std::to_string(rho));
  state.value *= rho;
  state.drifted.assign(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) state.drifted[i] = w[i] * x[i] / growth;
  ++state.days;
  return ReturnsRecord{rho, rho - 1.0, turnover};
}

HistoryView::HistoryView(const data::MarketFrame& frame, std::size_t last_day)
    : frame_(&frame), last_day_(last_day) {
  if (last_day >= frame.num_days()) throw RangeError("history view past the end of the data");
}

void HistoryView::check(std::size_t day) const {
  if (day > last_day_) {
    throw RangeError("look-ahead: day " + std::to_string(day) + " is after the decision day " +
                     std::to_string(last_day_));
  }
}

double HistoryView::close(std::size_t asset, std::size_t day) const {
  check(day);
  return frame_->close(asset, day);
}

std::vector<double> HistoryView::relative_closes(std::size_t day) const {
  check(day);
  return frame_->relative_closes(day);
}

data::ObservationWindow HistoryView::window(std::size_t length,
                                            const std::vector<data::Channel>& channels) const {
  return data::window(*frame_, last_day_, length, channels);
}

PortfolioVector PolicyStrategy::decide(const HistoryView& history) {
  return policy_->decide(history.window(policy_->config().window, policy_->config().channels));
}

std::vector<double> BacktestReport::daily_returns() const {
  std::vector<double> r;
  r.reserve(returns.size());
  for (const auto& rec : returns) r.push_back(rec.arithmetic);
  return r;
}

BacktestReport run_backtest(const data::MarketFrame& frame, Strategy& strategy, data::DayRange range,
                            const MetricConfig& cfg) {
  cfg.validate();
  if (range.empty()) throw RangeError("backtest: empty date range");
  if (range.end > frame.num_days()) throw RangeError("backtest: range extends past the data");
  const std::size_t need = std::max<std::size_t>(1, strategy.min_history());
  if (range.begin < need) {
    throw RangeError("backtest: " + strategy.name() + " needs " + std::to_string(need) +
                     " days of history before the first traded day");
  }
  BacktestReport report;
  report.strategy = strategy.name();
  report.range = range;
  report.metrics = cfg;
  report.dates.push_back(frame.calendar[range.begin - 1]);
  report.equity.push_back(1.0);

  strategy.reset(frame.num_assets());
  BacktestState state;
  for (std::size_t d = range.begin; d < range.end; ++d) {
    const HistoryView history(frame, d - 1);
    PortfolioVector w = strategy.decide(history);
    const auto x = frame.relative_closes(d);
    const ReturnsRecord rec = step(state, w, x, cfg.cost_rate);
    report.returns.push_back(rec);
    report.weights.push_back(std::move(w));
    report.equity.push_back(state.value);
    report.dates.push_back(frame.calendar[d]);
  }
  const std::size_t days = report.returns.size();
  report.ar_pct = annualised_return(report.equity.front(), report.equity.back(), days,
                                    cfg.trading_days_per_year);
  report.mdd_pct = max_drawdown(report.equity);
  if (days >= 2) {
    try {
      report.sharpe = sharpe_ratio(report.ar_pct / 100.0, cfg.risk_free, report.daily_returns(),
                                   cfg.trading_days_per_year);
    } catch (const UndefinedVolatilityError&) {
      report.sharpe.reset();
    }
  }
  return report;
}

std::string report_json(const BacktestReport& report) {
  nlohmann::json j{
      {"strategy", report.strategy},
      {"ar_pct", report.ar_pct},
      {"mdd_pct", report.mdd_pct},
      {"sharpe", report.sharpe ? nlohmann::json(*report.sharpe) : nlohmann::json(nullptr)},
      {"final_value", report.final_value()},
      {"days", report.returns.size()},
      {"config",
       {{"start", data::format_date(report.dates[1])},
        {"end", data::format_date(report.dates.back())},
        {"trading_days_per_year", report.metrics.trading_days_per_year},
        {"risk_free", report.metrics.risk_free},
        {"cost_rate", report.metrics.cost_rate}}}};
  return j.dump(2) + "\n";
}

std::string equity_csv(const BacktestReport& report) {
  std::ostringstream os;
  os << std::setprecision(17) << "date,value,return\n";
  for (std::size_t i = 0; i < report.equity.size(); ++i) {
    os << data::format_date(report.dates[i]) << ',' << report.equity[i] << ','
       << (i == 0 ? 0.0 : report.returns[i - 1].arithmetic) << '\n';
  }
  return os.str();
}

}  // namespace masaat::backtest
