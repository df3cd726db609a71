#include <cmath>
#include <random>

#include "doctest.h"
#include "masaat/backtest.hpp"
#include "masaat/baselines.hpp"
#include "masaat/errors.hpp"
#include "masaat/metrics.hpp"
#include "nlohmann/json.hpp"
#include "oracles.hpp"

using namespace masaat;
using namespace masaat::backtest;
using model::PortfolioVector;

namespace {

data::MarketFrame frame_from_closes(const std::vector<std::vector<double>>& closes) {
  std::vector<data::AssetSeries> assets;
  const std::size_t n = closes.front().size();
  std::vector<data::Date> dates;
  std::chrono::sys_days d{data::Date{std::chrono::year{2020}, std::chrono::January, std::chrono::day{1}}};
  for (std::size_t t = 0; t < n; ++t) dates.emplace_back(d + std::chrono::days{t});
  for (std::size_t i = 0; i < closes.size(); ++i) {
    data::AssetSeries s;
    s.asset_id = "A" + std::to_string(i);
    s.dates = dates;
    for (auto& ch : s.ohlc) ch = closes[i];
    assets.push_back(std::move(s));
  }
  return data::align(assets);
}

// Always fully invested in one asset.
class AllIn : public Strategy {
 public:
  explicit AllIn(std::size_t asset) : asset_(asset) {}
  std::string name() const override { return "all-in"; }
  PortfolioVector decide(const HistoryView& h) override {
    std::vector<double> w(h.num_assets(), 0.0);
    w[asset_] = 1.0;
    return {w};
  }

 private:
  std::size_t asset_;
};

// Records what it saw at each decision; reads the full visible history.
class Recorder : public Strategy {
 public:
  std::string name() const override { return "recorder"; }
  PortfolioVector decide(const HistoryView& h) override {
    double acc = 0;
    for (std::size_t d = 0; d <= h.last_day(); ++d) acc += h.close(0, d) * (d + 1);
    seen.push_back(acc);
    const double a = 0.5 + 0.4 * std::sin(acc);
    return {{a, 1.0 - a}};
  }
  std::vector<double> seen;
};

// Tries to read the day it trades into.
class Peeker : public Strategy {
 public:
  std::string name() const override { return "peeker"; }
  PortfolioVector decide(const HistoryView& h) override {
    (void)h.close(0, h.last_day() + 1);
    return PortfolioVector::uniform(h.num_assets());
  }
};

}  // namespace

TEST_CASE("annualised return") {
  CHECK(annualised_return(1.0, 1.0, 100, 252) == 0.0);
  CHECK(annualised_return(1.0, 1.21, 504, 252) == doctest::Approx(10.0).epsilon(1e-13));
  CHECK(annualised_return(1.0, 1.1428, 252, 252) == doctest::Approx(14.28).epsilon(1e-13));
  // invariant to rescaling the curve
  CHECK(annualised_return(3.0, 3.63, 504, 252) == doctest::Approx(10.0).epsilon(1e-13));
  CHECK_THROWS_AS(annualised_return(0.0, 1.0, 10, 252), ContractError);
  CHECK_THROWS_AS(annualised_return(1.0, 1.0, 0, 252), ContractError);
}

TEST_CASE("maximum drawdown") {
  const std::vector<double> rising{1, 1.1, 1.2, 1.5};
  CHECK(max_drawdown(rising) == 0.0);
  const std::vector<double> zig{1, 1.2, 0.9, 1.1, 0.8};
  CHECK(max_drawdown(zig) == doctest::Approx(100.0 / 3.0).epsilon(1e-14));
  const std::vector<double> dip{1, 0.5, 1};
  CHECK(max_drawdown(dip) == 50.0);
  std::vector<double> scaled = zig;
  for (double& v : scaled) v *= 7.0;
  CHECK(max_drawdown(scaled) == doctest::Approx(max_drawdown(zig)).epsilon(1e-14));

  std::mt19937_64 rng(99);
  for (int k = 0; k < 200; ++k) {
    const auto curve = oracle::random_walk(rng, 2 + k % 60, 0.05);
    CHECK(max_drawdown(curve) == oracle::mdd_all_pairs(curve));
  }
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(max_drawdown(one), ContractError);
}

TEST_CASE("volatility and Sharpe ratio") {
  const std::vector<double> r{0.01, 0.03};
  CHECK(annualised_volatility(r, 252) == doctest::Approx(0.224499443206436483).epsilon(1e-14));
  CHECK(sharpe_ratio(0.10, 0.0, r, 252) == doctest::Approx(0.445435403187373974).epsilon(1e-14));
  CHECK(sharpe_ratio(0.05, 0.05, r, 252) == 0.0);
  const std::vector<double> flat{0.01, 0.01, 0.01};
  CHECK_THROWS_AS(sharpe_ratio(0.1, 0.0, flat, 252), UndefinedVolatilityError);
  const std::vector<double> single{0.01};
  CHECK_THROWS_AS(annualised_volatility(single, 252), ContractError);
}

TEST_CASE("metric config validation") {
  CHECK_NOTHROW(MetricConfig{}.validate());
  CHECK_THROWS_AS((MetricConfig{0, 0.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((MetricConfig{252, 0.0, 1.0}.validate()), ConfigError);
  CHECK_THROWS_AS((MetricConfig{252, 0.0, -0.1}.validate()), ConfigError);
}

TEST_CASE("step accounting") {
  BacktestState s;
  const std::vector<double> x{1.1, 0.9};
  auto rec = step(s, PortfolioVector{{0.5, 0.5}}, x, 0.0);
  CHECK(rec.gross == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.value == doctest::Approx(1.0).epsilon(1e-15));

  // first day is free even with costs
  BacktestState first;
  rec = step(first, PortfolioVector{{0.5, 0.5}}, x, 0.001);
  CHECK(rec.turnover == 0.0);
  CHECK(rec.gross == 1.1 * 0.5 + 0.9 * 0.5);

  // second day: drifted weights are [0.55, 0.45]; rebalancing to [0.5, 0.5] turns over 0.1
  const std::vector<double> ones{1.0, 1.0};
  rec = step(first, PortfolioVector{{0.5, 0.5}}, ones, 0.001);
  CHECK(rec.turnover == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(rec.gross == doctest::Approx(1.0 - 0.001 * 0.1).epsilon(1e-15));
  CHECK(rec.arithmetic == doctest::Approx(-0.0001).epsilon(1e-10));

  BacktestState bad;
  CHECK_THROWS_AS(step(bad, PortfolioVector{{0.6, 0.6}}, x, 0.0), ContractError);
  const std::vector<double> negative{1.0, -1.0};
  CHECK_THROWS_AS(step(bad, PortfolioVector{{0.5, 0.5}}, negative, 0.0), ContractError);
}

TEST_CASE("run_backtest: alternating frame under uniform CRP is flat") {
  std::vector<double> a{1.0}, b{1.0};
  for (int t = 1; t <= 40; ++t) {
    a.push_back(a.back() * (t % 2 ? 1.1 : 0.9));
    b.push_back(b.back() * (t % 2 ? 0.9 : 1.1));
  }
  const auto f = frame_from_closes({a, b});
  baselines::CrpStrategy crp;
  const auto rep = run_backtest(f, crp, {1, 41}, {});
  for (const auto& r : rep.returns) CHECK(r.gross == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::fabs(rep.ar_pct) < 1e-12);
  CHECK(rep.mdd_pct < 1e-12);
  CHECK_FALSE(rep.sharpe.has_value());
  CHECK(rep.dates.size() == rep.equity.size());
  CHECK(rep.equity.size() == 41);
}

TEST_CASE("run_backtest: compounding identity and single-asset path") {
  const double g = 1.0005;
  std::vector<double> a{50.0}, b{20.0};
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 0.02);
  for (int t = 1; t <= 252; ++t) {
    a.push_back(a.back() * g);
    b.push_back(b.back() * std::exp(z(rng)));
  }
  const auto f = frame_from_closes({a, b});
  AllIn first(0), second(1);
  const auto rep = run_backtest(f, first, {1, 253}, {});
  CHECK(rep.ar_pct == doctest::Approx((std::pow(g, 252) - 1) * 100).epsilon(1e-11));
  const auto path = run_backtest(f, second, {1, 253}, {});
  for (std::size_t t = 0; t < path.equity.size(); ++t)
    CHECK(path.equity[t] == doctest::Approx(b[t] / b[0]).epsilon(1e-12));
  // C_T equals the product of daily gross returns
  double prod = 1.0;
  for (const auto& r : path.returns) prod *= r.gross;
  CHECK(std::fabs(path.final_value() - prod) / prod < 1e-12);

  CHECK_THROWS_AS(run_backtest(f, first, {5, 5}, {}), RangeError);
  CHECK_THROWS_AS(run_backtest(f, first, {0, 5}, {}), RangeError);
  CHECK_THROWS_AS(run_backtest(f, first, {1, 300}, {}), RangeError);
}

TEST_CASE("run_backtest: no look-ahead") {
  std::mt19937_64 rng(5);
  auto a = oracle::random_walk(rng, 60, 0.02), b = oracle::random_walk(rng, 60, 0.02);
  const auto base = frame_from_closes({a, b});
  Recorder r1;
  const auto rep1 = run_backtest(base, r1, {1, 60}, {});
  for (std::size_t t = 10; t < 60; t += 13) {
    auto a2 = a;
    a2[t] *= 3.0;
    const auto tweaked = frame_from_closes({a2, b});
    Recorder r2;
    const auto rep2 = run_backtest(tweaked, r2, {1, 60}, {});
    // decision for day t uses history through t-1
    for (std::size_t d = 1; d <= t; ++d) CHECK(rep2.weights[d - 1].weights == rep1.weights[d - 1].weights);
  }
  Peeker peek;
  CHECK_THROWS_AS(run_backtest(base, peek, {1, 10}, {}), RangeError);
}

TEST_CASE("report emission") {
  const auto f = frame_from_closes({{1, 1.1, 1.0, 1.2}, {1, 0.95, 1.05, 1.0}});
  baselines::CrpStrategy crp;
  MetricConfig cfg{252, 0.01, 0.002};
  const auto rep = run_backtest(f, crp, {1, 4}, cfg);
  const auto j = nlohmann::json::parse(report_json(rep));
  CHECK(j.at("ar_pct").get<double>() == rep.ar_pct);
  CHECK(j.at("mdd_pct").get<double>() == rep.mdd_pct);
  CHECK(j.at("final_value").get<double>() == rep.final_value());
  CHECK(j.contains("sharpe"));
  CHECK(j.at("config").at("cost_rate").get<double>() == 0.002);
  const std::string csv = equity_csv(rep);
  CHECK(csv.rfind("date,value,return\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
