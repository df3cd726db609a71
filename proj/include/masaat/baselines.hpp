#pragma once

#include <span>
#include <string>
#include <vector>

#include "masaat/backtest.hpp"

namespace masaat::baselines {

using model::PortfolioVector;

// Euclidean projection onto {w >= 0, sum w = 1} (sort-based).
std::vector<double> project_simplex(std::span<const double> v);

// w'_i proportional to w_i * exp(eta * x_i / (w . x)).
PortfolioVector eg_update(const PortfolioVector& w, std::span<const double> x, double eta);

enum class PamrVariant { Pamr0, Pamr1, Pamr2 };

struct PamrParams {
  double epsilon = 0.5;
  PamrVariant variant = PamrVariant::Pamr0;
  double aggressiveness = 500.0;  // C, used by PAMR-1 / PAMR-2
};

struct PamrStep {
  PortfolioVector weights;
  double tau = 0.0;
  bool projection_active = false;  // the simplex projection changed the raw step
};

PamrStep pamr_step(const PortfolioVector& w, std::span<const double> x, const PamrParams& params);
PortfolioVector pamr_update(const PortfolioVector& w, std::span<const double> x, double epsilon);

class CrpStrategy : public backtest::Strategy {
 public:
  CrpStrategy() = default;  // uniform
  explicit CrpStrategy(PortfolioVector fixed);
  std::string name() const override { return "crp"; }
  std::size_t min_history() const override { return 1; }
  void reset(std::size_t num_assets) override;
  PortfolioVector decide(const backtest::HistoryView& history) override;

 private:
  PortfolioVector fixed_;
  bool uniform_ = true;
};

// Shared bookkeeping for strategies that update from yesterday's weights.
class OnlineStrategy : public backtest::Strategy {
 public:
  void reset(std::size_t num_assets) override;
  PortfolioVector decide(const backtest::HistoryView& history) override;

 protected:
  virtual PortfolioVector update(const PortfolioVector& w, std::span<const double> x) = 0;

 private:
  PortfolioVector current_;
  std::size_t last_day_ = 0;
  bool started_ = false;
};

class EgStrategy : public OnlineStrategy {
 public:
  explicit EgStrategy(double eta = 0.05);
  std::string name() const override { return "eg"; }

 protected:
  PortfolioVector update(const PortfolioVector& w, std::span<const double> x) override;

 private:
  double eta_;
};

class PamrStrategy : public OnlineStrategy {
 public:
  explicit PamrStrategy(PamrParams params = {});
  std::string name() const override { return "pamr"; }

 protected:
  PortfolioVector update(const PortfolioVector& w, std::span<const double> x) override;

 private:
  PamrParams params_;
};

}  // namespace masaat::baselines
