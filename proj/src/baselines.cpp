#include "masaat/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "masaat/errors.hpp"

namespace masaat::baselines {

std::vector<double> project_simplex(std::span<const double> v) {
  if (v.empty()) throw ContractError("project_simplex: empty vector");
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericDomainError("project_simplex: non-finite input");
  }
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::max(v[i] - theta, 0.0);
  // Renormalise away the rounding left by the threshold.
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

PortfolioVector eg_update(const PortfolioVector& w, std::span<const double> x, double eta) {
  if (x.size() != w.size()) throw ContractError("eg_update: size mismatch");
  if (eta == 0.0) return w;
  double growth = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) growth += w[i] * x[i];
  std::vector<double> next(w.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    next[i] = w[i] * std::exp(eta * x[i] / growth);
    total += next[i];
  }
  for (double& v : next) v /= total;
  return PortfolioVector{std::move(next)};
}

PamrStep pamr_step(const PortfolioVector& w, std::span<const double> x, const PamrParams& params) {
  if (x.size() != w.size()) throw ContractError("pamr: size mismatch");
  const std::size_t n = w.size();
  double growth = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    growth += w[i] * x[i];
    mean += x[i];
  }
  mean /= static_cast<double>(n);
  const double loss = std::max(0.0, growth - params.epsilon);
  double denom = 0.0;
  for (double xi : x) denom += (xi - mean) * (xi - mean);
  if (loss == 0.0 || denom == 0.0) return PamrStep{w, 0.0, false};

  double tau = 0.0;
  switch (params.variant) {
    case PamrVariant::Pamr0: tau = loss / denom; break;
    case PamrVariant::Pamr1: tau = std::min(params.aggressiveness, loss / denom); break;
    case PamrVariant::Pamr2: tau = loss / (denom + 0.5 / params.aggressiveness); break;
  }
  std::vector<double> raw(n);
  bool inside = true;
  double raw_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = w[i] - tau * (x[i] - mean);
    inside = inside && raw[i] >= 0.0;
    raw_total += raw[i];
  }
  auto projected = project_simplex(raw);
  const bool active = !inside || std::fabs(raw_total - 1.0) > 1e-12;
  return PamrStep{PortfolioVector{std::move(projected)}, tau, active};
}

PortfolioVector pamr_update(const PortfolioVector& w, std::span<const double> x, double epsilon) {
  return pamr_step(w, x, PamrParams{epsilon, PamrVariant::Pamr0, 0.0}).weights;
}

CrpStrategy::CrpStrategy(PortfolioVector fixed) : fixed_(std::move(fixed)), uniform_(false) {
  fixed_.validate();
}

void CrpStrategy::reset(std::size_t num_assets) {
  if (uniform_) {
    fixed_ = PortfolioVector::uniform(num_assets);
  } else if (fixed_.size() != num_assets) {
    throw ConfigError("crp: fixed weights have " + std::to_string(fixed_.size()) +
                      " entries for " + std::to_string(num_assets) + " assets");
  }
}

PortfolioVector CrpStrategy::decide(const backtest::HistoryView&) { return fixed_; }

void OnlineStrategy::reset(std::size_t num_assets) {
  current_ = PortfolioVector::uniform(num_assets);
  started_ = false;
}

PortfolioVector OnlineStrategy::decide(const backtest::HistoryView& history) {
  const std::size_t t = history.last_day();
  if (started_ && t == last_day_ + 1) current_ = update(current_, history.relative_closes(t));
  started_ = true;
  last_day_ = t;
  return current_;
}

EgStrategy::EgStrategy(double eta) : eta_(eta) {
  if (!(eta > 0.0)) throw ConfigError("eg: learning rate must be positive");
}

PortfolioVector EgStrategy::update(const PortfolioVector& w, std::span<const double> x) {
  return eg_update(w, x, eta_);
}

PamrStrategy::PamrStrategy(PamrParams params) : params_(params) {
  if (params.epsilon < 0.0) throw ConfigError("pamr: epsilon must be >= 0");
  if (params.variant != PamrVariant::Pamr0 && !(params.aggressiveness > 0.0)) {
    throw ConfigError("pamr: aggressiveness must be positive");
  }
}

PortfolioVector PamrStrategy::update(const PortfolioVector& w, std::span<const double> x) {
  return pamr_step(w, x, params_).weights;
}

}  // namespace masaat::baselines
