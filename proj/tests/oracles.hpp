#pragma once

// Independent reference implementations used only by tests. None of these
// call into the code paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <random>
#include <span>
#include <vector>

#include "masaat/autodiff.hpp"
#include "masaat/dc.hpp"
#include "masaat/params.hpp"

namespace oracle {

// Re-derives the running extremes from scratch at every step: O(T^2).
inline std::vector<masaat::dc::Event> dc_events_bruteforce(const std::vector<double>& p, double th) {
  using masaat::dc::Direction;
  std::vector<masaat::dc::Event> events;
  int trend = 0;              // 0 undetermined, +1 up, -1 down
  std::size_t segment = 0;    // first index of the current trend segment
  for (std::size_t t = 1; t < p.size(); ++t) {
    // extremes over [segment, t-1], first occurrence
    std::size_t lo = segment, hi = segment;
    for (std::size_t k = segment; k < t; ++k) {
      if (p[k] < p[lo]) lo = k;
      if (p[k] > p[hi]) hi = k;
    }
    if (trend != 1 && p[t] / p[lo] >= 1.0 + th) {
      events.push_back({Direction::Up, t, lo});
      trend = 1;
      segment = t;
    } else if (trend != -1 && p[t] / p[hi] <= 1.0 - th) {
      events.push_back({Direction::Down, t, hi});
      trend = -1;
      segment = t;
    }
  }
  return events;
}

inline std::vector<double> random_walk(std::mt19937_64& rng, std::size_t n, double vol) {
  std::normal_distribution<double> z(0.0, vol);
  std::vector<double> p(n);
  p[0] = 100.0;
  for (std::size_t t = 1; t < n; ++t) p[t] = p[t - 1] * std::exp(z(rng));
  return p;
}

// All pairs t1 < t2, clamped at zero, in percent.
inline double mdd_all_pairs(std::span<const double> c) {
  double worst = 0.0;
  for (std::size_t a = 0; a < c.size(); ++a)
    for (std::size_t b = a + 1; b < c.size(); ++b) worst = std::max(worst, (c[a] - c[b]) / c[a]);
  return worst * 100.0;
}

inline long double ar_long(long double c1, long double ct, long double days, long double tyr) {
  return (std::pow(ct / c1, tyr / days) - 1.0L) * 100.0L;
}

inline long double sr_long(long double ar_dec, long double rf, std::span<const double> r, long double tyr) {
  long double mean = 0.0L;
  for (double x : r) mean += x;
  mean /= static_cast<long double>(r.size());
  long double ss = 0.0L;
  for (double x : r) ss += (x - mean) * (x - mean);
  const long double sigma = std::sqrt(tyr / static_cast<long double>(r.size() - 1) * ss);
  return (ar_dec - rf) / sigma;
}

// Dense grid over the simplex (N <= 3), nearest point to v.
inline std::vector<double> simplex_grid_nearest(const std::vector<double>& v, double step = 1e-3) {
  const std::size_t n = v.size();
  const long cells = std::lround(1.0 / step);
  std::vector<double> best(n, 0.0);
  double best_d = std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<double>& w) {
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) d += (w[i] - v[i]) * (w[i] - v[i]);
    if (d < best_d) {
      best_d = d;
      best = w;
    }
  };
  if (n == 1) {
    consider({1.0});
  } else if (n == 2) {
    for (long a = 0; a <= cells; ++a) consider({a * step, 1.0 - a * step});
  } else {
    for (long a = 0; a <= cells; ++a)
      for (long b = 0; a + b <= cells; ++b) consider({a * step, b * step, 1.0 - (a + b) * step});
  }
  return best;
}

// Central differences of f over every parameter entry.
using ScalarFn = std::function<double(const masaat::nn::ParameterSet&)>;

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

inline GradCheck finite_difference_check(masaat::nn::ParameterSet params,
                                         const std::map<std::string, masaat::nn::Tensor>& analytic,
                                         const ScalarFn& f, double h = 1e-5) {
  GradCheck out;
  for (auto& [name, tensor] : params) {
    const auto& g = analytic.at(name);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + h;
      const double up = f(params);
      tensor[i] = saved - h;
      const double down = f(params);
      tensor[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      out.max_rel_error = std::max(out.max_rel_error, relative_error(g[i], numeric));
      ++out.checked;
    }
  }
  return out;
}

}  // namespace oracle
