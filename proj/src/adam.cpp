#include "masaat/adam.hpp"

#include <cmath>

#include "masaat/errors.hpp"

namespace masaat::nn {

void Adam::descend(ParameterSet& params, const std::map<std::string, Tensor>& grads) {
  ++step_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& [name, value] : params) {
    auto g = grads.find(name);
    if (g == grads.end()) continue;
    if (g->second.shape() != value.shape()) {
      throw ContractError("adam: gradient shape mismatch for " + name);
    }
    auto [mi, _m] = m_.try_emplace(name, value.shape(), 0.0);
    auto [vi, _v] = v_.try_emplace(name, value.shape(), 0.0);
    Tensor& m = mi->second;
    Tensor& v = vi->second;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double gi = g->second[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      value[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
    }
  }
}

}  // namespace masaat::nn
