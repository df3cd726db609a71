#pragma once

#include <map>
#include <string>

#include "masaat/params.hpp"

namespace masaat::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive moment estimation. `descend` minimises; callers maximising an
// objective pass the negated gradient (see rl_trainer).
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void descend(ParameterSet& params, const std::map<std::string, Tensor>& grads);
  long steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

}  // namespace masaat::nn
