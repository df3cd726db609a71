#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "masaat/autodiff.hpp"
#include "masaat/tensor.hpp"

namespace masaat::nn {

using Rng = std::mt19937_64;

// Named learnable tensors. Ordered by name so iteration (and therefore
// checkpoints and optimizer updates) is deterministic.
class ParameterSet {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return params_.contains(name); }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t count() const;  // total scalar parameters
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::map<std::string, Tensor> params_;
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng);

// Every parameter of a set placed on one tape.
class Binding {
 public:
  Binding(Tape& tape, const ParameterSet& params, bool requires_grad);
  Var operator[](const std::string& name) const;
  Tape& tape() const { return *tape_; }
  // Gradients after tape.backward(); unreached parameters get zeros.
  std::map<std::string, Tensor> gradients() const;

 private:
  Tape* tape_;
  std::map<std::string, Var> vars_;
};

}  // namespace masaat::nn
