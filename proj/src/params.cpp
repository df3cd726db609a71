#include "masaat/params.hpp"

#include <cmath>

#include "masaat/errors.hpp"

namespace masaat::nn {

void ParameterSet::add(const std::string& name, Tensor value) {
  if (!params_.emplace(name, std::move(value)).second) {
    throw ContractError("duplicate parameter name: " + name);
  }
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape), 0.0);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Binding::Binding(Tape& tape, const ParameterSet& params, bool requires_grad) : tape_(&tape) {
  for (const auto& [name, value] : params) vars_.emplace(name, tape.leaf(value, requires_grad));
}

Var Binding::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ContractError("parameter not bound: " + name);
  return it->second;
}

std::map<std::string, Tensor> Binding::gradients() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, var] : vars_) out.emplace(name, tape_->grad(var));
  return out;
}

}  // namespace masaat::nn
