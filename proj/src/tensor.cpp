#include "masaat/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "masaat/errors.hpp"

namespace masaat::nn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  for (auto d : shape_) {
    if (d == 0) throw ContractError("tensor dimension must be positive: " + shape_str(shape_));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw ContractError("tensor dimension must be positive: " + shape_str(shape_));
  }
  if (shape_size(shape_) != data_.size()) {
    throw ContractError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 1) return 1;
  if (shape_.size() != 2) throw ContractError("expected a matrix, got " + shape_str(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 1) return shape_[0];
  if (shape_.size() != 2) throw ContractError("expected a matrix, got " + shape_str(shape_));
  return shape_[1];
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Tensor& t, const char* where) {
  if (!t.all_finite()) {
    throw NumericDomainError(std::string("non-finite value in ") + where);
  }
}

}  // namespace masaat::nn
