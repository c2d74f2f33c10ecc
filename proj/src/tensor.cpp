#include "kae/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "kae/errors.hpp"

namespace kae {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<Storage>()) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor shape " + shape_str(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values but got " +
                     std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({}, {value}, requires_grad);
}

Tensor::Storage& Tensor::storage() const {
  if (!impl_) throw Error("use of undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return storage().shape; }
std::size_t Tensor::numel() const { return storage().data.size(); }

std::span<const double> Tensor::data() const { return storage().data; }
std::span<double> Tensor::mutable_data() { return storage().data; }

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " + shape_str(shape()));
  }
  return storage().data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const auto& s = storage();
  return s.data[row * s.shape.back() + col];
}

bool Tensor::requires_grad() const { return storage().requires_grad; }
void Tensor::set_requires_grad(bool flag) { storage().requires_grad = flag; }

bool Tensor::has_grad() const { return !storage().grad.empty(); }

std::span<const double> Tensor::grad() const { return storage().grad; }

std::span<double> Tensor::mutable_grad() {
  auto& s = storage();
  if (s.grad.empty()) s.grad.assign(s.data.size(), 0.0);
  return s.grad;
}

void Tensor::zero_grad() {
  auto& s = storage();
  std::fill(s.grad.begin(), s.grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  const auto& s = storage();
  return Tensor(s.shape, s.data, s.requires_grad);
}

}  // namespace kae
