#include "jmee/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace jmee {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  for (auto d : shape)
    if (d == 0)
      throw DimensionError("tensor dimensions must be positive, got " +
                           shape_string(shape));
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_product(shape_) != data_.size())
    throw DimensionError("shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_product(shape_)) +
                         " values, got " + std::to_string(data_.size()));
}

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::matrix(
    std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw DimensionError("matrix needs at least one row");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_string(shape_));
  return shape_[axis];
}

std::size_t Tensor::rows() const {
  if (rank() == 1) return 1;
  if (rank() == 2) return shape_[0];
  throw DimensionError("rows() needs rank <= 2, got " + shape_string(shape_));
}

std::size_t Tensor::cols() const {
  if (rank() == 1) return shape_[0];
  if (rank() == 2) return shape_[1];
  throw DimensionError("cols() needs rank <= 2, got " + shape_string(shape_));
}

double Tensor::item() const {
  if (data_.size() != 1)
    throw DimensionError("item() on non-scalar tensor " + shape_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

}  // namespace jmee
