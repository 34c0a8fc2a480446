#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace takead::diffnum {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// Dense fp64 tensor of rank 1 or 2, row-major. Rank-1 tensors behave as a
// single row when an op needs a matrix view.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 2)
      throw ShapeError("tensor rank must be 1 or 2, got " + shape_str(shape_));
    std::size_t n = 1;
    for (auto d : shape_) {
      if (d == 0) throw ShapeError("tensor dims must be positive, got " + shape_str(shape_));
      n *= d;
    }
    data_.assign(n, fill);
  }

  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0) : Tensor(Shape{rows, cols}, fill) {}

  static Tensor vector(std::initializer_list<double> values) {
    Tensor t(Shape{values.size()});
    t.data_.assign(values.begin(), values.end());
    return t;
  }

  static Tensor vector(const std::vector<double>& values) {
    Tensor t(Shape{values.size()});
    t.data_ = values;
    return t;
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, const std::vector<double>& values) {
    Tensor t(rows, cols);
    if (values.size() != rows * cols)
      throw ShapeError("matrix init expects " + std::to_string(rows * cols) + " values, got " +
                       std::to_string(values.size()));
    t.data_ = values;
    return t;
  }

  static Tensor scalar(double v) {
    Tensor t(Shape{1});
    t.data_[0] = v;
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace takead::diffnum
