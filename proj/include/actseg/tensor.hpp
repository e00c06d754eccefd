#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace actseg {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A named learnable array with its gradient buffer. values and grad always
/// have element count equal to the product of shape.
struct ParamArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;

  ParamArray() = default;
  ParamArray(std::string name, std::vector<std::size_t> shape);

  std::size_t size() const { return values.size(); }
  void zero_grad();
  /// Throws NumericError naming this parameter if any value is NaN/Inf.
  void check_finite() const;

  bool operator==(const ParamArray& o) const {
    return name == o.name && shape == o.shape && values == o.values;
  }
};

std::size_t shape_size(std::span<const std::size_t> shape);

}  // namespace actseg
