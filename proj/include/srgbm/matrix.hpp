#pragma once

#include <cstddef>
#include <vector>

#include "srgbm/errors.hpp"

namespace srgbm {

// Minimal dense row-major matrix; linear algebra happens behind the
// markov module's implementation.
class Matrix {
 public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double row_sum(std::size_t i) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) acc += (*this)(i, j);
    return acc;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

}  // namespace srgbm
