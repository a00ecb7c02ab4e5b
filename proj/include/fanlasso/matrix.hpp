#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fanlasso/common.hpp"

namespace fanlasso {

// Dense row-major matrix of doubles. Deliberately minimal: shape, element
// access, and the handful of products the library needs. Row-major layout is
// part of the contract (serialization and the python bindings rely on it).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& storage() const { return data_; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A * B
Matrix multiply(const Matrix& a, const Matrix& b);
// C = A^T * B  (A is m x n, B is m x k, result n x k)
Matrix multiply_at_b(const Matrix& a, const Matrix& b);
// C = A * B^T  (A is m x n, B is k x n, result m x k)
Matrix multiply_a_bt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// y = A^T x for a single row vector x (used per sample in prediction paths).
void multiply_at_vec(const Matrix& a, std::span<const double> x, std::span<double> out);

double max_abs(const Matrix& a);
bool has_nonfinite(const Matrix& a);
bool has_nonfinite(std::span<const double> v);

}  // namespace fanlasso
