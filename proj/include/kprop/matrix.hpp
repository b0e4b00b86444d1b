#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kprop {

/// Small dense row-major matrix of doubles.
///
/// Used for the k x k propagation blocks, Gram matrices and common terms.
/// The n x k label matrix has its own type (LabelMatrix) because it carries
/// the per-type row layout.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n, double diagonal = 1.0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double sum() const noexcept;
  double frobenius_norm() const noexcept;
  Matrix transpose() const;
  void fill(double v);

  Matrix& operator+=(const Matrix& other);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);

/// left * middle * left^T
Matrix sandwich(const Matrix& left, const Matrix& middle);

/// y = m * x
void multiply_vector(const Matrix& m, std::span<const double> x, std::span<double> y);

double dot(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace kprop
