#include "kprop/matrix.hpp"

#include <cassert>
#include <cmath>

namespace kprop {

Matrix Matrix::identity(std::size_t n, double diagonal) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = diagonal;
  return m;
}

double Matrix::sum() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Matrix::frobenius_norm() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

void Matrix::fill(double v) {
  for (double& x : data_) x = v;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  assert(rows_ == other.rows_ && cols_ == other.cols_);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.rows());
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const double s = a(i, l);
      if (s == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += s * b(l, j);
    }
  return out;
}

Matrix sandwich(const Matrix& left, const Matrix& middle) {
  return multiply(multiply(left, middle), left.transpose());
}

void multiply_vector(const Matrix& m, std::span<const double> x, std::span<double> y) {
  assert(x.size() == m.cols() && y.size() == m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace kprop
