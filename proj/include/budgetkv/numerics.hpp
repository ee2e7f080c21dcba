#pragma once

#include <cstddef>
#include <vector>

#include "budgetkv/errors.hpp"

namespace budgetkv {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Vector matvec(const Matrix& m, const Vector& v);  // m * v
Vector vecmat(const Vector& v, const Matrix& m);  // v^T * m, row-vector result
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& v);
Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector scaled(const Vector& v, double s);
Vector relu(Vector v);
Vector normalized(const Vector& v);

// Numerically stable softmax (max-subtraction). Rejects empty or
// non-finite input.
Vector softmax(const Vector& logits);

// a.b / (|a||b|), clamped to [-1, 1]. Rejects zero vectors.
double cosine_similarity(const Vector& a, const Vector& b);

// Largest singular value via power iteration on m^T m, started from the
// normalized all-ones vector so results are reproducible. Stops once the
// estimate moves by less than tol * estimate on consecutive iterations;
// throws ConvergenceError (carrying the last estimate) after 10,000
// iterations.
double largest_singular_value(const Matrix& m, double tol = 1e-10);

}  // namespace budgetkv
