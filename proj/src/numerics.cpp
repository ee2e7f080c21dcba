#include "budgetkv/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace budgetkv {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows_ * cols_ != data_.size()) {
    throw ContractViolation("matrix data size does not match rows*cols");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector matvec(const Matrix& m, const Vector& v) {
  if (v.size() != m.cols()) {
    throw ContractViolation("matvec: vector length does not match matrix columns");
  }
  Vector out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += m(r, c) * v[c];
    out[r] = acc;
  }
  return out;
}

Vector vecmat(const Vector& v, const Matrix& m) {
  if (v.size() != m.rows()) {
    throw ContractViolation("vecmat: vector length does not match matrix rows");
  }
  Vector out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double x = v[r];
    if (x == 0.0) continue;
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += x * m(r, c);
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ContractViolation("matmul: inner dimensions do not match");
  }
  Matrix out(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double x = a(i, k);
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += x * b(k, j);
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  return out;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw ContractViolation("dot: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

Vector add(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ContractViolation("add: length mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector sub(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ContractViolation("sub: length mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector scaled(const Vector& v, double s) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * s;
  return out;
}

Vector relu(Vector v) {
  for (double& x : v) x = std::max(0.0, x);
  return v;
}

Vector normalized(const Vector& v) {
  const double n = norm2(v);
  if (n == 0.0) throw ContractViolation("normalized: zero vector");
  return scaled(v, 1.0 / n);
}

Vector softmax(const Vector& logits) {
  if (logits.empty()) throw ContractViolation("softmax: empty input");
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double x : logits) {
    if (!std::isfinite(x)) throw ContractViolation("softmax: non-finite input");
    max_logit = std::max(max_logit, x);
  }
  Vector out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_logit);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw ContractViolation("cosine_similarity: length mismatch");
  }
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) {
    throw ContractViolation("cosine_similarity: zero vector");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

namespace {

// One multiply by m^T m without forming it.
Vector gram_apply(const Matrix& m, const Vector& v, Vector& scratch) {
  scratch.assign(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += m(r, c) * v[c];
    scratch[r] = acc;
  }
  Vector out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double w = scratch[r];
    if (w == 0.0) continue;
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m(r, c) * w;
  }
  return out;
}

}  // namespace

double largest_singular_value(const Matrix& m, double tol) {
  if (m.empty()) throw ContractViolation("largest_singular_value: empty matrix");
  if (!(tol > 0.0)) throw ContractViolation("largest_singular_value: tol must be > 0");

  const std::size_t n = m.cols();
  Vector v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  Vector scratch;

  constexpr int kMaxIter = 10000;
  double sigma_prev = -1.0;
  int settled = 0;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    Vector u = gram_apply(m, v, scratch);
    double nu = norm2(u);
    if (nu == 0.0) {
      // The all-ones start can land exactly in the null space. Restart
      // from basis vectors until one survives; a zero matrix returns 0.
      bool restarted = false;
      for (std::size_t i = 0; i < n && !restarted; ++i) {
        Vector e(n, 0.0);
        e[i] = 1.0;
        u = gram_apply(m, e, scratch);
        nu = norm2(u);
        if (nu != 0.0) {
          v = std::move(e);
          restarted = true;
        }
      }
      if (!restarted) return 0.0;
    }
    // Rayleigh quotient of m^T m at unit v is |m v|^2.
    double sigma = std::sqrt(std::max(0.0, dot(v, u)));
    if (sigma_prev >= 0.0 && std::abs(sigma - sigma_prev) <=
        tol * std::max(sigma, std::numeric_limits<double>::min())) {
      if (++settled >= 2) return sigma;
    } else {
      settled = 0;
    }
    sigma_prev = sigma;
    for (std::size_t i = 0; i < n; ++i) v[i] = u[i] / nu;
  }
  throw ConvergenceError("largest_singular_value: power iteration did not settle",
                         sigma_prev);
}

}  // namespace budgetkv
