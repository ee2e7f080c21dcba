#include "budgetkv/rng.hpp"

#include <cmath>

namespace budgetkv {

double Rng::normal() {
  if (have_cached_) {
    have_cached_ = false;
    return cached_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  cached_ = r * std::sin(theta);
  have_cached_ = true;
  return r * std::cos(theta);
}

Vector Rng::gaussian_vector(std::size_t dim, double sigma) {
  Vector v(dim);
  for (double& x : v) x = sigma * normal();
  return v;
}

Matrix Rng::gaussian_matrix(std::size_t rows, std::size_t cols, double sigma) {
  Matrix m(rows, cols, 0.0);
  for (double& x : m.data()) x = sigma * normal();
  return m;
}

Vector Rng::unit_vector(std::size_t dim) {
  while (true) {
    Vector v = gaussian_vector(dim);
    const double n = norm2(v);
    if (n > 1e-12) return scaled(v, 1.0 / n);
  }
}

}  // namespace budgetkv
