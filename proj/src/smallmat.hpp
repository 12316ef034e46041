#pragma once

// Dense n x n helpers for the handful of tiny matrices the affine families need.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "weakform/error.hpp"

namespace weakform::smallmat {

struct Mat {
  std::size_t n = 0;
  std::vector<double> a;  // row-major

  explicit Mat(std::size_t size = 0, double diag = 0.0) : n(size), a(size * size, 0.0) {
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] = diag;
  }
  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

inline Mat operator*(const Mat& x, const Mat& y) {
  Mat r(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t k = 0; k < x.n; ++k)
      for (std::size_t j = 0; j < x.n; ++j) r(i, j) += x(i, k) * y(k, j);
  return r;
}

inline Mat scaled(Mat x, double c) {
  for (double& v : x.a) v *= c;
  return x;
}

inline double norm1(const Mat& x) {
  double m = 0.0;
  for (std::size_t j = 0; j < x.n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.n; ++i) s += std::abs(x(i, j));
    m = std::max(m, s);
  }
  return m;
}

// Scaling and squaring with a Taylor series; accurate to roundoff for the
// modest norms scenario generators produce.
inline Mat expm(const Mat& x) {
  int squarings = 0;
  double nrm = norm1(x);
  while (nrm > 0.5) {
    nrm *= 0.5;
    ++squarings;
  }
  const Mat y = scaled(x, std::ldexp(1.0, -squarings));
  Mat result(x.n, 1.0), term(x.n, 1.0);
  for (int k = 1; k <= 20; ++k) {
    term = scaled(term * y, 1.0 / k);
    for (std::size_t i = 0; i < result.a.size(); ++i) result.a[i] += term.a[i];
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

// Gauss-Jordan with partial pivoting; returns the determinant through `det`.
inline Mat inverse(const Mat& x, double* det = nullptr) {
  const std::size_t n = x.n;
  Mat a = x, inv(n, 1.0);
  double d = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (a(piv, c) == 0.0) throw PreconditionError("singular matrix");
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(c, j), a(piv, j));
        std::swap(inv(c, j), inv(piv, j));
      }
      d = -d;
    }
    const double p = a(c, c);
    d *= p;
    for (std::size_t j = 0; j < n; ++j) {
      a(c, j) /= p;
      inv(c, j) /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a(r, j) -= f * a(c, j);
        inv(r, j) -= f * inv(c, j);
      }
    }
  }
  if (det) *det = d;
  return inv;
}

}  // namespace weakform::smallmat
