#include "nklm/tensor.hpp"

#include <cmath>

namespace nklm {

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  Tensor2 t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Tensor2::from_rows: ragged rows");
    std::size_t j = 0;
    for (double v : row) t.at(i, j++) = v;
    ++i;
  }
  return t;
}

Tensor2 Tensor2::uniform(std::size_t rows, std::size_t cols, double lo, double hi, Rng& rng) {
  Tensor2 t(rows, cols);
  for (double& v : t.data_) v = rng.uniform(lo, hi);
  return t;
}

Vec Tensor2::col(std::size_t c) const {
  if (c >= cols_) throw ShapeError("Tensor2::col: index " + std::to_string(c) +
                                   " out of range (cols=" + std::to_string(cols_) + ")");
  Vec v(rows_);
  for (std::size_t r = 0; r < rows_; ++r) v[r] = at(r, c);
  return v;
}

void Tensor2::set_col(std::size_t c, const Vec& v) {
  if (c >= cols_ || v.size() != rows_) throw ShapeError("Tensor2::set_col: shape mismatch");
  for (std::size_t r = 0; r < rows_; ++r) at(r, c) = v[r];
}

void Tensor2::add_col(std::size_t c, const Vec& v, double scale) {
  if (c >= cols_ || v.size() != rows_) throw ShapeError("Tensor2::add_col: shape mismatch");
  for (std::size_t r = 0; r < rows_; ++r) at(r, c) += scale * v[r];
}

void Tensor2::fill(double v) {
  for (double& x : data_) x = v;
}

void Tensor2::scale(double s) {
  for (double& x : data_) x *= s;
}

bool Tensor2::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

Vec matvec(const Tensor2& a, const Vec& x) {
  if (x.size() != a.cols())
    throw ShapeError("matvec: A is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     ", x has " + std::to_string(x.size()));
  Vec y(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* row = a.data() + r * a.cols();
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

Vec matvec_t(const Tensor2& a, const Vec& x) {
  if (x.size() != a.rows())
    throw ShapeError("matvec_t: A is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     ", x has " + std::to_string(x.size()));
  Vec y(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* row = a.data() + r * a.cols();
    const double xr = x[r];
    for (std::size_t c = 0; c < a.cols(); ++c) y[c] += row[c] * xr;
  }
  return y;
}

void add_outer(Tensor2& a, const Vec& y, const Vec& x, double scale) {
  if (y.size() != a.rows() || x.size() != a.cols()) throw ShapeError("add_outer: shape mismatch");
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double* row = a.data() + r * a.cols();
    const double yr = scale * y[r];
    for (std::size_t c = 0; c < a.cols(); ++c) row[c] += yr * x[c];
  }
}

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const Vec& x, Vec& y) {
  if (x.size() != y.size()) throw ShapeError("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double squared_l2(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

void l2_normalize(Vec& v) {
  const double n = std::sqrt(squared_l2(v));
  if (n > 0.0)
    for (double& x : v) x /= n;
}

Vec concat(const Vec& a, const Vec& b) {
  Vec r;
  r.reserve(a.size() + b.size());
  r.insert(r.end(), a.begin(), a.end());
  r.insert(r.end(), b.begin(), b.end());
  return r;
}

Vec concat(const Vec& a, const Vec& b, const Vec& c) {
  Vec r;
  r.reserve(a.size() + b.size() + c.size());
  r.insert(r.end(), a.begin(), a.end());
  r.insert(r.end(), b.begin(), b.end());
  r.insert(r.end(), c.begin(), c.end());
  return r;
}

bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace nklm
