#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "nklm/errors.hpp"
#include "nklm/rng.hpp"

namespace nklm {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. The only tensor rank the model needs;
// vectors are plain std::vector<double>.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2 uniform(std::size_t rows, std::size_t cols, double lo, double hi, Rng& rng);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  Vec col(std::size_t c) const;
  void set_col(std::size_t c, const Vec& v);
  void add_col(std::size_t c, const Vec& v, double scale = 1.0);

  void fill(double v);
  void scale(double s);
  bool all_finite() const;
  bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool operator==(const Tensor2& o) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// y = A x   (A: m x n, x: n)
Vec matvec(const Tensor2& a, const Vec& x);
// y = A^T x (A: m x n, x: m)
Vec matvec_t(const Tensor2& a, const Vec& x);
// A += scale * y x^T
void add_outer(Tensor2& a, const Vec& y, const Vec& x, double scale = 1.0);

double dot(const Vec& a, const Vec& b);
// y += alpha * x
void axpy(double alpha, const Vec& x, Vec& y);
double squared_l2(const Vec& v);
void l2_normalize(Vec& v);

Vec concat(const Vec& a, const Vec& b);
Vec concat(const Vec& a, const Vec& b, const Vec& c);

bool all_finite(const Vec& v);

}  // namespace nklm
