#pragma once

// Dense vector/matrix primitives in double precision.
//
// Vectors are plain std::vector<double>; functions take std::span so rows of
// a Mat can be passed without copying. The heavy loops route through the
// runtime-selected kernels in gcl/simd/kernels.hpp.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace gcl {

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

/// Row-major dense matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  Mat(std::size_t rows, std::size_t cols, Vec data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  MutSpan row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  ConstSpan row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Vec& data() { return data_; }
  const Vec& data() const { return data_; }

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec data_;
};

double dot(ConstSpan a, ConstSpan b);
double norm(ConstSpan a);

/// a·b / (‖a‖‖b‖) clamped to [-1, 1]. Throws DegenerateVectorError on a zero vector.
double cosine(ConstSpan a, ConstSpan b);

/// a / ‖a‖. Throws DegenerateVectorError on a zero vector.
Vec l2_normalize(ConstSpan a);

/// Vector-Jacobian product of y = x/‖x‖: returns (dy - y (y·dy)) / ‖x‖.
Vec l2_normalize_backward(ConstSpan unit, double raw_norm, ConstSpan dy);

/// y += alpha * x
void axpy(double alpha, ConstSpan x, MutSpan y);
void scale_inplace(double alpha, MutSpan x);

/// Central differences (f(x+h e_k) - f(x-h e_k)) / 2h for every coordinate.
/// Throws OracleError if f returns a non-finite value.
Vec finite_diff_grad(const std::function<double(ConstSpan)>& f, ConstSpan x, double h = 1e-5);

Mat matmul(const Mat& a, const Mat& b);
/// a · bᵀ
Mat matmul_nt(const Mat& a, const Mat& b);
/// aᵀ · b
Mat matmul_tn(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);

/// ‖a - b‖ / max(‖a‖, ‖b‖, floor); the metric used by every gradient check.
double rel_error(ConstSpan a, ConstSpan b, double floor = 1e-12);

}  // namespace gcl
