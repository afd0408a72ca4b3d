#include "gcl/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gcl/errors.hpp"
#include "gcl/simd/kernels.hpp"

namespace gcl {

namespace {

void require_same_length(ConstSpan a, ConstSpan b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": length mismatch " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  }
}

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, Vec data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Mat: data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

double dot(ConstSpan a, ConstSpan b) {
  require_same_length(a, b, "dot");
  return simd::kernels().dot(a.data(), b.data(), a.size());
}

double norm(ConstSpan a) { return std::sqrt(simd::kernels().sum_sq(a.data(), a.size())); }

double cosine(ConstSpan a, ConstSpan b) {
  require_same_length(a, b, "cosine");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateVectorError("cosine: zero-norm input");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Vec l2_normalize(ConstSpan a) {
  const double n = norm(a);
  if (n == 0.0 || a.empty()) throw DegenerateVectorError("l2_normalize: zero-norm input");
  Vec out(a.begin(), a.end());
  simd::kernels().scale(1.0 / n, out.data(), out.size());
  return out;
}

Vec l2_normalize_backward(ConstSpan unit, double raw_norm, ConstSpan dy) {
  require_same_length(unit, dy, "l2_normalize_backward");
  if (raw_norm == 0.0) throw DegenerateVectorError("l2_normalize_backward: zero norm");
  const double proj = dot(unit, dy);
  Vec dx(dy.begin(), dy.end());
  simd::kernels().axpy(-proj, unit.data(), dx.data(), dx.size());
  simd::kernels().scale(1.0 / raw_norm, dx.data(), dx.size());
  return dx;
}

void axpy(double alpha, ConstSpan x, MutSpan y) {
  if (x.size() != y.size()) throw DimensionError("axpy: length mismatch");
  simd::kernels().axpy(alpha, x.data(), y.data(), x.size());
}

void scale_inplace(double alpha, MutSpan x) { simd::kernels().scale(alpha, x.data(), x.size()); }

Vec finite_diff_grad(const std::function<double(ConstSpan)>& f, ConstSpan x, double h) {
  if (!(h > 0.0)) throw OracleError("finite_diff_grad: step must be positive");
  Vec probe(x.begin(), x.end());
  Vec grad(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + h;
    const double up = f(probe);
    probe[k] = orig - h;
    const double down = f(probe);
    probe[k] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw OracleError("finite_diff_grad: non-finite value at coordinate " + std::to_string(k));
    }
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  Mat out(a.rows(), b.cols());
  const auto& k = simd::kernels();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* dst = out.row(i).data();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double s = a(i, p);
      if (s != 0.0) k.axpy(s, b.row(p).data(), dst, b.cols());
    }
  }
  return out;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) throw DimensionError("matmul_nt: column counts differ");
  Mat out(a.rows(), b.rows());
  const auto& k = simd::kernels();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out(i, j) = k.dot(a.row(i).data(), b.row(j).data(), a.cols());
    }
  }
  return out;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) throw DimensionError("matmul_tn: row counts differ");
  Mat out(a.cols(), b.cols());
  const auto& k = simd::kernels();
  for (std::size_t p = 0; p < a.rows(); ++p) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = a(p, i);
      if (s != 0.0) k.axpy(s, b.row(p).data(), out.row(i).data(), b.cols());
    }
  }
  return out;
}

Mat transpose(const Mat& a) {
  Mat out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

double rel_error(ConstSpan a, ConstSpan b, double floor) {
  require_same_length(a, b, "rel_error");
  double diff = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) diff += (a[k] - b[k]) * (a[k] - b[k]);
  const double denom = std::max({norm(a), norm(b), floor});
  return std::sqrt(diff) / denom;
}

}  // namespace gcl
