#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace ecs {

// Dense row-major matrix of doubles. Rows index sequence positions wherever a
// matrix holds per-token vectors.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = in * w   (in: n x k, w: k x m)
inline Matrix matmul(const Matrix& in, const Matrix& w) {
  assert(in.cols() == w.rows());
  Matrix out(in.rows(), w.cols());
  for (std::size_t i = 0; i < in.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < in.cols(); ++k) {
      const double a = in(i, k);
      auto src = w.row(k);
      for (std::size_t j = 0; j < w.cols(); ++j) dst[j] += a * src[j];
    }
  }
  return out;
}

// Single row vector times matrix.
inline std::vector<double> vecmat(std::span<const double> v, const Matrix& w) {
  assert(v.size() == w.rows());
  std::vector<double> out(w.cols(), 0.0);
  for (std::size_t k = 0; k < v.size(); ++k) {
    auto src = w.row(k);
    for (std::size_t j = 0; j < w.cols(); ++j) out[j] += v[k] * src[j];
  }
  return out;
}

}  // namespace ecs
