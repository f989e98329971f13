#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "glyphnet/error.hpp"

namespace glyphnet {

/// Rank-4 extent in (batch, channels, height, width) order.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const noexcept { return n * c * h * w; }
  /// Elements per batch entry.
  std::size_t sample_size() const noexcept { return c * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense row-major (N,C,H,W) array. Storage is float for the model; the
/// double instantiation exists for gradient verification.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{0});
  /// Throws ShapeError when data.size() != shape.size().
  BasicTensor(Shape shape, std::vector<T> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[offset(n, c, h, w)];
  }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[offset(n, c, h, w)];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  T operator[](std::size_t i) const noexcept { return data_[i]; }

  /// The contiguous C*H*W block of batch entry n.
  std::span<T> sample(std::size_t n) noexcept {
    return std::span<T>(data_).subspan(n * shape_.sample_size(), shape_.sample_size());
  }
  std::span<const T> sample(std::size_t n) const noexcept {
    return std::span<const T>(data_).subspan(n * shape_.sample_size(), shape_.sample_size());
  }

  /// Same data, new shape of equal size.
  BasicTensor reshaped(Shape shape) const;

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const BasicTensor&) const = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

/// Row-major rows x cols matrix; the carrier after the conv stack is flattened.
template <typename T>
class BasicMatrix {
 public:
  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::span<T> row(std::size_t r) noexcept { return std::span<T>(data_).subspan(r * cols_, cols_); }
  std::span<const T> row(std::size_t r) const noexcept {
    return std::span<const T>(data_).subspan(r * cols_, cols_);
  }

  template <typename U>
  BasicMatrix<U> cast() const {
    return BasicMatrix<U>(rows_, cols_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const BasicMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<float>;

/// (N,C,H,W) -> N x (C*H*W), values unchanged.
template <typename T>
BasicMatrix<T> flatten(const BasicTensor<T>& t);

/// Inverse of flatten for a known per-sample shape.
template <typename T>
BasicTensor<T> unflatten(const BasicMatrix<T>& m, Shape shape);

/// Throws NonFiniteError naming `what` if any value is NaN or Inf.
template <typename T>
void require_finite(std::span<const T> values, std::string_view what);

template <typename T>
void require_finite(const BasicTensor<T>& t, std::string_view what) {
  require_finite(t.data(), what);
}

template <typename T>
void require_finite(const BasicMatrix<T>& m, std::string_view what) {
  require_finite(m.data(), what);
}

}  // namespace glyphnet
