#include "glyphnet/tensor.hpp"

#include <cmath>
#include <string>

namespace glyphnet {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(shape), data_(shape.size(), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError("tensor data has " + std::to_string(data_.size()) + " values, shape " +
                     shape_.str() + " needs " + std::to_string(shape_.size()));
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  if (shape.size() != size()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return BasicTensor(shape, data_);
}

template <typename T>
BasicMatrix<T>::BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data has " + std::to_string(data_.size()) + " values, expected " +
                     std::to_string(rows_ * cols_));
  }
}

template <typename T>
BasicMatrix<T> flatten(const BasicTensor<T>& t) {
  const auto& s = t.shape();
  return BasicMatrix<T>(s.n, s.sample_size(), t.values());
}

template <typename T>
BasicTensor<T> unflatten(const BasicMatrix<T>& m, Shape shape) {
  if (shape.n != m.rows() || shape.sample_size() != m.cols()) {
    throw ShapeError("cannot unflatten " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " into " + shape.str());
  }
  return BasicTensor<T>(shape, std::vector<T>(m.data().begin(), m.data().end()));
}

template <typename T>
void require_finite(std::span<const T> values, std::string_view what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NonFiniteError(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class BasicMatrix<float>;
template class BasicMatrix<double>;
template BasicMatrix<float> flatten(const BasicTensor<float>&);
template BasicMatrix<double> flatten(const BasicTensor<double>&);
template BasicTensor<float> unflatten(const BasicMatrix<float>&, Shape);
template BasicTensor<double> unflatten(const BasicMatrix<double>&, Shape);
template void require_finite(std::span<const float>, std::string_view);
template void require_finite(std::span<const double>, std::string_view);

}  // namespace glyphnet
