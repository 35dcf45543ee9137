#ifndef DHN_MATRIX_HPP
#define DHN_MATRIX_HPP

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace dhn {

// Dense row-major matrix. Small sizes only; no expression machinery.
template <class T>
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c) {}
  Matrix(int r, int c, T fill)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  T& operator()(int i, int j) {
    assert(i >= 0 && i < rows && j >= 0 && j < cols);
    return data[static_cast<std::size_t>(i) * cols + j];
  }
  const T& operator()(int i, int j) const {
    assert(i >= 0 && i < rows && j >= 0 && j < cols);
    return data[static_cast<std::size_t>(i) * cols + j];
  }

  std::span<T> row(int i) {
    return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const T> row(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }

  static Matrix identity(int n) {
    Matrix m(n, n, T{});
    for (int i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }
};

using Matd = Matrix<double>;

}  // namespace dhn

#endif
