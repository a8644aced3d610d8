#pragma once

#include <cmath>
#include <initializer_list>
#include <sstream>
#include <vector>

#include "core/common.hpp"

namespace struchis {

// Dense row-major matrix. Vectors are 1xN or Nx1; scalars are 1x1.
template <class T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> d;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), d(size_t(r) * size_t(c), T(0)) {
    if (r < 0 || c < 0) fail(ErrorKind::contract, "Mat: negative dimension");
  }

  static Mat filled(int r, int c, T v) {
    Mat m(r, c);
    for (auto& x : m.d) x = v;
    return m;
  }

  static Mat from_rows(std::initializer_list<std::initializer_list<T>> rs) {
    Mat m(int(rs.size()), rs.size() ? int(rs.begin()->size()) : 0);
    int i = 0;
    for (const auto& row : rs) {
      if (int(row.size()) != m.cols)
        fail(ErrorKind::contract, "Mat::from_rows: ragged rows");
      int j = 0;
      for (T v : row) m.at(i, j++) = v;
      ++i;
    }
    return m;
  }

  T& at(int r, int c) { return d[size_t(r) * size_t(cols) + size_t(c)]; }
  const T& at(int r, int c) const {
    return d[size_t(r) * size_t(cols) + size_t(c)];
  }
  T* row(int r) { return d.data() + size_t(r) * size_t(cols); }
  const T* row(int r) const { return d.data() + size_t(r) * size_t(cols); }

  size_t size() const { return d.size(); }
  bool empty() const { return d.empty(); }
  bool same_shape(const Mat& o) const {
    return rows == o.rows && cols == o.cols;
  }

  bool all_finite() const {
    for (T v : d)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << rows << "x" << cols;
    return os.str();
  }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

template <class To, class From>
Mat<To> cast_mat(const Mat<From>& m) {
  Mat<To> out(m.rows, m.cols);
  for (size_t i = 0; i < m.d.size(); ++i) out.d[i] = To(m.d[i]);
  return out;
}

template <class T>
void shape_check(const Mat<T>& m, int r, int c, const char* where) {
  if (m.rows != r || m.cols != c) {
    std::ostringstream os;
    os << where << ": expected " << r << "x" << c << ", got " << m.shape_str();
    fail(ErrorKind::contract, os.str());
  }
}

}  // namespace struchis
