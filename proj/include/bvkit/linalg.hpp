#ifndef BVKIT_LINALG_HPP
#define BVKIT_LINALG_HPP

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bvkit/scalar.hpp"

namespace bvkit {

struct SingularMatrix : std::domain_error {
  using std::domain_error::domain_error;
};

/// Dense row-major matrix over an arbitrary coefficient ring.
template <class T>
class Matrix {
 public:
  using Traits = ScalarTraits<T>;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows_(r), cols_(c), data_(r * c, Traits::zero()) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t k = 0; k < n; ++k) m(k, k) = Traits::one();
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    Matrix b(nr, nc);
    for (std::size_t r = 0; r < nr; ++r)
      for (std::size_t c = 0; c < nc; ++c) b(r, c) = (*this)(r0 + r, c0 + c);
    return b;
  }
  void set_block(std::size_t r0, std::size_t c0, const Matrix& b) {
    for (std::size_t r = 0; r < b.rows(); ++r)
      for (std::size_t c = 0; c < b.cols(); ++c) (*this)(r0 + r, c0 + c) = b(r, c);
  }

  friend Matrix operator+(Matrix a, const Matrix& b) {
    a.check_same(b);
    for (std::size_t k = 0; k < a.data_.size(); ++k) a.data_[k] = a.data_[k] + b.data_[k];
    return a;
  }
  friend Matrix operator-(Matrix a, const Matrix& b) {
    a.check_same(b);
    for (std::size_t k = 0; k < a.data_.size(); ++k) a.data_[k] = a.data_[k] - b.data_[k];
    return a;
  }
  Matrix operator-() const {
    Matrix m = *this;
    for (auto& x : m.data_) x = -x;
    return m;
  }
  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw std::invalid_argument("matrix product shape mismatch");
    Matrix m(a.rows_, b.cols_);
    for (std::size_t r = 0; r < a.rows_; ++r)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const T& x = a(r, k);
        if (Traits::is_zero(x)) continue;
        for (std::size_t c = 0; c < b.cols_; ++c) m(r, c) = m(r, c) + x * b(k, c);
      }
    return m;
  }
  Matrix scaled(const T& s) const {
    Matrix m = *this;
    for (auto& x : m.data_) x = x * s;
    return m;
  }
  std::vector<T> apply(const std::vector<T>& v) const {
    if (v.size() != cols_) throw std::invalid_argument("matrix-vector shape mismatch");
    std::vector<T> out(rows_, Traits::zero());
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out[r] = out[r] + (*this)(r, c) * v[c];
    return out;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

  bool is_zero() const {
    for (const auto& x : data_)
      if (!Traits::is_zero(x)) return false;
    return true;
  }
  double max_abs() const {
    double m = 0.0;
    for (const auto& x : data_) m = std::max(m, Traits::magnitude(x));
    return m;
  }

  template <class U, class F>
  Matrix<U> map(F f) const {
    Matrix<U> m(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) m(r, c) = f((*this)(r, c));
    return m;
  }

 private:
  void check_same(const Matrix& b) const {
    if (rows_ != b.rows_ || cols_ != b.cols_) throw std::invalid_argument("matrix shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

namespace detail {

template <class T>
std::size_t pick_pivot(const Matrix<T>& m, std::size_t col, std::size_t from, double tol) {
  using Tr = ScalarTraits<T>;
  std::size_t best = m.rows();
  double bestmag = 0.0;
  for (std::size_t r = from; r < m.rows(); ++r) {
    if (Tr::exact) {
      if (!Tr::is_zero(m(r, col))) return r;
    } else {
      double mag = Tr::magnitude(m(r, col));
      if (mag > bestmag && mag > tol) {
        bestmag = mag;
        best = r;
      }
    }
  }
  return best;
}

template <class T>
void swap_rows(Matrix<T>& m, std::size_t a, std::size_t b) {
  if (a == b) return;
  for (std::size_t c = 0; c < m.cols(); ++c) std::swap(m(a, c), m(b, c));
}

}  // namespace detail

/// Determinant: fraction-free Bareiss elimination for exact rings, partial pivoting otherwise.
template <class T>
T determinant(Matrix<T> m) {
  using Tr = ScalarTraits<T>;
  if (m.rows() != m.cols()) throw std::invalid_argument("determinant of non-square matrix");
  const std::size_t n = m.rows();
  if (n == 0) return Tr::one();
  bool negate = false;
  if (Tr::exact) {
    T prev = Tr::one();
    for (std::size_t k = 0; k + 1 < n; ++k) {
      std::size_t p = detail::pick_pivot(m, k, k, 0.0);
      if (p == n) return Tr::zero();
      if (p != k) {
        detail::swap_rows(m, p, k);
        negate = !negate;
      }
      for (std::size_t i = k + 1; i < n; ++i)
        for (std::size_t j = k + 1; j < n; ++j) m(i, j) = (m(i, j) * m(k, k) - m(i, k) * m(k, j)) / prev;
      prev = m(k, k);
    }
    T d = m(n - 1, n - 1);
    return negate ? -d : d;
  }
  T d = Tr::one();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = detail::pick_pivot(m, k, k, 0.0);
    if (p == n) return Tr::zero();
    if (p != k) {
      detail::swap_rows(m, p, k);
      negate = !negate;
    }
    d = d * m(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      if (Tr::is_zero(m(i, k))) continue;
      T f = m(i, k) / m(k, k);
      for (std::size_t j = k; j < n; ++j) m(i, j) = m(i, j) - f * m(k, j);
    }
  }
  return negate ? -d : d;
}

/// Reduced row echelon form in place; returns pivot columns.
template <class T>
std::vector<std::size_t> rref(Matrix<T>& m, double tol = 0.0) {
  using Tr = ScalarTraits<T>;
  std::vector<std::size_t> pivots;
  std::size_t row = 0;
  for (std::size_t col = 0; col < m.cols() && row < m.rows(); ++col) {
    std::size_t p = detail::pick_pivot(m, col, row, tol);
    if (p == m.rows()) {
      if (!Tr::exact)
        for (std::size_t r = row; r < m.rows(); ++r) m(r, col) = Tr::zero();
      continue;
    }
    detail::swap_rows(m, p, row);
    T inv = Tr::one() / m(row, col);
    for (std::size_t c = col; c < m.cols(); ++c) m(row, c) = m(row, c) * inv;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (r == row || Tr::is_zero(m(r, col))) continue;
      T f = m(r, col);
      for (std::size_t c = col; c < m.cols(); ++c) m(r, c) = m(r, c) - f * m(row, c);
    }
    pivots.push_back(col);
    ++row;
  }
  return pivots;
}

template <class T>
std::size_t rank(Matrix<T> m, double tol = 0.0) {
  return rref(m, tol).size();
}

/// Columns spanning the kernel.
template <class T>
Matrix<T> nullspace(Matrix<T> m, double tol = 0.0) {
  using Tr = ScalarTraits<T>;
  auto piv = rref(m, tol);
  std::vector<bool> is_pivot(m.cols(), false);
  for (auto c : piv) is_pivot[c] = true;
  std::vector<std::size_t> free_cols;
  for (std::size_t c = 0; c < m.cols(); ++c)
    if (!is_pivot[c]) free_cols.push_back(c);
  Matrix<T> ns(m.cols(), free_cols.size());
  for (std::size_t k = 0; k < free_cols.size(); ++k) {
    ns(free_cols[k], k) = Tr::one();
    for (std::size_t r = 0; r < piv.size(); ++r) ns(piv[r], k) = -m(r, free_cols[k]);
  }
  return ns;
}

template <class T>
Matrix<T> inverse(const Matrix<T>& a, double tol = 0.0) {
  if (a.rows() != a.cols()) throw std::invalid_argument("inverse of non-square matrix");
  const std::size_t n = a.rows();
  if (n == 0) return a;
  Matrix<T> aug(n, 2 * n);
  aug.set_block(0, 0, a);
  aug.set_block(0, n, Matrix<T>::identity(n));
  auto piv = rref(aug, tol);
  if (piv.size() < n || piv[n - 1] != n - 1) throw SingularMatrix("matrix is singular");
  return aug.block(0, n, n, n);
}

/// Solves a x = b for square invertible a.
template <class T>
Matrix<T> solve(const Matrix<T>& a, const Matrix<T>& b, double tol = 0.0) {
  const std::size_t n = a.rows();
  if (n == 0) return Matrix<T>(0, b.cols());
  Matrix<T> aug(n, n + b.cols());
  aug.set_block(0, 0, a);
  aug.set_block(0, n, b);
  auto piv = rref(aug, tol);
  if (piv.size() < n || piv[n - 1] != n - 1) throw SingularMatrix("matrix is singular");
  return aug.block(0, n, n, b.cols());
}

}  // namespace bvkit

#endif  // BVKIT_LINALG_HPP
