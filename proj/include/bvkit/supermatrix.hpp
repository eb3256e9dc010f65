#ifndef BVKIT_SUPERMATRIX_HPP
#define BVKIT_SUPERMATRIX_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bvkit/hbar.hpp"
#include "bvkit/linalg.hpp"

namespace bvkit {

/// Named generator with integer ghost degree; parity is ghost mod 2.
struct Generator {
  std::string name;
  int ghost = 0;

  int parity() const { return ((ghost % 2) + 2) % 2; }
  bool odd() const { return parity() == 1; }
  friend bool operator==(const Generator& a, const Generator& b) { return a.name == b.name && a.ghost == b.ghost; }
};

inline long superdimension(const std::vector<Generator>& basis) {
  long s = 0;
  for (const auto& g : basis) s += g.odd() ? -1 : 1;
  return s;
}

struct OddBlockSingular : std::domain_error {
  using std::domain_error::domain_error;
};

/// Matrix whose rows and columns are labelled by graded generators.
template <class T>
class SuperMatrix {
 public:
  SuperMatrix(std::vector<Generator> rows, std::vector<Generator> cols)
      : rows_(std::move(rows)), cols_(std::move(cols)), m_(rows_.size(), cols_.size()) {}
  SuperMatrix(std::vector<Generator> rows, std::vector<Generator> cols, Matrix<T> m)
      : rows_(std::move(rows)), cols_(std::move(cols)), m_(std::move(m)) {
    if (m_.rows() != rows_.size() || m_.cols() != cols_.size()) throw std::invalid_argument("supermatrix shape");
  }

  static SuperMatrix identity(const std::vector<Generator>& basis) {
    return SuperMatrix(basis, basis, Matrix<T>::identity(basis.size()));
  }

  const std::vector<Generator>& row_generators() const { return rows_; }
  const std::vector<Generator>& col_generators() const { return cols_; }
  const Matrix<T>& matrix() const { return m_; }
  T& operator()(std::size_t r, std::size_t c) { return m_(r, c); }
  const T& operator()(std::size_t r, std::size_t c) const { return m_(r, c); }

  /// Sub-block selected by row and column parity (0 even, 1 odd).
  Matrix<T> parity_block(int row_parity, int col_parity) const {
    auto ri = indices(rows_, row_parity);
    auto ci = indices(cols_, col_parity);
    Matrix<T> b(ri.size(), ci.size());
    for (std::size_t r = 0; r < ri.size(); ++r)
      for (std::size_t c = 0; c < ci.size(); ++c) b(r, c) = m_(ri[r], ci[c]);
    return b;
  }

  bool parity_preserving() const { return parity_block(0, 1).is_zero() && parity_block(1, 0).is_zero(); }

  friend SuperMatrix operator*(const SuperMatrix& a, const SuperMatrix& b) {
    if (a.cols_.size() != b.rows_.size()) throw std::invalid_argument("supermatrix composition shape");
    for (std::size_t k = 0; k < a.cols_.size(); ++k)
      if (a.cols_[k].parity() != b.rows_[k].parity()) throw std::invalid_argument("supermatrix composition parity");
    return SuperMatrix(a.rows_, b.cols_, a.m_ * b.m_);
  }

 private:
  static std::vector<std::size_t> indices(const std::vector<Generator>& g, int parity) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < g.size(); ++k)
      if (g[k].parity() == parity) out.push_back(k);
    return out;
  }

  std::vector<Generator> rows_;
  std::vector<Generator> cols_;
  Matrix<T> m_;
};

/// Adjugate via cofactors; only ring operations plus exact division inside determinants.
template <class T>
Matrix<T> adjugate(const Matrix<T>& d) {
  const std::size_t n = d.rows();
  Matrix<T> adj(n, n);
  if (n == 1) {
    adj(0, 0) = ScalarTraits<T>::one();
    return adj;
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      Matrix<T> minor(n - 1, n - 1);
      for (std::size_t i = 0, mi = 0; i < n; ++i) {
        if (i == r) continue;
        for (std::size_t j = 0, mj = 0; j < n; ++j) {
          if (j == c) continue;
          minor(mi, mj++) = d(i, j);
        }
        ++mi;
      }
      T cof = determinant(minor);
      adj(c, r) = ((r + c) % 2 == 0) ? cof : -cof;
    }
  return adj;
}

/// Ber m = det(A - B D^{-1} C) / det D, computed as det(det(D) A - B adj(D) C) / det(D)^{p+1}.
template <class T>
T berezinian(const SuperMatrix<T>& m) {
  Matrix<T> A = m.parity_block(0, 0), B = m.parity_block(0, 1), C = m.parity_block(1, 0), D = m.parity_block(1, 1);
  if (A.rows() != A.cols() || D.rows() != D.cols()) throw std::invalid_argument("berezinian: blocks not square");
  T detD = determinant(D);
  if (ScalarTraits<T>::is_zero(detD)) throw OddBlockSingular("odd block singular");
  const std::size_t p = A.rows();
  if (p == 0) return ScalarTraits<T>::one() / detD;
  Matrix<T> schur = A.scaled(detD) - B * adjugate(D) * C;
  T num = determinant(schur);
  T den = ScalarTraits<T>::one();
  for (std::size_t k = 0; k <= p; ++k) den = den * detD;
  return num / den;
}

}  // namespace bvkit

#endif  // BVKIT_SUPERMATRIX_HPP
