#ifndef BVKIT_COMPLEX1D_HPP
#define BVKIT_COMPLEX1D_HPP

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bvkit/kernel1d.hpp"
#include "bvkit/linalg.hpp"
#include "bvkit/poly.hpp"
#include "bvkit/scalar.hpp"

namespace bvkit {

struct RetractionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankDecisionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double matrix_tolerance(bool exact, double scale) { return exact ? 0.0 : 1e-12 * std::max(1.0, scale); }

template <class T>
Matrix<T> kron_identity(const Matrix<T>& g, std::size_t copies) {
  const std::size_t n = g.rows();
  Matrix<T> out(n * copies, n * copies);
  for (std::size_t k = 0; k < copies; ++k) out.set_block(k * n, k * n, g);
  return out;
}

/// [[0, X], [Y, 0]] with blocks of size a and b.
template <class T>
Matrix<T> antidiagonal(const Matrix<T>& x, const Matrix<T>& y) {
  Matrix<T> out(x.rows() + y.rows(), x.cols() + y.cols());
  out.set_block(0, y.cols(), x);
  out.set_block(x.rows(), 0, y);
  return out;
}

template <class T>
Matrix<T> block_diagonal(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> out(a.rows() + b.rows(), a.cols() + b.cols());
  out.set_block(0, 0, a);
  out.set_block(a.rows(), a.cols(), b);
  return out;
}

}  // namespace detail

/// Finite cochain complex concentrated in degrees 0 and 1 with a nondegenerate pairing against its dual.
/// Vectors are laid out as [degree 0 | degree 1]; dual vectors as [dual degree 0 | dual degree 1],
/// where dual degree 0 pairs with degree 1 and dual degree 1 pairs with degree 0.
template <class T>
struct CochainComplex {
  std::size_t dim0 = 0, dim1 = 0;
  Matrix<T> d;
  Matrix<T> pairing;

  std::size_t size() const { return dim0 + dim1; }
  Matrix<T> dual_d() const {
    return -(inverse(pairing, detail::matrix_tolerance(ScalarTraits<T>::exact, 1.0)) * d.transpose() * pairing);
  }
};

/// Maximal violation of the retraction identities on both halves of a doubled retraction.
struct RetractionResiduals {
  double pi = 0, homotopy = 0, kk = 0, ki = 0, pk = 0, chain = 0;
  double max() const { return std::max({pi, homotopy, kk, ki, pk, chain}); }
};

/// Doubled retraction big ⇝ small: the primary maps and their adjoints on the dual complexes.
template <class T>
struct Retraction {
  CochainComplex<T> big, small;
  Matrix<T> i, p, K;
  Matrix<T> i_dual, p_dual, K_dual;

  /// Maps of the doubled complex big ⊕ big^∨ ⇝ small ⊕ small^∨.
  Matrix<T> doubled_i() const { return detail::block_diagonal(i, i_dual); }
  Matrix<T> doubled_p() const { return detail::block_diagonal(p, p_dual); }
  Matrix<T> doubled_K() const { return detail::block_diagonal(K, K_dual); }

  RetractionResiduals residuals() const {
    RetractionResiduals r;
    auto half = [&](const Matrix<T>& d, const Matrix<T>& ds, const Matrix<T>& ii, const Matrix<T>& pp,
                    const Matrix<T>& kk) {
      const auto id = Matrix<T>::identity(ii.rows());
      r.pi = std::max(r.pi, (pp * ii - Matrix<T>::identity(ii.cols())).max_abs());
      r.homotopy = std::max(r.homotopy, (d * kk + kk * d - (id - ii * pp)).max_abs());
      r.kk = std::max(r.kk, (kk * kk).max_abs());
      r.ki = std::max(r.ki, (kk * ii).max_abs());
      r.pk = std::max(r.pk, (pp * kk).max_abs());
      r.chain = std::max(r.chain, std::max((d * ii - ii * ds).max_abs(), (pp * d - ds * pp).max_abs()));
    };
    half(big.d, small.d, i, p, K);
    half(big.dual_d(), small.dual_d(), i_dual, p_dual, K_dual);
    return r;
  }

  /// The composite big ⇝ next.small.
  Retraction compose(const Retraction& next) const {
    if (next.big.size() != small.size()) throw std::invalid_argument("retraction composition shape mismatch");
    Retraction r;
    r.big = big;
    r.small = next.small;
    r.i = i * next.i;
    r.p = next.p * p;
    r.K = K + i * next.K * p;
    r.i_dual = i_dual * next.i_dual;
    r.p_dual = next.p_dual * p_dual;
    r.K_dual = K_dual + i_dual * next.K_dual * p_dual;
    return r;
  }

  double scale() const { return std::max({i.max_abs(), p.max_abs(), K.max_abs(), big.d.max_abs(), 1.0}); }
};

/// Completes (i, p, K) by adjoints under the pairings and checks every identity.
template <class T>
Retraction<T> make_retraction(CochainComplex<T> big, CochainComplex<T> small, Matrix<T> i, Matrix<T> p, Matrix<T> K) {
  const double tol = detail::matrix_tolerance(ScalarTraits<T>::exact, 1.0);
  Retraction<T> r;
  r.big = std::move(big);
  r.small = std::move(small);
  const auto bb_inv = inverse(r.big.pairing, tol);
  const auto bs_inv = inverse(r.small.pairing, tol);
  r.i_dual = bb_inv * p.transpose() * r.small.pairing;
  r.p_dual = bs_inv * i.transpose() * r.big.pairing;
  r.K_dual = -(bb_inv * K.transpose() * r.big.pairing);
  r.i = std::move(i);
  r.p = std::move(p);
  r.K = std::move(K);
  const double s = r.scale();
  const double bound = detail::matrix_tolerance(ScalarTraits<T>::exact, s * s);
  const auto res = r.residuals();
  if (res.max() > bound) throw RetractionFailure("retraction identities violated (residual " + std::to_string(res.max()) + ")");
  return r;
}

/// Circle cut into N edges with cochains valued in an n-dimensional space twisted by the holonomy A = Ad_U.
template <class T>
struct PolygonComplex {
  std::size_t N = 1, n = 0;
  std::vector<Rational> t;  // t_0 = 0 < ... < t_{N-1} < 1
  Matrix<T> A, G;

  static PolygonComplex make(std::size_t N, Matrix<T> A, Matrix<T> G = {}, std::vector<Rational> positions = {}) {
    PolygonComplex c;
    if (N < 1) throw std::invalid_argument("polygon needs at least one vertex");
    c.N = N;
    c.n = A.rows();
    if (A.cols() != c.n) throw std::invalid_argument("holonomy must be square");
    c.A = std::move(A);
    c.G = G.rows() == 0 ? Matrix<T>::identity(c.n) : std::move(G);
    if (c.G.rows() != c.n || c.G.cols() != c.n) throw std::invalid_argument("metric shape mismatch");
    if (positions.empty())
      for (std::size_t k = 0; k < N; ++k) positions.push_back(Rational(static_cast<long>(k), static_cast<long>(N)));
    if (positions.size() != N || sgn(positions[0]) != 0) throw std::invalid_argument("vertex positions must start at 0");
    for (std::size_t k = 0; k < N; ++k) {
      const Rational next = k + 1 < N ? positions[k + 1] : Rational(1);
      if (!(positions[k] < next)) throw std::invalid_argument("vertex positions must increase inside [0,1)");
    }
    c.t = std::move(positions);
    const double tol = detail::matrix_tolerance(ScalarTraits<T>::exact, c.A.max_abs() * c.A.max_abs());
    if ((c.G - c.G.transpose()).max_abs() > tol) throw std::invalid_argument("metric must be symmetric");
    if ((c.A.transpose() * c.G * c.A - c.G).max_abs() > tol) throw std::invalid_argument("holonomy must preserve the metric");
    c.A_inv_ = inverse(c.A, tol);
    return c;
  }

  Rational position(std::size_t k) const { return k < N ? t[k] : Rational(1); }
  Rational delta(std::size_t k) const { return position(k + 1) - t[k]; }
  std::size_t size() const { return 2 * n * N; }
  std::size_t vertex(std::size_t k, std::size_t a = 0) const { return k * n + a; }
  std::size_t edge(std::size_t k, std::size_t a = 0) const { return n * N + k * n + a; }
  const Matrix<T>& A_inverse() const { return A_inv_; }

  /// A^q for the sheet q of the universal cover.
  Matrix<T> twist(long q) const {
    Matrix<T> m = Matrix<T>::identity(n);
    for (long s = 0; s < std::abs(q); ++s) m = m * (q > 0 ? A : A_inv_);
    return m;
  }
  /// Base index and sheet of a vertex or edge index on the universal cover.
  std::pair<std::size_t, long> cover(long m) const {
    const long NN = static_cast<long>(N);
    long q = m >= 0 ? m / NN : -((-m + NN - 1) / NN);
    return {static_cast<std::size_t>(m - q * NN), q};
  }

  /// Coboundary on degree-0 cochains, (dx)_k = x_{k+1} − x_k with x_N = A x_0.
  std::vector<T> coboundary(const std::vector<T>& x) const {
    if (x.size() != n * N) throw std::invalid_argument("coboundary expects a degree-0 cochain");
    std::vector<T> full(size(), ScalarTraits<T>::zero());
    std::copy(x.begin(), x.end(), full.begin());
    auto y = coboundary_matrix().apply(full);
    return std::vector<T>(y.begin() + static_cast<long>(n * N), y.end());
  }

  Matrix<T> coboundary_matrix() const {
    Matrix<T> d(size(), size());
    const auto id = Matrix<T>::identity(n);
    for (std::size_t k = 0; k < N; ++k) {
      auto [b, q] = cover(static_cast<long>(k) + 1);
      d.set_block(edge(k), vertex(b), d.block(edge(k), vertex(b), n, n) + twist(q));
      d.set_block(edge(k), vertex(k), d.block(edge(k), vertex(k), n, n) - id);
    }
    return d;
  }

  /// Dual coboundary, (d^∨y)_{k−1,k} = y_k − y_{k−1} with y_{−1} = A^{-1} y_{N−1}.
  Matrix<T> dual_coboundary_matrix() const {
    Matrix<T> d(size(), size());
    const auto id = Matrix<T>::identity(n);
    for (std::size_t k = 0; k < N; ++k) {
      auto [b, q] = cover(static_cast<long>(k) - 1);
      d.set_block(edge(k), vertex(k), d.block(edge(k), vertex(k), n, n) + id);
      d.set_block(edge(k), vertex(b), d.block(edge(k), vertex(b), n, n) - twist(q));
    }
    return d;
  }

  /// Intersection pairing: vertices against dual edges, edges against dual vertices, through the metric.
  Matrix<T> pairing_matrix() const {
    const auto g = detail::kron_identity(G, N);
    return detail::antidiagonal(g, g);
  }

  CochainComplex<T> complex() const { return {n * N, n * N, coboundary_matrix(), pairing_matrix()}; }

 private:
  Matrix<T> A_inv_;
};

/// Aggregation merging the edges adjacent to vertex k+1 (mod N), with the new vertex placed at fraction kappa.
template <class T>
Retraction<T> aggregation(const PolygonComplex<T>& c, std::size_t k, const Rational& kappa) {
  if (c.N < 2) throw std::invalid_argument("aggregation needs at least two vertices");
  if (k >= c.N) throw std::invalid_argument("aggregation vertex out of range");
  if (kappa < 0 || kappa > 1) throw std::invalid_argument("kappa must lie in [0,1]");
  const std::size_t N = c.N, n = c.n;
  const auto small = PolygonComplex<T>::make(N - 1, c.A, c.G);
  const T ka = ScalarTraits<T>::from_rational(kappa);
  const T kb = ScalarTraits<T>::from_rational(Rational(1) - kappa);
  const auto id = Matrix<T>::identity(n);

  // cover index of the old vertex matching new vertex j
  auto sigma = [&](long j) {
    auto [j0, q] = small.cover(j);
    long s = static_cast<long>(j0);
    if (k == N - 1 || j0 >= k + 1) s += 1;
    return q * static_cast<long>(N) + s;
  };
  const std::size_t jm = k == N - 1 ? N - 2 : k;  // merged new edge

  Matrix<T> p(small.size(), c.size()), i(c.size(), small.size()), K(c.size(), c.size());
  auto add = [&](Matrix<T>& m, std::size_t r, std::size_t col, const Matrix<T>& b) {
    m.set_block(r, col, m.block(r, col, n, n) + b);
  };

  for (std::size_t j = 0; j + 1 < N; ++j) {
    auto [vb, vq] = c.cover(sigma(static_cast<long>(j)));
    add(p, small.vertex(j), c.vertex(vb), c.twist(vq));
    add(i, c.vertex(vb), small.vertex(j), c.twist(-vq));
    for (long m = sigma(static_cast<long>(j)); m < sigma(static_cast<long>(j) + 1); ++m) {
      auto [eb, eq] = c.cover(m);
      add(p, small.edge(j), c.edge(eb), c.twist(eq));
    }
    if (j != jm) add(i, c.edge(vb), small.edge(j), c.twist(-vq));
  }

  // removed vertex at cover index k+1 and the two merged edges at cover indices k, k+1
  auto [rb, rq] = c.cover(static_cast<long>(k) + 1);
  auto [nb, nq] = small.cover(static_cast<long>(jm) + 1);
  add(i, c.vertex(rb), small.vertex(jm), c.twist(-rq).scaled(kb));
  add(i, c.vertex(rb), small.vertex(nb), (c.twist(-rq) * c.twist(nq)).scaled(ka));
  add(i, c.edge(k), small.edge(jm), id.scaled(ka));
  add(i, c.edge(rb), small.edge(jm), c.twist(-rq).scaled(kb));
  add(K, c.vertex(rb), c.edge(k), c.twist(-rq).scaled(kb));
  add(K, c.vertex(rb), c.edge(rb), id.scaled(-ka));

  return make_retraction(c.complex(), small.complex(), std::move(i), std::move(p), std::move(K));
}

namespace detail {

struct KernelSplit {
  Matrix<double> kernel, complement;
};

/// Kernel of m and its complement by singular values, with a relative threshold.
inline KernelSplit svd_split(const Matrix<double>& m, double threshold) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double scale = std::max(1.0, s.size() ? s(0) : 0.0);
  std::vector<long> ker, comp;
  for (long c = 0; c < static_cast<long>(m.cols()); ++c) {
    const double v = c < s.size() ? s(c) : 0.0;
    if (v >= threshold * scale && v < 1e3 * threshold * scale)
      throw RankDecisionFailure("singular value " + std::to_string(v) + " too close to the rank threshold");
    (v < threshold * scale ? ker : comp).push_back(c);
  }
  KernelSplit out{Matrix<double>(m.cols(), ker.size()), Matrix<double>(m.cols(), comp.size())};
  for (std::size_t r = 0; r < m.cols(); ++r) {
    for (std::size_t j = 0; j < ker.size(); ++j) out.kernel(r, j) = svd.matrixV()(static_cast<long>(r), ker[j]);
    for (std::size_t j = 0; j < comp.size(); ++j) out.complement(r, j) = svd.matrixV()(static_cast<long>(r), comp[j]);
  }
  return out;
}

inline Matrix<Rational> kernel_basis(const Matrix<Rational>& m, double) { return nullspace(m); }
inline Matrix<double> kernel_basis(const Matrix<double>& m, double threshold) { return svd_split(m, threshold).kernel; }

}  // namespace detail

/// Minimal retraction of the one-edge complex onto its cohomology H = g_U ⊕ g_U.
template <class T>
Retraction<T> minimal_retraction(const PolygonComplex<T>& c, double threshold = 1e-9) {
  if (c.N != 1) throw std::invalid_argument("minimal retraction needs N = 1");
  const std::size_t n = c.n;
  const auto dm = c.A - Matrix<T>::identity(n);
  const Matrix<T> Q = detail::kernel_basis(dm, threshold);
  const std::size_t r = Q.cols();
  const Matrix<T> QtG = Q.transpose() * c.G;
  const Matrix<T> W = detail::kernel_basis(QtG, threshold);
  const double tol = detail::matrix_tolerance(ScalarTraits<T>::exact, 1.0);
  const Matrix<T> M = QtG * Q;
  const Matrix<T> P = inverse(M, tol) * QtG;

  Matrix<T> i(2 * n, 2 * r), p(2 * r, 2 * n), K(2 * n, 2 * n);
  i.set_block(0, 0, Q);
  i.set_block(n, r, Q);
  p.set_block(0, 0, P);
  p.set_block(r, n, P);
  if (W.cols() > 0) {
    const Matrix<T> WtG = W.transpose() * c.G;
    K.set_block(0, n, W * inverse(WtG * dm * W, tol) * WtG);
  }
  CochainComplex<T> h{r, r, Matrix<T>(2 * r, 2 * r), detail::antidiagonal(M, M)};
  return make_retraction(c.complex(), std::move(h), std::move(i), std::move(p), std::move(K));
}

/// Piecewise-polynomial g-valued form on the polygon: a 0-form and a 1-form per component,
/// plus point masses sitting at the vertices (used by the dual copy only).
struct TwistedForm {
  std::vector<PiecewiseForm> zero, one;
  std::vector<std::vector<Rational>> mass;  // [component][vertex]

  static TwistedForm zeros(std::size_t n, std::size_t N) {
    TwistedForm f;
    f.zero.assign(n, PiecewiseForm{0, std::vector<Poly1>(N)});
    f.one.assign(n, PiecewiseForm{1, std::vector<Poly1>(N)});
    f.mass.assign(n, std::vector<Rational>(N, Rational(0)));
    return f;
  }
  TwistedForm& operator+=(const TwistedForm& o) {
    for (std::size_t a = 0; a < zero.size(); ++a)
      for (std::size_t k = 0; k < zero[a].pieces.size(); ++k) {
        zero[a].pieces[k] += o.zero[a].pieces[k];
        one[a].pieces[k] += o.one[a].pieces[k];
        mass[a][k] += o.mass[a][k];
      }
    return *this;
  }
  TwistedForm scaled(const Rational& s) const {
    TwistedForm f = *this;
    for (std::size_t a = 0; a < f.zero.size(); ++a)
      for (std::size_t k = 0; k < f.zero[a].pieces.size(); ++k) {
        f.zero[a].pieces[k] = f.zero[a].pieces[k] * Poly1(s);
        f.one[a].pieces[k] = f.one[a].pieces[k] * Poly1(s);
        f.mass[a][k] *= s;
      }
    return f;
  }
  friend TwistedForm operator+(TwistedForm a, const TwistedForm& b) { return a += b; }
  friend TwistedForm operator-(TwistedForm a, const TwistedForm& b) { return a += b.scaled(Rational(-1)); }
  friend bool operator==(const TwistedForm&, const TwistedForm&) = default;
  bool is_zero() const { return *this == zeros(zero.size(), zero.empty() ? 0 : zero[0].pieces.size()); }
};

/// Retraction of quasi-periodic piecewise-polynomial forms onto cochains by linear interpolation,
/// evaluation/edge integration and the explicit homotopy, together with its adjoint on the dual copy.
class PolygonRetraction {
 public:
  using Vec = std::vector<Rational>;

  explicit PolygonRetraction(PolygonComplex<Rational> c) : c_(std::move(c)) {
    const auto res = verify();
    if (res.max() != 0) throw RetractionFailure("continuum retraction identities violated");
  }

  const PolygonComplex<Rational>& complex() const { return c_; }
  TwistedForm zero_form() const { return TwistedForm::zeros(c_.n, c_.N); }

  /// Linear interpolation of vertex values and uniform spreading of edge values.
  TwistedForm i(const Vec& x) const {
    auto f = zero_form();
    const auto xN = c_.A.apply(slice(x, c_.vertex(0)));
    for (std::size_t k = 0; k < c_.N; ++k) {
      const Rational tl = c_.t[k], tr = c_.position(k + 1), dl = c_.delta(k);
      const auto right = k + 1 < c_.N ? slice(x, c_.vertex(k + 1)) : xN;
      for (std::size_t a = 0; a < c_.n; ++a) {
        f.zero[a].pieces[k] = Poly1::from_coeffs({(x[c_.vertex(k, a)] * tr - right[a] * tl) / dl,
                                                  (right[a] - x[c_.vertex(k, a)]) / dl});
        f.one[a].pieces[k] = Poly1(x[c_.edge(k, a)] / dl);
      }
    }
    return f;
  }

  /// Vertex values (from the right) and edge integrals.
  Vec p(const TwistedForm& f) const {
    Vec x(c_.size(), Rational(0));
    for (std::size_t k = 0; k < c_.N; ++k)
      for (std::size_t a = 0; a < c_.n; ++a) {
        x[c_.vertex(k, a)] = f.zero[a].pieces[k](c_.t[k]);
        x[c_.edge(k, a)] = f.one[a].pieces[k].integrate(c_.t[k], c_.position(k + 1));
      }
    return x;
  }

  /// K g = ∫_{t_k}^t g − (t − t_k)/Δ_k ∫_k g on each edge.
  TwistedForm K(const TwistedForm& f) const {
    auto out = zero_form();
    for (std::size_t k = 0; k < c_.N; ++k)
      for (std::size_t a = 0; a < c_.n; ++a) {
        const Rational tl = c_.t[k], tr = c_.position(k + 1);
        const Poly1 G = f.one[a].pieces[k].antiderivative();
        const Poly1 lin = Poly1::from_coeffs({-tl, Rational(1)}) * Poly1(f.one[a].pieces[k].integrate(tl, tr) / c_.delta(k));
        out.zero[a].pieces[k] = G - Poly1(G(tl)) - lin;
      }
    return out;
  }

  /// de Rham differential; jumps of the 0-form at the vertices become point masses.
  TwistedForm d(const TwistedForm& f) const {
    auto out = zero_form();
    const auto left0 = c_.A_inverse().apply(values_at(f, c_.N - 1, Rational(1)));
    for (std::size_t k = 0; k < c_.N; ++k) {
      const auto left = k == 0 ? left0 : values_at(f, k - 1, c_.t[k]);
      for (std::size_t a = 0; a < c_.n; ++a) {
        out.one[a].pieces[k] = f.zero[a].pieces[k].derivative();
        out.mass[a][k] = f.zero[a].pieces[k](c_.t[k]) - left[a];
      }
    }
    return out;
  }

  /// Adjoint of p: step 0-forms from dual vertices, point masses from dual edges.
  TwistedForm i_dual(const Vec& y) const {
    auto f = zero_form();
    for (std::size_t k = 0; k < c_.N; ++k)
      for (std::size_t a = 0; a < c_.n; ++a) {
        f.zero[a].pieces[k] = Poly1(y[c_.vertex(k, a)]);
        f.mass[a][k] = y[c_.edge(k, a)];
      }
    return f;
  }

  /// Adjoint of i: edge averages and hat-function moments plus masses.
  Vec p_dual(const TwistedForm& f) const {
    Vec y(c_.size(), Rational(0));
    Vec wrap(c_.n, Rational(0));
    for (std::size_t k = 0; k < c_.N; ++k) {
      const Rational tl = c_.t[k], tr = c_.position(k + 1), dl = c_.delta(k);
      const Poly1 down = Poly1::from_coeffs({tr / dl, Rational(-1) / dl});
      const Poly1 up = Poly1::from_coeffs({-tl / dl, Rational(1) / dl});
      for (std::size_t a = 0; a < c_.n; ++a) {
        y[c_.vertex(k, a)] = f.zero[a].pieces[k].integrate(tl, tr) / dl;
        y[c_.edge(k, a)] += (down * f.one[a].pieces[k]).integrate(tl, tr) + f.mass[a][k];
        const Rational upper = (up * f.one[a].pieces[k]).integrate(tl, tr);
        if (k + 1 < c_.N) y[c_.edge(k + 1, a)] += upper;
        else wrap[a] = upper;
      }
    }
    const auto back = c_.A_inverse().apply(wrap);
    for (std::size_t a = 0; a < c_.n; ++a) y[c_.edge(0, a)] += back[a];
    return y;
  }

  /// Minus the adjoint of K: −(∫_s^{t_{k+1}} h − ∫_k (t − t_k)/Δ_k h) on each edge.
  TwistedForm K_dual(const TwistedForm& f) const {
    auto out = zero_form();
    for (std::size_t k = 0; k < c_.N; ++k)
      for (std::size_t a = 0; a < c_.n; ++a) {
        const Rational tl = c_.t[k], tr = c_.position(k + 1);
        const Poly1 H = f.one[a].pieces[k].antiderivative();
        const Poly1 up = Poly1::from_coeffs({-tl / c_.delta(k), Rational(1) / c_.delta(k)});
        const Rational ck = (up * f.one[a].pieces[k]).integrate(tl, tr);
        out.zero[a].pieces[k] = H - Poly1(H(tr) - ck);
      }
    return out;
  }

  /// ∫⟨primary, dual⟩ over the circle, masses paired with vertex values.
  Rational pairing(const TwistedForm& primary, const TwistedForm& dual) const {
    Rational s(0);
    for (std::size_t k = 0; k < c_.N; ++k) {
      const Rational tl = c_.t[k], tr = c_.position(k + 1);
      for (std::size_t a = 0; a < c_.n; ++a)
        for (std::size_t b = 0; b < c_.n; ++b) {
          if (sgn(c_.G(a, b)) == 0) continue;
          Rational v = (primary.zero[a].pieces[k] * dual.one[b].pieces[k]).integrate(tl, tr) +
                       (primary.one[a].pieces[k] * dual.zero[b].pieces[k]).integrate(tl, tr) +
                       primary.zero[a].pieces[k](tl) * dual.mass[b][k];
          s += c_.G(a, b) * v;
        }
    }
    return s;
  }

  /// Residuals of the identities on a fixed family of test forms and all basis cochains.
  RetractionResiduals verify() const {
    RetractionResiduals r;
    auto flag = [](double& slot, bool ok) { if (!ok) slot = 1; };
    const auto& C = c_.complex();
    const auto Dd = C.dual_d();
    for (std::size_t e = 0; e < c_.size(); ++e) {
      Vec x(c_.size(), Rational(0));
      x[e] = 1;
      flag(r.pi, p(i(x)) == x);
      flag(r.pi, p_dual(i_dual(x)) == x);
      flag(r.ki, K(i(x)).is_zero());
      flag(r.ki, K_dual(i_dual(x)).is_zero());
      flag(r.chain, d(i(x)) == i(C.d.apply(x)));
      flag(r.chain, d(i_dual(x)) == i_dual(Dd.apply(x)));
    }
    auto check = [&](const TwistedForm& f, bool dual) {
      const TwistedForm kf = dual ? K_dual(f) : K(f);
      const TwistedForm ip = dual ? i_dual(p_dual(f)) : i(p(f));
      flag(r.homotopy, d(kf) + (dual ? K_dual(d(f)) : K(d(f))) == f - ip);
      flag(r.kk, (dual ? K_dual(kf) : K(kf)).is_zero());
      flag(r.pk, (dual ? p_dual(kf) : p(kf)) == Vec(c_.size(), Rational(0)));
      flag(r.chain, (dual ? p_dual(d(f)) : p(d(f))) == (dual ? Dd : C.d).apply(dual ? p_dual(f) : p(f)));
    };
    for (const auto& f : primary_samples()) check(f, false);
    for (const auto& f : dual_samples()) check(f, true);
    return r;
  }

  /// Continuous quasi-periodic 0-forms (interpolants plus bubbles) and monomial 1-forms.
  std::vector<TwistedForm> primary_samples() const {
    std::vector<TwistedForm> out;
    for (std::size_t e = 0; e < c_.size(); ++e) {
      Vec x(c_.size(), Rational(0));
      x[e] = 1;
      out.push_back(i(x));
    }
    for (std::size_t k = 0; k < c_.N; ++k)
      for (std::size_t a = 0; a < c_.n; ++a)
        for (int j = 0; j < 3; ++j) {
          auto f = zero_form();
          const Poly1 bubble = Poly1::from_coeffs({-c_.t[k], Rational(1)}) * Poly1::from_coeffs({c_.position(k + 1), Rational(-1)});
          f.zero[a].pieces[k] = bubble * monomial(j);
          out.push_back(f);
          auto g = zero_form();
          g.one[a].pieces[k] = monomial(j);
          out.push_back(g);
        }
    return out;
  }

  /// Discontinuous monomial 0-forms, monomial 1-forms and unit point masses.
  std::vector<TwistedForm> dual_samples() const {
    std::vector<TwistedForm> out;
    for (std::size_t k = 0; k < c_.N; ++k)
      for (std::size_t a = 0; a < c_.n; ++a) {
        for (int j = 0; j < 3; ++j) {
          auto f = zero_form();
          f.zero[a].pieces[k] = monomial(j);
          out.push_back(f);
          auto g = zero_form();
          g.one[a].pieces[k] = monomial(j);
          out.push_back(g);
        }
        auto m = zero_form();
        m.mass[a][k] = 1;
        out.push_back(m);
      }
    return out;
  }

 private:
  static Poly1 monomial(int j) {
    std::vector<Rational> c(static_cast<std::size_t>(j) + 1, Rational(0));
    c.back() = 1;
    return Poly1::from_coeffs(std::move(c));
  }
  Vec slice(const Vec& x, std::size_t start) const { return Vec(x.begin() + static_cast<long>(start), x.begin() + static_cast<long>(start + c_.n)); }
  Vec values_at(const TwistedForm& f, std::size_t piece, const Rational& t) const {
    Vec v(c_.n);
    for (std::size_t a = 0; a < c_.n; ++a) v[a] = f.zero[a].pieces[piece](t);
    return v;
  }

  PolygonComplex<Rational> c_;
};

inline PolygonRetraction polygon_retraction(PolygonComplex<Rational> c) { return PolygonRetraction(std::move(c)); }

}  // namespace bvkit

#endif  // BVKIT_COMPLEX1D_HPP
