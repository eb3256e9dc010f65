#ifndef BVKIT_POLYGON_BF_HPP
#define BVKIT_POLYGON_BF_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bvkit/complex1d.hpp"
#include "bvkit/linalg.hpp"
#include "bvkit/superpoly.hpp"
#include "bvkit/wick.hpp"

namespace bvkit {

struct NotRegular : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Real Lie algebra with structure constants [e_b, e_c] = f^a_{bc} e_a and an invariant metric.
struct LieAlgebra {
  std::string name;
  std::size_t n = 0;
  std::size_t rank = 0;
  std::vector<Rational> f;
  Matrix<Rational> kappa;

  const Rational& structure(std::size_t a, std::size_t b, std::size_t c) const { return f[(a * n + b) * n + c]; }

  bool is_abelian() const {
    return std::all_of(f.begin(), f.end(), [](const Rational& r) { return sgn(r) == 0; });
  }
  bool orthonormal() const { return kappa == Matrix<Rational>::identity(n); }

  /// (ad_x)_{ab} = f^a_{cb} x^c.
  template <class T>
  Matrix<T> ad(const std::vector<T>& x) const {
    Matrix<T> m(n, n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < n; ++c)
          if (sgn(structure(a, c, b)) != 0) m(a, b) = m(a, b) + ScalarTraits<T>::from_rational(structure(a, c, b)) * x[c];
    return m;
  }
  template <class T>
  std::vector<T> bracket(const std::vector<T>& x, const std::vector<T>& y) const {
    return ad(x).apply(y);
  }

  void validate() const {
    if (f.size() != n * n * n) throw std::invalid_argument("structure constants have the wrong size");
    if (kappa.rows() != n || kappa.cols() != n) throw std::invalid_argument("metric has the wrong size");
    if (!(kappa == kappa.transpose())) throw std::invalid_argument("metric must be symmetric");
    if (sgn(determinant(kappa)) == 0) throw std::invalid_argument("metric must be nondegenerate");
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < n; ++c) {
          if (structure(a, b, c) != -structure(a, c, b)) throw std::invalid_argument("structure constants must be antisymmetric");
          // invariance <[e_b, e_c], e_a> + <e_c, [e_b, e_a]> = 0
          Rational inv(0);
          for (std::size_t d = 0; d < n; ++d) inv += structure(d, b, c) * kappa(d, a) + kappa(c, d) * structure(d, b, a);
          if (sgn(inv) != 0) throw std::invalid_argument("metric is not invariant");
          for (std::size_t e = 0; e < n; ++e) {
            // Jacobi on (e_a, e_b, e_c), component e
            Rational j(0);
            for (std::size_t d = 0; d < n; ++d)
              j += structure(e, a, d) * structure(d, b, c) + structure(e, b, d) * structure(d, c, a) + structure(e, c, d) * structure(d, a, b);
            if (sgn(j) != 0) throw std::invalid_argument("Jacobi identity fails");
          }
        }
  }

  static LieAlgebra abelian(std::size_t n) {
    LieAlgebra l{"abelian", n, n, std::vector<Rational>(n * n * n, Rational(0)), Matrix<Rational>::identity(n)};
    l.validate();
    return l;
  }
  static LieAlgebra su2() {
    LieAlgebra l{"su2", 3, 1, std::vector<Rational>(27, Rational(0)), Matrix<Rational>::identity(3)};
    const int eps[3][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};
    for (const auto& p : eps) {
      l.f[(p[2] * 3 + p[0]) * 3 + p[1]] = 1;
      l.f[(p[2] * 3 + p[1]) * 3 + p[0]] = -1;
    }
    l.validate();
    return l;
  }
};

inline LieAlgebra lie_algebra(const std::string& name, std::size_t abelian_dim = 3) {
  if (name == "su2" || name == "so3") return LieAlgebra::su2();
  if (name == "abelian") return LieAlgebra::abelian(abelian_dim);
  throw std::invalid_argument("unknown Lie algebra " + name);
}

/// Adjoint action Ad_U of the holonomy.
template <class T>
struct Holonomy {
  Matrix<T> Ad;

  static Holonomy from_matrix(const LieAlgebra& l, Matrix<T> m) {
    if (m.rows() != l.n || m.cols() != l.n) throw std::invalid_argument("holonomy has the wrong size");
    const double tol = ScalarTraits<T>::exact ? 0.0 : 1e-12;
    const auto k = l.kappa.template map<T>([](const Rational& r) { return ScalarTraits<T>::from_rational(r); });
    if ((m.transpose() * k * m - k).max_abs() > tol) throw std::invalid_argument("holonomy must preserve the metric");
    for (std::size_t b = 0; b < l.n; ++b)
      for (std::size_t c = 0; c < l.n; ++c) {
        std::vector<T> eb(l.n, ScalarTraits<T>::zero()), ec = eb;
        eb[b] = ScalarTraits<T>::one();
        ec[c] = ScalarTraits<T>::one();
        auto lhs = m.apply(l.bracket(eb, ec));
        auto rhs = l.bracket(m.apply(eb), m.apply(ec));
        for (std::size_t a = 0; a < l.n; ++a)
          if (ScalarTraits<T>::magnitude(lhs[a] - rhs[a]) > tol) throw std::invalid_argument("holonomy must preserve the bracket");
      }
    return {std::move(m)};
  }
  static Holonomy identity(const LieAlgebra& l) { return {Matrix<T>::identity(l.n)}; }
};

/// Matrix exponential by scaling and squaring.
inline Matrix<double> expm(const Matrix<double>& x) {
  const std::size_t n = x.rows();
  int s = 0;
  double norm = x.max_abs() * static_cast<double>(n);
  while (norm > 0.5) {
    norm /= 2;
    ++s;
  }
  const Matrix<double> y = x.scaled(std::ldexp(1.0, -s));
  Matrix<double> sum = Matrix<double>::identity(n), term = sum;
  for (int k = 1; k < 30; ++k) {
    term = (term * y).scaled(1.0 / k);
    sum = sum + term;
  }
  for (int k = 0; k < s; ++k) sum = sum * sum;
  return sum;
}

/// Holonomy of a rotation about an axis in su(2): Ad = exp(angle · ad_axis) for a unit axis.
inline Holonomy<double> su2_rotation(const std::array<double, 3>& axis, double angle) {
  const double r = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (r == 0) throw std::invalid_argument("rotation axis must be nonzero");
  const auto l = LieAlgebra::su2();
  std::vector<double> v{angle * axis[0] / r, angle * axis[1] / r, angle * axis[2] / r};
  return Holonomy<double>::from_matrix(l, expm(l.ad(v)));
}

namespace detail {

inline const std::vector<Rational>& bernoulli_even(std::size_t count) {
  static std::vector<Rational> cache;
  if (cache.size() >= count) return cache;
  std::vector<Rational> b{Rational(1)};
  const std::size_t top = 2 * std::max<std::size_t>(count, 64);
  for (std::size_t m = 1; m <= top; ++m) {
    Rational s(0), binom(1);
    for (std::size_t k = 0; k < m; ++k) {
      s += binom * b[k];
      binom = binom * static_cast<long>(m + 1 - k) / static_cast<long>(k + 1);
    }
    b.push_back(-s / static_cast<long>(m + 1));
  }
  cache.clear();
  for (std::size_t k = 0; 2 * k <= top; ++k) cache.push_back(b[2 * k]);
  return cache;
}

}  // namespace detail

/// Scalar function with its derivative and, when available, exact even Taylor coefficients.
struct ScalarFunction {
  std::string name;
  std::function<Complex(Complex)> f, df;
  std::function<Rational(std::size_t)> taylor;  // coefficient of z^{2m}
  double radius = 0;                             // series used for ‖X‖_F below this
};

/// F(z) = (z/2) coth(z/2).
inline const ScalarFunction& function_F() {
  static const ScalarFunction fn{
      "F",
      [](Complex z) {
        if (std::abs(z) < 1e-3) return 1.0 + z * z / 12.0 - z * z * z * z / 720.0;
        return z / 2.0 / std::tanh(z / 2.0);
      },
      [](Complex z) {
        if (std::abs(z) < 1e-3) return z / 6.0 - z * z * z / 180.0;
        Complex s = std::sinh(z / 2.0);
        return 0.5 / std::tanh(z / 2.0) - z / 4.0 / (s * s);
      },
      [](std::size_t m) -> Rational {
        const auto& b = detail::bernoulli_even(m + 1);
        return b[m] / factorial(2 * m);
      },
      2.5};
  return fn;
}

/// G(z) = (2/z) sinh(z/2).
inline const ScalarFunction& function_G() {
  static const ScalarFunction fn{
      "G",
      [](Complex z) {
        if (std::abs(z) < 1e-3) return 1.0 + z * z / 24.0 + z * z * z * z / 1920.0;
        return 2.0 / z * std::sinh(z / 2.0);
      },
      [](Complex z) {
        if (std::abs(z) < 1e-3) return z / 12.0 + z * z * z / 480.0;
        return std::cosh(z / 2.0) / z - 2.0 * std::sinh(z / 2.0) / (z * z);
      },
      [](std::size_t m) -> Rational {
        Rational p(1);
        for (std::size_t k = 0; k < m; ++k) p /= 4;
        return p / factorial(2 * m + 1);
      },
      8.0};
  return fn;
}

/// (z/2) tanh(z/2): the F of the negative control with coth replaced by tanh.
inline const ScalarFunction& function_F_tanh() {
  static const ScalarFunction fn{
      "F_tanh",
      [](Complex z) { return z / 2.0 * std::tanh(z / 2.0); },
      [](Complex z) {
        Complex c = std::cosh(z / 2.0);
        return 0.5 * std::tanh(z / 2.0) + z / 4.0 / (c * c);
      },
      nullptr,
      0.0};
  return fn;
}

namespace detail {

inline Eigen::MatrixXcd to_eigen(const Matrix<double>& m) {
  Eigen::MatrixXcd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return e;
}

inline Matrix<double> real_part(const Eigen::MatrixXcd& e) {
  Matrix<double> m(e.rows(), e.cols());
  for (long r = 0; r < e.rows(); ++r)
    for (long c = 0; c < e.cols(); ++c) m(r, c) = e(r, c).real();
  return m;
}

inline double frobenius(const Matrix<double>& m) {
  double s = 0;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) s += m(r, c) * m(r, c);
  return std::sqrt(s);
}

/// Even power series sum_m c_m M^{2m} for a real matrix.
inline Matrix<double> even_series(const Matrix<double>& m, const ScalarFunction& fn) {
  const auto m2 = m * m;
  Matrix<double> power = Matrix<double>::identity(m.rows());
  Matrix<double> sum(m.rows(), m.cols());
  for (std::size_t k = 0; k < 60; ++k) {
    const double c = fn.taylor(k).get_d();
    const auto term = power.scaled(c);
    sum = sum + term;
    if (k > 2 && term.max_abs() < 1e-19 * std::max(1.0, sum.max_abs())) break;
    power = power * m2;
  }
  return sum;
}

}  // namespace detail

/// f(X) and its Fréchet derivative Df(X)[E] for a real matrix X.
struct MatrixFunctionValue {
  Matrix<double> value, derivative;
};

inline MatrixFunctionValue matrix_function(const Matrix<double>& x, const Matrix<double>& e, const ScalarFunction& fn) {
  const std::size_t n = x.rows();
  if (fn.taylor && detail::frobenius(x) + detail::frobenius(e) * 0 < fn.radius) {
    Matrix<double> block(2 * n, 2 * n);
    block.set_block(0, 0, x);
    block.set_block(n, n, x);
    block.set_block(0, n, e);
    const auto s = detail::even_series(block, fn);
    return {s.block(0, 0, n, n), s.block(0, n, n, n)};
  }
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(detail::to_eigen(x));
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const Eigen::MatrixXcd V = es.eigenvectors();
  const Eigen::VectorXcd lam = es.eigenvalues();
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(V);
  if (!lu.isInvertible() || lu.rcond() < 1e-10) throw std::runtime_error("matrix function: eigenvectors are ill-conditioned");
  const Eigen::MatrixXcd Vinv = lu.inverse();
  Eigen::MatrixXcd fl = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t k = 0; k < n; ++k) fl(k, k) = fn.f(lam(k));
  const Eigen::MatrixXcd et = Vinv * detail::to_eigen(e) * V;
  Eigen::MatrixXcd dk(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const Complex li = lam(i), lj = lam(j);
      const Complex dd = std::abs(li - lj) > 1e-6 * (1 + std::abs(li)) ? (fn.f(li) - fn.f(lj)) / (li - lj) : fn.df((li + lj) / 2.0);
      dk(i, j) = dd * et(i, j);
    }
  return {detail::real_part(V * fl * Vinv), detail::real_part(V * dk * Vinv)};
}

inline Matrix<double> matrix_function(const Matrix<double>& x, const ScalarFunction& fn) {
  return matrix_function(x, Matrix<double>(x.rows(), x.cols()), fn).value;
}

inline Matrix<double> matrix_function_F(const LieAlgebra& l, const std::vector<double>& x) { return matrix_function(l.ad(x), function_F()); }
inline Matrix<double> matrix_function_G(const LieAlgebra& l, const std::vector<double>& x) { return matrix_function(l.ad(x), function_G()); }

/// Generators of the residual fields of an N-gon: a_k, a_{k,k+1}, b_k, b_{k-1,k}, each with n components.
struct PolygonFields {
  UniversePtr universe;
  std::size_t N = 0, n = 0;
  std::vector<std::vector<std::size_t>> av, ae, bv, be;

  std::vector<std::size_t> all() const {
    std::vector<std::size_t> out;
    for (const auto* g : {&av, &ae, &bv, &be})
      for (const auto& v : *g) out.insert(out.end(), v.begin(), v.end());
    return out;
  }
  /// Laplacian sum_z (-1)^{|z|} d/dz d/dz+ with fields z = a_k (odd) and a_{k,k+1} (even).
  DarbouxPairing pairing() const {
    std::vector<DarbouxPairing::Pair> pairs;
    for (std::size_t k = 0; k < N; ++k)
      for (std::size_t c = 0; c < n; ++c) {
        pairs.push_back({av[k][c], be[k][c], -1});
        pairs.push_back({ae[k][c], bv[k][c], 1});
      }
    return DarbouxPairing(universe, pairs);
  }
};

namespace detail {

inline std::string vertex_name(const std::string& f, const std::string& prime, long k, std::size_t c) {
  return f + prime + "[" + std::to_string(k) + "]." + std::to_string(c);
}
inline std::string edge_name(const std::string& f, const std::string& prime, long k, std::size_t c) {
  return f + prime + "[" + std::to_string(k) + "," + std::to_string(k + 1) + "]." + std::to_string(c);
}

/// Appends the field generators for an N-gon to gens and returns their indices.
inline PolygonFields append_fields(std::vector<Generator>& gens, std::size_t N, std::size_t n, const std::string& prime) {
  PolygonFields p;
  p.N = N;
  p.n = n;
  auto block = [&](auto name, int ghost, long shift) {
    std::vector<std::vector<std::size_t>> idx(N);
    for (std::size_t k = 0; k < N; ++k)
      for (std::size_t c = 0; c < n; ++c) {
        idx[k].push_back(gens.size());
        gens.push_back({name(static_cast<long>(k) + shift, c), ghost});
      }
    return idx;
  };
  p.av = block([&](long k, std::size_t c) { return vertex_name("a", prime, k, c); }, 1, 0);
  p.ae = block([&](long k, std::size_t c) { return edge_name("a", prime, k, c); }, 0, 0);
  p.bv = block([&](long k, std::size_t c) { return vertex_name("b", prime, k, c); }, -1, 0);
  p.be = block([&](long k, std::size_t c) { return edge_name("b", prime, k, c); }, -2, -1);
  return p;
}

template <class C>
using PolyVec = std::vector<SuperPolynomial<C>>;
template <class C>
using PolyMat = std::vector<std::vector<SuperPolynomial<C>>>;

template <class C>
PolyVec<C> generators(const UniversePtr& u, const std::vector<std::size_t>& idx) {
  PolyVec<C> out;
  for (auto g : idx) out.push_back(SuperPolynomial<C>::generator(u, g));
  return out;
}

template <class C>
PolyMat<C> constant_matrix(const UniversePtr& u, const Matrix<C>& m) {
  PolyMat<C> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r].push_back(SuperPolynomial<C>::constant(u, HbarScalar<C>(m(r, c))));
  return out;
}

template <class C>
PolyVec<C> apply(const PolyMat<C>& m, const PolyVec<C>& v, const UniversePtr& u) {
  PolyVec<C> out(m.size(), SuperPolynomial<C>(u));
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < v.size(); ++c)
      if (!m[r][c].is_zero() && !v[c].is_zero()) out[r] += m[r][c] * v[c];
  return out;
}

}  // namespace detail

/// Exponent of the polygon state with field-valued edge data:
/// sum_k <b_{k-1,k}, ½[a_k,a_k]> + <b_k, F_k (a_{k+1} − a_k) + ad_k (a_k + a_{k+1})/2>, with a_N = A a_0.
template <class C>
SuperPolynomial<C> polygon_action(const LieAlgebra& l, const Matrix<C>& A, const std::vector<detail::PolyVec<C>>& av,
                                  const std::vector<detail::PolyVec<C>>& bv, const std::vector<detail::PolyVec<C>>& be,
                                  const std::vector<detail::PolyMat<C>>& Fk, const std::vector<detail::PolyMat<C>>& adk,
                                  const UniversePtr& u) {
  using P = SuperPolynomial<C>;
  using S = HbarScalar<C>;
  const std::size_t N = av.size(), n = l.n;
  const S half(ScalarTraits<C>::from_rational(Rational(1, 2)));
  P action(u);
  const auto wrap = detail::apply(detail::constant_matrix(u, A), av[0], u);
  for (std::size_t k = 0; k < N; ++k) {
    const auto& ak = av[k];
    const auto& an = k + 1 < N ? av[k + 1] : wrap;
    for (std::size_t a = 0; a < n; ++a) {
      P sq(u);
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < n; ++c)
          if (sgn(l.structure(a, b, c)) != 0) sq += (ak[b] * ak[c]).scaled(S(ScalarTraits<C>::from_rational(l.structure(a, b, c) / 2)));
      if (!sq.is_zero()) action += be[k][a] * sq;
      P v(u);
      for (std::size_t b = 0; b < n; ++b) {
        if (!Fk[k][a][b].is_zero()) v += Fk[k][a][b] * (an[b] - ak[b]);
        if (!adk[k][a][b].is_zero()) v += adk[k][a][b] * (ak[b] + an[b]).scaled(half);
      }
      if (!v.is_zero()) action += bv[k][a] * v;
    }
  }
  return action;
}

/// Polygon state at a fixed evaluation point of the even edge fields.
struct EvaluatedState {
  LieAlgebra algebra;
  Matrix<double> Ad;
  std::vector<std::vector<double>> x;
  const ScalarFunction* F = &function_F();
  PolygonFields fields;
  SuperPolynomial<Complex> exponent;
  Complex loop_factor{1.0, 0.0};
  int xi_power = 0;

  std::size_t N() const { return x.size(); }
  /// e^{(i/ħ)S} · Π det G, all nilpotent exponentials expanded; ξ is kept as xi_power.
  SuperPolynomial<Complex> expanded() const {
    using S = HbarScalar<Complex>;
    auto e = exp_nilpotent(exponent.scaled(S::monomial(Complex(0, 1), -1)));
    return e.scaled(S(loop_factor));
  }
};

namespace detail {

inline Matrix<Complex> complexify(const Matrix<double>& m) {
  return m.map<Complex>([](double v) { return Complex(v, 0.0); });
}

inline PolygonFields polygon_universe(std::size_t N, std::size_t n) {
  std::vector<Generator> gens;
  auto f = append_fields(gens, N, n, "");
  f.universe = Universe::make(std::move(gens));
  return f;
}

inline Complex loop_factor(const LieAlgebra& l, const std::vector<std::vector<double>>& x) {
  double r = 1;
  for (const auto& xk : x) r *= determinant(matrix_function(l.ad(xk), function_G()));
  return {r, 0.0};
}

/// The exponent as a jet of first order in the shifts of the even edge generators around x.
inline SuperPolynomial<Complex> exponent_jet(const LieAlgebra& l, const Matrix<double>& Ad, const std::vector<std::vector<double>>& x,
                                             const PolygonFields& f, const ScalarFunction& F, bool with_shift) {
  using P = SuperPolynomial<Complex>;
  using S = HbarScalar<Complex>;
  const auto& u = f.universe;
  const std::size_t N = x.size(), n = l.n;
  std::vector<PolyVec<Complex>> av, bv, be;
  std::vector<PolyMat<Complex>> Fk, adk;
  for (std::size_t k = 0; k < N; ++k) {
    av.push_back(generators<Complex>(u, f.av[k]));
    bv.push_back(generators<Complex>(u, f.bv[k]));
    be.push_back(generators<Complex>(u, f.be[k]));
    const auto ad = l.ad(x[k]);
    auto fm = constant_matrix(u, complexify(matrix_function(ad, F)));
    auto am = constant_matrix(u, complexify(ad));
    if (with_shift) {
      for (std::size_t c = 0; c < n; ++c) {
        std::vector<double> ec(n, 0.0);
        ec[c] = 1;
        const auto dir = l.ad(ec);
        const auto dF = matrix_function(ad, dir, F).derivative;
        const P xi = P::generator(u, f.ae[k][c]);
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = 0; b < n; ++b) {
            if (dF(a, b) != 0) fm[a][b] += xi.scaled(S(Complex(dF(a, b), 0)));
            if (dir(a, b) != 0) am[a][b] += xi.scaled(S(Complex(dir(a, b), 0)));
          }
      }
    }
    Fk.push_back(std::move(fm));
    adk.push_back(std::move(am));
  }
  return polygon_action(l, complexify(Ad), av, bv, be, Fk, adk, u);
}

}  // namespace detail

/// Polygon state of BF theory twisted by the holonomy, evaluated at edge fields x[k] ∈ g.
inline EvaluatedState polygon_state(const LieAlgebra& l, const Holonomy<double>& U, const std::vector<std::vector<double>>& x,
                                    const ScalarFunction& F = function_F()) {
  if (x.empty()) throw std::invalid_argument("polygon state needs N >= 1");
  if (!l.orthonormal()) throw std::invalid_argument("polygon state expects an orthonormal metric");
  for (const auto& xk : x)
    if (xk.size() != l.n) throw std::invalid_argument("evaluation point has the wrong dimension");
  EvaluatedState s{l, U.Ad, x, &F, detail::polygon_universe(x.size(), l.n), SuperPolynomial<Complex>(nullptr), {1.0, 0.0},
                   static_cast<int>(x.size() * l.n)};
  s.exponent = detail::exponent_jet(l, U.Ad, x, s.fields, F, false);
  s.loop_factor = detail::loop_factor(l, x);
  return s;
}

/// Max-norms of ½(S,S), ΔS·ρ + (S,ρ) and Δρ at the evaluation point.
struct QmeResidual {
  double cme = 0, mixed = 0, loop = 0;
};

inline QmeResidual qme_residual(const EvaluatedState& s, double h = 1e-5) {
  using P = SuperPolynomial<Complex>;
  using S = HbarScalar<Complex>;
  const auto& f = s.fields;
  const auto& u = f.universe;
  const auto& l = s.algebra;
  const auto pairing = f.pairing();
  const P jet = detail::exponent_jet(l, s.Ad, s.x, f, *s.F, true);

  P rho = P::constant(u, S(s.loop_factor));
  for (std::size_t k = 0; k < s.N(); ++k) {
    const double own = determinant(matrix_function(l.ad(s.x[k]), function_G()));
    for (std::size_t c = 0; c < l.n; ++c) {
      auto xp = s.x[k], xm = s.x[k];
      xp[c] += h;
      xm[c] -= h;
      const double d = (determinant(matrix_function(l.ad(xp), function_G())) - determinant(matrix_function(l.ad(xm), function_G()))) / (2 * h);
      const double partial = own != 0 ? s.loop_factor.real() / own * d : 0.0;
      if (partial != 0) rho += P::generator(u, f.ae[k][c]).scaled(S(Complex(partial, 0)));
    }
  }

  std::vector<int> shift_slots;
  for (const auto& v : f.ae)
    for (auto g : v) shift_slots.push_back(u->slot(g));
  auto at_point = [&](const P& p) {
    return p.filter([&](const Monomial& m, const S&) {
      return std::all_of(shift_slots.begin(), shift_slots.end(), [&](int sl) { return m.even[sl] == 0; });
    });
  };

  QmeResidual r;
  r.cme = at_point(bv_bracket(jet, jet, pairing).scaled(S(Complex(0.5, 0)))).max_coefficient();
  const P mixed = bv_laplacian(jet, pairing).scaled(S(s.loop_factor)) + bv_bracket(jet, rho, pairing);
  r.mixed = at_point(mixed).max_coefficient();
  r.loop = at_point(bv_laplacian(rho, pairing)).max_coefficient();
  return r;
}

namespace detail {

template <class C, class T>
C to_coeff(const T& v) {
  if constexpr (std::is_same_v<T, Rational>)
    return ScalarTraits<C>::from_rational(v);
  else
    return ScalarTraits<C>::from_double(v);
}

/// Columns of m at its pivot positions, spanning the column space.
template <class T>
Matrix<T> column_basis(const Matrix<T>& m) {
  Matrix<T> r = m;
  const auto piv = rref(r, ScalarTraits<T>::exact ? 0.0 : 1e-10);
  Matrix<T> out(m.rows(), piv.size());
  for (std::size_t j = 0; j < piv.size(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) = m(i, piv[j]);
  return out;
}

template <class C>
SuperPolynomial<C> prune(const SuperPolynomial<C>& p, const std::vector<bool>& fluct, int order) {
  const auto& u = *p.universe();
  return p.filter([&](const Monomial& m, const HbarScalar<C>&) {
    int r = 0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      if (fluct[k]) continue;
      const int s = u.slot(k);
      r += u.generator(k).odd() ? static_cast<int>((m.odd >> s) & 1u) : m.even[s];
    }
    return r <= order;
  });
}

/// sum_m c_m M^{2m} over polynomial matrices, truncated in residual degree.
template <class C>
PolyMat<C> even_series(const PolyMat<C>& m, const ScalarFunction& fn, int max_m, const UniversePtr& u, const std::vector<bool>& fluct, int order) {
  using P = SuperPolynomial<C>;
  const std::size_t n = m.size();
  auto mul = [&](const PolyMat<C>& a, const PolyMat<C>& b) {
    PolyMat<C> out(n, PolyVec<C>(n, P(u)));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        if (a[i][k].is_zero()) continue;
        for (std::size_t j = 0; j < n; ++j)
          if (!b[k][j].is_zero()) out[i][j] += prune(a[i][k] * b[k][j], fluct, order);
      }
    return out;
  };
  const auto m2 = mul(m, m);
  PolyMat<C> power(n, PolyVec<C>(n, P(u)));
  for (std::size_t i = 0; i < n; ++i) power[i][i] = P::constant(u, HbarScalar<C>(ScalarTraits<C>::one()));
  PolyMat<C> sum(n, PolyVec<C>(n, P(u)));
  for (int k = 0; k <= max_m; ++k) {
    const HbarScalar<C> c(ScalarTraits<C>::from_rational(fn.taylor(static_cast<std::size_t>(k))));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (!power[i][j].is_zero()) sum[i][j] += power[i][j].scaled(c);
    power = mul(power, m2);
  }
  return sum;
}

/// log det G(ad_X) = sum_{m>=1} B_{2m}/(2m (2m)!) tr ad_X^{2m}.
template <class C>
SuperPolynomial<C> log_det_G(const PolyMat<C>& ad, int max_m, const UniversePtr& u, const std::vector<bool>& fluct, int order) {
  using P = SuperPolynomial<C>;
  const std::size_t n = ad.size();
  auto mul = [&](const PolyMat<C>& a, const PolyMat<C>& b) {
    PolyMat<C> out(n, PolyVec<C>(n, P(u)));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        if (a[i][k].is_zero()) continue;
        for (std::size_t j = 0; j < n; ++j)
          if (!b[k][j].is_zero()) out[i][j] += prune(a[i][k] * b[k][j], fluct, order);
      }
    return out;
  };
  const auto m2 = mul(ad, ad);
  PolyMat<C> power = m2;
  P sum(u);
  const auto& b = bernoulli_even(static_cast<std::size_t>(max_m) + 1);
  for (int m = 1; m <= max_m; ++m) {
    const Rational c = b[m] / (Rational(2 * m) * factorial(2 * m));
    P tr(u);
    for (std::size_t i = 0; i < n; ++i) tr += power[i][i];
    sum += tr.scaled(HbarScalar<C>(ScalarTraits<C>::from_rational(c)));
    power = mul(power, m2);
  }
  return sum;
}

template <class C>
PolyMat<C> ad_poly(const LieAlgebra& l, const PolyVec<C>& x, const UniversePtr& u) {
  using P = SuperPolynomial<C>;
  PolyMat<C> m(l.n, PolyVec<C>(l.n, P(u)));
  for (std::size_t a = 0; a < l.n; ++a)
    for (std::size_t b = 0; b < l.n; ++b)
      for (std::size_t c = 0; c < l.n; ++c)
        if (sgn(l.structure(a, c, b)) != 0) m[a][b] += x[c].scaled(HbarScalar<C>(ScalarTraits<C>::from_rational(l.structure(a, c, b))));
  return m;
}

/// Exponent and (ħ/i) log of the loop factor with polynomial edge fields, truncated at residual order.
template <class C>
std::pair<SuperPolynomial<C>, SuperPolynomial<C>> symbolic_state(const LieAlgebra& l, const Matrix<C>& A, const std::vector<PolyVec<C>>& av,
                                                                const std::vector<PolyVec<C>>& ae, const std::vector<PolyVec<C>>& bv,
                                                                const std::vector<PolyVec<C>>& be, const UniversePtr& u,
                                                                const std::vector<bool>& fluct, int order) {
  using P = SuperPolynomial<C>;
  const int max_m = order / 2 + 1;
  std::vector<PolyMat<C>> Fk, adk;
  P loop(u);
  for (std::size_t k = 0; k < av.size(); ++k) {
    auto ad = ad_poly(l, ae[k], u);
    Fk.push_back(even_series(ad, function_F(), max_m, u, fluct, order));
    loop += log_det_G(ad, max_m, u, fluct, order);
    adk.push_back(std::move(ad));
  }
  P s = prune(polygon_action(l, A, av, bv, be, Fk, adk, u), fluct, order);
  const HbarScalar<C> h_over_i = HbarScalar<C>::monomial(-ScalarTraits<C>::imag_unit(), 1);
  return {s, prune(loop, fluct, order).scaled(h_over_i)};
}

}  // namespace detail

/// Outcome of pushing the N-gon state forward along an aggregation and comparing with the (N−1)-gon state.
template <class C>
struct AggregateReport {
  SuperPolynomial<C> pushed;    // effective action plus (ħ/i) log of the loop factor
  SuperPolynomial<C> expected;  // the same for the (N−1)-gon state
  GaussianNormalization<C> normalization;
  double discrepancy = 0;
  std::size_t terms = 0;
};

/// BV pushforward of the N-gon state along agg_k^κ over the fluctuations im K ⊕ im K^∨, to total residual order `order`.
template <class C, class T>
AggregateReport<C> aggregate_check(const LieAlgebra& l, const Holonomy<T>& U, std::size_t N, std::size_t k, const Rational& kappa, int order) {
  using P = SuperPolynomial<C>;
  using S = HbarScalar<C>;
  if (N < 2) throw std::invalid_argument("aggregation needs N >= 2");
  if (!l.orthonormal()) throw std::invalid_argument("aggregation expects an orthonormal metric");
  const std::size_t n = l.n;
  const auto big = PolygonComplex<T>::make(N, U.Ad);
  const auto agg = aggregation(big, k, kappa);
  const Matrix<T> alpha_basis = detail::column_basis(agg.K);
  const Matrix<T> beta_basis = detail::column_basis(agg.K_dual);

  std::vector<Generator> gens;
  PolygonFields small = detail::append_fields(gens, N - 1, n, "'");
  std::vector<std::size_t> alpha, beta;
  for (std::size_t j = 0; j < alpha_basis.cols(); ++j) {
    alpha.push_back(gens.size());
    gens.push_back({"alpha." + std::to_string(j), 1});
  }
  for (std::size_t j = 0; j < beta_basis.cols(); ++j) {
    beta.push_back(gens.size());
    gens.push_back({"beta." + std::to_string(j), -1});
  }
  const auto u = Universe::make(gens);
  small.universe = u;
  std::vector<bool> fluct(u->size(), false);
  for (auto g : alpha) fluct[g] = true;
  for (auto g : beta) fluct[g] = true;

  // residual coordinates of the small complex in the cochain layout [vertices | edges]
  const std::size_t ns = (N - 1) * n, nb = N * n;
  std::vector<P> a_small, b_small;
  for (std::size_t j = 0; j < N - 1; ++j)
    for (std::size_t c = 0; c < n; ++c) a_small.push_back(P::generator(u, small.av[j][c]));
  for (std::size_t j = 0; j < N - 1; ++j)
    for (std::size_t c = 0; c < n; ++c) a_small.push_back(P::generator(u, small.ae[j][c]));
  // dual layout: [dual vertices b_j | dual edges b_{j-1,j}]
  for (std::size_t j = 0; j < N - 1; ++j)
    for (std::size_t c = 0; c < n; ++c) b_small.push_back(P::generator(u, small.bv[j][c]));
  for (std::size_t j = 0; j < N - 1; ++j)
    for (std::size_t c = 0; c < n; ++c) b_small.push_back(P::generator(u, small.be[j][c]));

  auto lift = [&](const Matrix<T>& incl, const std::vector<P>& res, const Matrix<T>& basis, const std::vector<std::size_t>& fl) {
    std::vector<P> out(incl.rows(), P(u));
    for (std::size_t r = 0; r < incl.rows(); ++r) {
      for (std::size_t c = 0; c < incl.cols(); ++c)
        if (!ScalarTraits<T>::is_zero(incl(r, c))) out[r] += res[c].scaled(S(detail::to_coeff<C>(incl(r, c))));
      for (std::size_t j = 0; j < fl.size(); ++j)
        if (!ScalarTraits<T>::is_zero(basis(r, j))) out[r] += P::generator(u, fl[j]).scaled(S(detail::to_coeff<C>(basis(r, j))));
    }
    return out;
  };
  const auto a_big = lift(agg.i, a_small, alpha_basis, alpha);
  const auto b_big = lift(agg.i_dual, b_small, beta_basis, beta);

  auto split = [&](const std::vector<P>& flat, std::size_t count, std::size_t offset) {
    std::vector<detail::PolyVec<C>> out(count);
    for (std::size_t j = 0; j < count; ++j)
      for (std::size_t c = 0; c < n; ++c) out[j].push_back(flat[offset + j * n + c]);
    return out;
  };
  const Matrix<C> Ac = U.Ad.template map<C>([](const T& v) { return detail::to_coeff<C>(v); });
  auto [s_big, loop_big] = detail::symbolic_state<C>(l, Ac, split(a_big, N, 0), split(a_big, N, nb), split(b_big, N, 0), split(b_big, N, nb), u,
                                                    fluct, order);
  auto [s_small, loop_small] = detail::symbolic_state<C>(l, Ac, split(a_small, N - 1, 0), split(a_small, N - 1, ns), split(b_small, N - 1, 0),
                                                        split(b_small, N - 1, ns), u, fluct, order);

  SplitAction<C> sa{u, {}, P(u), P(u)};
  for (auto g : alpha) sa.fluctuations.push_back(g);
  for (auto g : beta) sa.fluctuations.push_back(g);
  const auto& uu = *u;
  for (const auto& [m, c] : s_big.terms()) {
    int r = 0, f = 0;
    for (std::size_t g = 0; g < uu.size(); ++g) {
      const int sl = uu.slot(g);
      const int e = uu.generator(g).odd() ? static_cast<int>((m.odd >> sl) & 1u) : m.even[sl];
      (fluct[g] ? f : r) += e;
    }
    if (r == 0 && f == 2) sa.quadratic.add(m, c);
    else sa.interaction.add(m, c);
  }
  auto pf = [&] {
    try {
      return gaussian_pushforward(sa, order);
    } catch (const SingularMatrix&) {
      throw SingularMatrix("quadratic form on aggregation fluctuations is singular");
    }
  }();

  AggregateReport<C> rep{pf.effective_action + loop_big, s_small + loop_small, pf.normalization, 0.0, 0};
  auto trunc = [&](const P& p) {
    return detail::prune(p, fluct, order).map_coefficients([&](const Monomial&, const S& c) { return c.truncated(c.min_power(), order); });
  };
  rep.pushed = trunc(rep.pushed);
  rep.expected = trunc(rep.expected);
  const P diff = rep.pushed - rep.expected;
  rep.discrepancy = diff.max_coefficient();
  rep.terms = rep.expected.size();
  return rep;
}

/// Minimal-realization density in the long and simplified forms.
struct MinimalValue {
  double long_form = 0, simplified = 0;
  int xi_power = 0;
  double relative_error() const { return std::abs(long_form - simplified) / std::max(std::abs(simplified), 1e-300); }
};

inline MinimalValue minimal_state(const LieAlgebra& l, const Holonomy<double>& U, const std::vector<double>& a, double threshold = 1e-9) {
  const std::size_t n = l.n;
  const auto id = Matrix<double>::identity(n);
  const auto split = detail::svd_split(U.Ad - id, threshold);
  if (split.kernel.cols() != l.rank) throw NotRegular("holonomy is not regular: centralizer dimension " + std::to_string(split.kernel.cols()));
  const auto da = (U.Ad - id).apply(a);
  double dn = 0, an = 0;
  for (std::size_t c = 0; c < n; ++c) {
    dn = std::max(dn, std::abs(da[c]));
    an = std::max(an, std::abs(a[c]));
  }
  if (dn > 1e-9 * std::max(1.0, an)) throw std::invalid_argument("a must commute with the holonomy");
  const auto& W = split.complement;
  const auto ad = l.ad(a);
  const auto Fm = matrix_function(ad, function_F());
  const auto Gm = matrix_function(ad, function_G());
  const auto M = Fm * (U.Ad - id) + (ad * (U.Ad + id)).scaled(0.5);
  MinimalValue v;
  v.long_form = determinant(Gm) * determinant(W.transpose() * M * W);
  v.simplified = determinant(W.transpose() * (U.Ad * expm(ad) - id) * W);
  v.xi_power = static_cast<int>(l.rank);
  return v;
}

/// Truncated irrep sum of the genus-γ partition function for su(2) and its exponent bookkeeping.
struct PartitionResult {
  double sum = 0;
  int genus = 0;
  long nmax = 0;
  int n = 0;                      // (γ−1) dim G
  Rational two_pi_hbar_exponent;  // n/2
  Rational phase_hbar_exponent;   // 3n/2
  int center = 2;
  double volume = 1;
};

inline PartitionResult partition_2d(int genus, long nmax, double volume = 1.0) {
  if (genus < 2) throw std::invalid_argument("genus must be at least 2");
  if (nmax < 1) throw std::invalid_argument("truncation must be positive");
  PartitionResult r;
  r.genus = genus;
  r.nmax = nmax;
  r.volume = volume;
  const int e = 2 * genus - 2;
  double s = 0;
  for (long m = nmax; m >= 1; --m) s += std::pow(static_cast<double>(m), -e);
  r.sum = s;
  r.n = (genus - 1) * 3;
  r.two_pi_hbar_exponent = make_rational(r.n, 2);
  r.phase_hbar_exponent = make_rational(3 * r.n, 2);
  return r;
}

}  // namespace bvkit

#endif  // BVKIT_POLYGON_BF_HPP
