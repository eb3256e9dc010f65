#ifndef BVKIT_KERNEL1D_HPP
#define BVKIT_KERNEL1D_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bvkit/linalg.hpp"
#include "bvkit/poly.hpp"
#include "json.hpp"

namespace bvkit {

struct PolarizationMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DecompositionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct QuadratureFailure : std::runtime_error {
  QuadratureFailure(const std::string& what, double achieved) : std::runtime_error(what), achieved_tolerance(achieved) {}
  double achieved_tolerance;
};

enum class Side { Lo, Hi };
/// Endpoint label: boundary of type 1, boundary of type 2, or identified with another endpoint.
enum class EndLabel { D1, D2, Joined };

struct Endpoint {
  std::size_t piece = 0;
  Side side = Side::Lo;
  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

struct Piece {
  Rational lo, hi;
  EndLabel left = EndLabel::D2, right = EndLabel::D1;
  friend bool operator==(const Piece&, const Piece&) = default;
};

struct Joint {
  Endpoint a, b;
  friend auto operator<=>(const Joint&, const Joint&) = default;
};

/// Closed intervals with labelled endpoints, some pairwise identified.
struct Manifold1D {
  std::vector<Piece> pieces;
  std::vector<Joint> joints;

  Rational coord(const Endpoint& e) const { return e.side == Side::Lo ? pieces.at(e.piece).lo : pieces.at(e.piece).hi; }
  EndLabel label(const Endpoint& e) const { return e.side == Side::Lo ? pieces.at(e.piece).left : pieces.at(e.piece).right; }
  void set_label(const Endpoint& e, EndLabel l) { (e.side == Side::Lo ? pieces.at(e.piece).left : pieces.at(e.piece).right) = l; }
  void add_joint(Endpoint a, Endpoint b) {
    if (b < a) std::swap(a, b);
    joints.push_back({a, b});
    std::sort(joints.begin(), joints.end());
  }
  friend bool operator==(const Manifold1D&, const Manifold1D&) = default;
};

/// Region of the configuration space: same piece with t1 < t2, same piece with t1 > t2, or a pair of pieces.
enum class Order { Below, Above, Cross };

struct RegionKey {
  std::size_t p = 0, q = 0;
  Order order = Order::Cross;
  friend auto operator<=>(const RegionKey&, const RegionKey&) = default;
};

/// Two-point kernel given by a bivariate polynomial on each open region and a jump across the diagonal.
class PiecewiseKernel {
 public:
  PiecewiseKernel() = default;
  explicit PiecewiseKernel(Manifold1D m) : m_(std::move(m)) {
    const std::size_t n = m_.pieces.size();
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = 0; q < n; ++q) {
        if (p == q) {
          regions_[{p, q, Order::Below}] = Poly2();
          regions_[{p, q, Order::Above}] = Poly2();
        } else {
          regions_[{p, q, Order::Cross}] = Poly2();
        }
      }
  }

  const Manifold1D& manifold() const { return m_; }
  Manifold1D& manifold() { return m_; }
  const std::map<RegionKey, Poly2>& regions() const { return regions_; }
  const Rational& jump() const { return jump_; }
  void set_jump(const Rational& j) { jump_ = j; }

  Poly2& region(const RegionKey& k) { return regions_.at(k); }
  const Poly2& region(const RegionKey& k) const { return regions_.at(k); }
  Poly2& region(std::size_t p, std::size_t q, Order o) { return region({p, q, p == q ? o : Order::Cross}); }
  const Poly2& region(std::size_t p, std::size_t q, Order o) const { return region({p, q, p == q ? o : Order::Cross}); }

  /// eta(t1, t2) with t1 on piece p and t2 on piece q, off the diagonal.
  Rational at(std::size_t p, const Rational& t1, std::size_t q, const Rational& t2) const {
    if (p == q && t1 == t2) throw std::domain_error("kernel evaluated on the diagonal");
    Order o = p != q ? Order::Cross : (t1 < t2 ? Order::Below : Order::Above);
    return region({p, q, o})(t1, t2);
  }
  Rational operator()(const Rational& t1, const Rational& t2) const {
    if (t1 == t2) throw std::domain_error("kernel evaluated on the diagonal");
    return at(locate(t1), t1, locate(t2), t2);
  }
  double eval(double t1, double t2) const {
    return operator()(Rational(t1), Rational(t2)).get_d();
  }

  /// eta(y, t2) as a polynomial in t2 on each piece, for an endpoint y.
  std::vector<Poly1> at_first(const Endpoint& y) const {
    std::vector<Poly1> out;
    Rational x = m_.coord(y);
    for (std::size_t q = 0; q < m_.pieces.size(); ++q) {
      Order o = y.side == Side::Lo ? Order::Below : Order::Above;
      out.push_back(region(y.piece, q, o).at_first(x));
    }
    return out;
  }
  /// eta(t1, y) as a polynomial in t1 on each piece, for an endpoint y.
  std::vector<Poly1> at_second(const Endpoint& y) const {
    std::vector<Poly1> out;
    Rational x = m_.coord(y);
    for (std::size_t p = 0; p < m_.pieces.size(); ++p) {
      Order o = y.side == Side::Hi ? Order::Below : Order::Above;
      out.push_back(region(p, y.piece, o).at_second(x));
    }
    return out;
  }

  std::size_t locate(const Rational& t) const {
    for (std::size_t p = 0; p < m_.pieces.size(); ++p)
      if (m_.pieces[p].lo < t && t < m_.pieces[p].hi) return p;
    for (std::size_t p = 0; p < m_.pieces.size(); ++p)
      if (m_.pieces[p].lo <= t && t <= m_.pieces[p].hi) return p;
    throw std::out_of_range("point " + to_string(t) + " outside the manifold");
  }

  friend bool operator==(const PiecewiseKernel&, const PiecewiseKernel&) = default;

 private:
  Manifold1D m_;
  std::map<RegionKey, Poly2> regions_;
  Rational jump_{1};
};

/// Piecewise-polynomial 0- or 1-form; a 1-form stores the coefficient of dt.
struct PiecewiseForm {
  int degree = 0;
  std::vector<Poly1> pieces;

  Rational value_at(const Manifold1D& m, const Endpoint& e) const {
    if (degree != 0) return Rational(0);
    return pieces.at(e.piece)(m.coord(e));
  }
  friend bool operator==(const PiecewiseForm&, const PiecewiseForm&) = default;
};

/// Representatives chi_i and duals chi^i with int chi^i chi_j = delta.
struct CohomologyBasis {
  std::vector<PiecewiseForm> reps, duals;

  std::size_t size() const { return reps.size(); }
  Matrix<Rational> pairing(const Manifold1D& m) const {
    Matrix<Rational> out(duals.size(), reps.size());
    for (std::size_t i = 0; i < duals.size(); ++i)
      for (std::size_t j = 0; j < reps.size(); ++j) {
        if (duals[i].degree + reps[j].degree != 1) continue;
        Rational s(0);
        for (std::size_t p = 0; p < m.pieces.size(); ++p)
          s += (duals[i].pieces[p] * reps[j].pieces[p]).integrate(m.pieces[p].lo, m.pieces[p].hi);
        out(i, j) = s;
      }
    return out;
  }
  friend bool operator==(const CohomologyBasis&, const CohomologyBasis&) = default;
};

struct Propagator1D {
  PiecewiseKernel kernel;
  CohomologyBasis basis;
};

enum class StandardKind { Interval12, Interval11, Interval22, Circle };

inline StandardKind parse_standard_kind(const std::string& s) {
  if (s == "interval-12") return StandardKind::Interval12;
  if (s == "interval-11") return StandardKind::Interval11;
  if (s == "interval-22") return StandardKind::Interval22;
  if (s == "circle") return StandardKind::Circle;
  throw std::invalid_argument("unknown kernel kind: " + s);
}

/// Standard propagators on [0,1] and on the circle of circumference 1.
inline Propagator1D standard_kernel(StandardKind kind) {
  const Poly2 t1 = Poly2::t1(), t2 = Poly2::t2();
  const PiecewiseForm one{0, {Poly1(1)}}, dt{1, {Poly1(1)}};
  Manifold1D m;
  m.pieces.push_back({Rational(0), Rational(1), EndLabel::D2, EndLabel::D1});
  Propagator1D out;
  switch (kind) {
    case StandardKind::Interval12:
      out.kernel = PiecewiseKernel(m);
      out.kernel.region(0, 0, Order::Below) = Poly2(-1);
      break;
    case StandardKind::Interval11:
      m.pieces[0].left = EndLabel::D1;
      out.kernel = PiecewiseKernel(m);
      out.kernel.region(0, 0, Order::Below) = -t1;
      out.kernel.region(0, 0, Order::Above) = Poly2(1) - t1;
      out.basis = {{dt}, {one}};
      break;
    case StandardKind::Interval22:
      m.pieces[0].right = EndLabel::D2;
      out.kernel = PiecewiseKernel(m);
      out.kernel.region(0, 0, Order::Below) = t2 - Poly2(1);
      out.kernel.region(0, 0, Order::Above) = t2;
      out.basis = {{one}, {dt}};
      break;
    case StandardKind::Circle: {
      m.pieces[0].left = m.pieces[0].right = EndLabel::Joined;
      m.add_joint({0, Side::Lo}, {0, Side::Hi});
      out.kernel = PiecewiseKernel(m);
      Poly2 smooth = t2 - t1 - Poly2(make_rational(1, 2));
      out.kernel.region(0, 0, Order::Below) = smooth;
      out.kernel.region(0, 0, Order::Above) = smooth + Poly2(1);
      out.basis = {{one, dt}, {dt, one}};
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------- checks

/// eta(t+0,t) - eta(t-0,t) equals the stored jump on every piece.
inline bool check_jump(const PiecewiseKernel& k) {
  for (std::size_t p = 0; p < k.manifold().pieces.size(); ++p) {
    Poly1 j = k.region(p, p, Order::Above).diagonal() - k.region(p, p, Order::Below).diagonal();
    if (!(j == Poly1(k.jump()))) return false;
  }
  return true;
}

/// eta vanishes with its first argument on a type-1 boundary or its second on a type-2 boundary.
inline bool check_boundary(const PiecewiseKernel& k) {
  const auto& m = k.manifold();
  for (std::size_t p = 0; p < m.pieces.size(); ++p)
    for (Side s : {Side::Lo, Side::Hi}) {
      Endpoint e{p, s};
      EndLabel l = m.label(e);
      if (l == EndLabel::Joined) continue;
      auto vals = l == EndLabel::D1 ? k.at_first(e) : k.at_second(e);
      for (const auto& v : vals)
        if (!v.is_zero()) return false;
    }
  return true;
}

/// eta is continuous in each argument across every identified pair of endpoints.
inline bool check_continuity(const PiecewiseKernel& k) {
  for (const auto& j : k.manifold().joints) {
    if (k.at_first(j.a) != k.at_first(j.b)) return false;
    if (k.at_second(j.a) != k.at_second(j.b)) return false;
  }
  return true;
}

inline bool check_pairing(const Propagator1D& d) {
  const std::size_t n = d.basis.size();
  if (d.basis.duals.size() != n) return false;
  return d.basis.pairing(d.kernel.manifold()) == Matrix<Rational>::identity(n);
}

struct Decomposition {
  /// C(i,j) = coefficient of chi_j x chi^i recovered by pairing; expected (-1)^{deg chi_i} delta.
  Matrix<Rational> coefficients;
  /// Per region: (d/dt1, d/dt2) parts of d eta minus the expected sum.
  std::map<RegionKey, std::pair<Poly2, Poly2>> remainder;
  bool jump_ok = true;

  bool remainder_zero() const {
    for (const auto& [k, r] : remainder)
      if (!r.first.is_zero() || !r.second.is_zero()) return false;
    return true;
  }
  bool coefficients_ok(const CohomologyBasis& b) const {
    for (std::size_t i = 0; i < b.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) {
        Rational want = i == j ? Rational(b.reps[i].degree ? -1 : 1) : Rational(0);
        if (coefficients(i, j) != want) return false;
      }
    return true;
  }
  bool exact(const CohomologyBasis& b) const { return jump_ok && remainder_zero() && coefficients_ok(b); }
  std::string describe() const {
    std::string s;
    for (const auto& [k, r] : remainder) {
      if (r.first.is_zero() && r.second.is_zero()) continue;
      s += "region (" + std::to_string(k.p) + "," + std::to_string(k.q) + "," + std::to_string(static_cast<int>(k.order)) +
           "): dt1[" + r.first.str() + "] dt2[" + r.second.str() + "]; ";
    }
    return s.empty() ? "0" : s;
  }
};

/// d eta off the diagonal compared with sum_i (-1)^{deg chi_i} chi_i(t1) chi^i(t2).
inline Decomposition exterior_derivative_decomposition(const PiecewiseKernel& k, const CohomologyBasis& b) {
  const auto& m = k.manifold();
  const std::size_t n = b.size();
  Decomposition out;
  out.jump_ok = check_jump(k);
  out.coefficients = Matrix<Rational>(n, n);
  auto integrate_region = [&](const RegionKey& key, const Poly2& f) {
    const Piece& a = m.pieces[key.p];
    const Piece& c = m.pieces[key.q];
    if (key.order == Order::Cross) return f.integrate_rectangle(a.lo, a.hi, c.lo, c.hi);
    return f.integrate_triangle(a.lo, a.hi, key.order == Order::Above);
  };
  for (const auto& [key, poly] : k.regions()) {
    Poly2 d1 = poly.d1(), d2 = poly.d2();
    for (std::size_t i = 0; i < n; ++i) {
      Poly2 term = Poly2::outer(b.reps[i].pieces[key.p], b.duals[i].pieces[key.q]);
      if (b.reps[i].degree == 1 && b.duals[i].degree == 0) d1 += term;
      else if (b.reps[i].degree == 0 && b.duals[i].degree == 1) d2 -= term;
      else throw std::invalid_argument("cohomology basis degrees must be complementary");
    }
    out.remainder[key] = {d1, d2};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (b.reps[i].degree != b.reps[j].degree) continue;
        const Poly2& comp = b.reps[i].degree == 1 ? poly.d1() : poly.d2();
        Poly2 w = Poly2::outer(b.duals[i].pieces[key.p], b.reps[j].pieces[key.q]) * comp;
        out.coefficients(i, j) += integrate_region(key, w);
      }
  }
  return out;
}

inline void require_decomposition(const Propagator1D& d) {
  auto r = exterior_derivative_decomposition(d.kernel, d.basis);
  if (!r.exact(d.basis)) throw DecompositionFailure("d eta decomposition remainder: " + r.describe());
}

// ---------------------------------------------------------------- reparametrization

/// Pullback along s = a t + b; orientation reversal negates the kernel and the duals.
inline Propagator1D relabel(const Propagator1D& d, const Rational& a, const Rational& b) {
  if (sgn(a) == 0) throw std::invalid_argument("relabel requires a nonzero scale");
  const bool flip = sgn(a) < 0;
  auto flip_side = [&](Endpoint e) {
    if (flip) e.side = e.side == Side::Lo ? Side::Hi : Side::Lo;
    return e;
  };
  Manifold1D m;
  for (const auto& pc : d.kernel.manifold().pieces) {
    Rational x = (pc.lo - b) / a, y = (pc.hi - b) / a;
    if (flip) m.pieces.push_back({y, x, pc.right, pc.left});
    else m.pieces.push_back({x, y, pc.left, pc.right});
  }
  for (const auto& j : d.kernel.manifold().joints) m.add_joint(flip_side(j.a), flip_side(j.b));
  Propagator1D out{PiecewiseKernel(m), {}};
  out.kernel.set_jump(d.kernel.jump());
  for (const auto& [key, poly] : d.kernel.regions()) {
    RegionKey nk = key;
    if (flip && key.order != Order::Cross) nk.order = key.order == Order::Below ? Order::Above : Order::Below;
    Poly2 pulled = poly.compose_affine(a, b);
    out.kernel.region(nk) = flip ? -pulled : pulled;
  }
  auto pull = [&](const PiecewiseForm& f, bool negate) {
    PiecewiseForm g{f.degree, {}};
    for (const auto& p : f.pieces) {
      Poly1 q = p.compose_affine(a, b);
      if (f.degree == 1) q = q * Poly1(a);
      g.pieces.push_back(negate ? -q : q);
    }
    return g;
  };
  for (const auto& r : d.basis.reps) out.basis.reps.push_back(pull(r, false));
  for (const auto& r : d.basis.duals) out.basis.duals.push_back(pull(r, flip));
  return out;
}

inline Propagator1D translated(const Propagator1D& d, const Rational& offset) { return relabel(d, Rational(1), -offset); }

/// Splits piece p at an interior point x; the kernel is unchanged as a function.
inline Propagator1D subdivided(const Propagator1D& d, std::size_t p, const Rational& x) {
  const Manifold1D& old = d.kernel.manifold();
  const Piece& pc = old.pieces.at(p);
  if (!(pc.lo < x && x < pc.hi)) throw std::invalid_argument("subdivision point must be interior");
  const std::size_t n = old.pieces.size();
  // new index of old piece r; the right half of p is appended at index p + 1
  auto idx = [&](std::size_t r) { return r <= p ? r : r + 1; };
  Manifold1D m;
  for (std::size_t r = 0; r < n; ++r) {
    if (r == p) {
      m.pieces.push_back({pc.lo, x, pc.left, EndLabel::Joined});
      m.pieces.push_back({x, pc.hi, EndLabel::Joined, pc.right});
    } else {
      m.pieces.push_back(old.pieces[r]);
    }
  }
  auto map_end = [&](Endpoint e) {
    if (e.piece == p) return Endpoint{e.side == Side::Lo ? p : p + 1, e.side};
    return Endpoint{idx(e.piece), e.side};
  };
  for (const auto& j : old.joints) m.add_joint(map_end(j.a), map_end(j.b));
  m.add_joint({p, Side::Hi}, {p + 1, Side::Lo});
  Propagator1D out{PiecewiseKernel(m), {}};
  out.kernel.set_jump(d.kernel.jump());
  auto images = [&](std::size_t r) {
    return r == p ? std::vector<std::size_t>{p, p + 1} : std::vector<std::size_t>{idx(r)};
  };
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t nr : images(r))
        for (std::size_t ns : images(s)) {
          if (r != s) {
            out.kernel.region(nr, ns, Order::Cross) = d.kernel.region(r, s, Order::Cross);
          } else if (nr == ns) {
            out.kernel.region(nr, ns, Order::Below) = d.kernel.region(r, r, Order::Below);
            out.kernel.region(nr, ns, Order::Above) = d.kernel.region(r, r, Order::Above);
          } else {
            out.kernel.region(nr, ns, Order::Cross) = d.kernel.region(r, r, nr < ns ? Order::Below : Order::Above);
          }
        }
  auto split = [&](const PiecewiseForm& f) {
    PiecewiseForm g{f.degree, {}};
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < images(r).size(); ++k) g.pieces.push_back(f.pieces[r]);
    return g;
  };
  for (const auto& r : d.basis.reps) out.basis.reps.push_back(split(r));
  for (const auto& r : d.basis.duals) out.basis.duals.push_back(split(r));
  return out;
}

// ---------------------------------------------------------------- gluing

/// Identification of a type-1 endpoint of the left manifold with a type-2 endpoint of the right one.
struct InterfacePoint {
  Endpoint left, right;
};

struct GluedData {
  Propagator1D result;
  /// Interface pairing restricted to the redshirt classes, and its inverse.
  Matrix<Rational> lambda, v;
  /// Indices of redshirt dual classes on the left and representative classes on the right.
  std::vector<std::size_t> redshirt_left, redshirt_right;
  /// Full interface pairing between left duals and right representatives.
  Matrix<Rational> pairing;

  Rational ber_lambda() const { return determinant(lambda); }
  /// Field plus antifield for every redshirt class on each side.
  std::size_t redshirt_generators() const { return 2 * (redshirt_left.size() + redshirt_right.size()); }
};

/// Last piece of the left manifold glued to the first piece of the right one.
inline std::vector<InterfacePoint> chain_interface(const Propagator1D& left, const Propagator1D&) {
  return {{{left.kernel.manifold().pieces.size() - 1, Side::Hi}, {0, Side::Lo}}};
}

/// Chain gluing closed up into a circle.
inline std::vector<InterfacePoint> ring_interface(const Propagator1D& left, const Propagator1D& right) {
  auto out = chain_interface(left, right);
  out.push_back({{0, Side::Lo}, {right.kernel.manifold().pieces.size() - 1, Side::Hi}});
  return out;
}

namespace detail {

inline std::vector<std::size_t> independent_columns(const Matrix<Rational>& a) {
  Matrix<Rational> w = a;
  return rref(w);
}

inline std::vector<Poly1> lin_comb(const std::vector<std::vector<Poly1>>& fs, const std::vector<Rational>& w, std::size_t n) {
  std::vector<Poly1> out(n);
  for (std::size_t k = 0; k < fs.size(); ++k) {
    if (sgn(w[k]) == 0) continue;
    for (std::size_t p = 0; p < n; ++p) out[p] += fs[k][p] * Poly1(w[k]);
  }
  return out;
}

}  // namespace detail

/// Glues two 1D propagators along interface endpoints, integrating out the redshirt residual fields.
inline GluedData glue(const Propagator1D& m1, const Propagator1D& m2, const std::vector<InterfacePoint>& sigma) {
  const Manifold1D& g1 = m1.kernel.manifold();
  const Manifold1D& g2 = m2.kernel.manifold();
  const std::size_t n1 = g1.pieces.size(), n2 = g2.pieces.size(), n = n1 + n2;
  if (sigma.empty()) throw std::invalid_argument("empty interface");
  for (const auto& y : sigma) {
    if (g1.label(y.left) != EndLabel::D1 || g2.label(y.right) != EndLabel::D2)
      throw PolarizationMismatch("interface endpoints must be type-1 boundary on the left and type-2 on the right");
  }
  if (m1.kernel.jump() != m2.kernel.jump()) throw std::invalid_argument("kernels have different jumps");
  std::vector<Rational> eps;
  for (const auto& y : sigma) eps.push_back(Rational(y.left.side == Side::Hi ? 1 : -1));

  const auto& b1 = m1.basis.duals;  // classes of the left piece restricting to the interface
  const auto& a2 = m2.basis.reps;   // classes of the right piece restricting to the interface
  GluedData out;
  out.pairing = Matrix<Rational>(b1.size(), a2.size());
  for (std::size_t i = 0; i < b1.size(); ++i)
    for (std::size_t j = 0; j < a2.size(); ++j)
      for (std::size_t k = 0; k < sigma.size(); ++k)
        out.pairing(i, j) += eps[k] * b1[i].value_at(g1, sigma[k].left) * a2[j].value_at(g2, sigma[k].right);
  out.redshirt_right = detail::independent_columns(out.pairing);
  out.redshirt_left = detail::independent_columns(out.pairing.transpose());
  const std::size_t r = out.redshirt_left.size();
  out.lambda = Matrix<Rational>(r, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) out.lambda(i, j) = out.pairing(out.redshirt_left[i], out.redshirt_right[j]);
  out.v = inverse(out.lambda);

  // boundary traces of the kernels through the interface
  std::vector<std::vector<Poly1>> eta1_y, eta2_y;  // eta1(t1, y) on M1 pieces, eta2(y, t2) on M2 pieces
  for (const auto& y : sigma) {
    eta1_y.push_back(m1.kernel.at_second(y.left));
    eta2_y.push_back(m2.kernel.at_first(y.right));
  }
  // E[f](t1) = sum_y eps_y eta1(t1, y) f(y) and F[g](t2) = sum_y eps_y g(y) eta2(y, t2)
  auto e_ext = [&](const PiecewiseForm& f) {
    std::vector<Rational> w;
    for (std::size_t k = 0; k < sigma.size(); ++k) w.push_back(eps[k] * f.value_at(g2, sigma[k].right));
    return detail::lin_comb(eta1_y, w, n1);
  };
  auto f_ext = [&](const PiecewiseForm& g) {
    std::vector<Rational> w;
    for (std::size_t k = 0; k < sigma.size(); ++k) w.push_back(eps[k] * g.value_at(g1, sigma[k].left));
    return detail::lin_comb(eta2_y, w, n2);
  };
  std::vector<std::vector<Poly1>> E1, F2;
  for (std::size_t i = 0; i < r; ++i) E1.push_back(e_ext(a2[out.redshirt_right[i]]));
  for (std::size_t j = 0; j < r; ++j) F2.push_back(f_ext(b1[out.redshirt_left[j]]));

  Manifold1D m;
  m.pieces = g1.pieces;
  m.pieces.insert(m.pieces.end(), g2.pieces.begin(), g2.pieces.end());
  for (const auto& j : g1.joints) m.add_joint(j.a, j.b);
  for (const auto& j : g2.joints) m.add_joint({j.a.piece + n1, j.a.side}, {j.b.piece + n1, j.b.side});
  for (const auto& y : sigma) {
    Endpoint a = y.left, b{y.right.piece + n1, y.right.side};
    m.set_label(a, EndLabel::Joined);
    m.set_label(b, EndLabel::Joined);
    m.add_joint(a, b);
  }
  PiecewiseKernel k(m);
  k.set_jump(m1.kernel.jump());
  auto rank_sum = [&](const std::vector<std::vector<Poly1>>& L, std::size_t p, const std::vector<std::vector<Poly1>>& R, std::size_t q) {
    Poly2 s;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j)
        if (sgn(out.v(i, j)) != 0) s += Poly2::outer(L[i][p] * Poly1(out.v(i, j)), R[j][q]);
    return s;
  };
  std::vector<std::vector<Poly1>> B1, A2;
  for (std::size_t j = 0; j < r; ++j) {
    std::vector<Poly1> v;
    for (std::size_t p = 0; p < n1; ++p) v.push_back(b1[out.redshirt_left[j]].pieces[p]);
    B1.push_back(v);
  }
  for (std::size_t i = 0; i < r; ++i) {
    std::vector<Poly1> v;
    for (std::size_t p = 0; p < n2; ++p) v.push_back(a2[out.redshirt_right[i]].pieces[p]);
    A2.push_back(v);
  }
  for (const auto& [key, poly] : m1.kernel.regions()) k.region(key) = poly - rank_sum(E1, key.p, B1, key.q);
  for (const auto& [key, poly] : m2.kernel.regions())
    k.region({key.p + n1, key.q + n1, key.order}) = poly - rank_sum(A2, key.p, F2, key.q);
  for (std::size_t p = 0; p < n2; ++p)
    for (std::size_t q = 0; q < n1; ++q) k.region(p + n1, q, Order::Cross) = rank_sum(A2, p, B1, q);
  for (std::size_t p = 0; p < n1; ++p)
    for (std::size_t q = 0; q < n2; ++q) {
      Poly2 s = rank_sum(E1, p, F2, q);
      for (std::size_t y = 0; y < sigma.size(); ++y) s -= Poly2::outer(eta1_y[y][p] * Poly1(eps[y]), eta2_y[y][q]);
      k.region(p, q + n1, Order::Cross) = s;
    }

  // surviving classes, completed so that their interface pairings vanish
  auto is_in = [](const std::vector<std::size_t>& v, std::size_t x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  auto combine = [&](const std::vector<PiecewiseForm>& base, std::size_t k0, const std::vector<std::size_t>& idx, const std::vector<Rational>& c) {
    PiecewiseForm f = base[k0];
    for (std::size_t t = 0; t < idx.size(); ++t)
      for (std::size_t p = 0; p < f.pieces.size(); ++p) f.pieces[p] -= base[idx[t]].pieces[p] * Poly1(c[t]);
    return f;
  };
  CohomologyBasis nb;
  for (std::size_t kk = 0; kk < m1.basis.size(); ++kk) {
    if (is_in(out.redshirt_left, kk)) continue;
    // c = P[kk, J] V
    std::vector<Rational> c(r, Rational(0));
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t t = 0; t < r; ++t) c[i] += out.pairing(kk, out.redshirt_right[t]) * out.v(t, i);
    PiecewiseForm dual1 = combine(b1, kk, out.redshirt_left, c);
    PiecewiseForm dual = dual1;
    if (dual1.degree == 0) {
      for (const auto& pp : f_ext(dual1)) dual.pieces.push_back(-pp);
    } else {
      dual.pieces.resize(n);
    }
    PiecewiseForm rep = m1.basis.reps[kk];
    rep.pieces.resize(n);
    nb.reps.push_back(rep);
    nb.duals.push_back(dual);
  }
  for (std::size_t ll = 0; ll < m2.basis.size(); ++ll) {
    if (is_in(out.redshirt_right, ll)) continue;
    // d = V P[I, ll]
    std::vector<Rational> c(r, Rational(0));
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t t = 0; t < r; ++t) c[i] += out.v(i, t) * out.pairing(out.redshirt_left[t], ll);
    PiecewiseForm rep2 = combine(a2, ll, out.redshirt_right, c);
    PiecewiseForm rep{rep2.degree, {}};
    if (rep2.degree == 0) {
      rep.pieces = e_ext(rep2);
      for (auto& pp : rep.pieces) pp = -pp;
    } else {
      rep.pieces.assign(n1, Poly1());
    }
    rep.pieces.insert(rep.pieces.end(), rep2.pieces.begin(), rep2.pieces.end());
    PiecewiseForm dual{m2.basis.duals[ll].degree, std::vector<Poly1>(n1)};
    dual.pieces.insert(dual.pieces.end(), m2.basis.duals[ll].pieces.begin(), m2.basis.duals[ll].pieces.end());
    nb.reps.push_back(rep);
    nb.duals.push_back(dual);
  }
  out.result = {k, nb};
  return out;
}

// ---------------------------------------------------------------- serialization

namespace detail {

inline std::string label_name(EndLabel l) {
  switch (l) {
    case EndLabel::D1: return "d1";
    case EndLabel::D2: return "d2";
    case EndLabel::Joined: return "joined";
  }
  return "";
}
inline EndLabel parse_label(const std::string& s) {
  if (s == "d1") return EndLabel::D1;
  if (s == "d2") return EndLabel::D2;
  if (s == "joined") return EndLabel::Joined;
  throw std::invalid_argument("unknown endpoint label: " + s);
}
inline std::string order_name(Order o) {
  switch (o) {
    case Order::Below: return "t1<t2";
    case Order::Above: return "t1>t2";
    case Order::Cross: return "cross";
  }
  return "";
}
inline Order parse_order(const std::string& s) {
  if (s == "t1<t2") return Order::Below;
  if (s == "t1>t2") return Order::Above;
  if (s == "cross") return Order::Cross;
  throw std::invalid_argument("unknown region order: " + s);
}
inline nlohmann::json endpoint_json(const Endpoint& e) { return {e.piece, e.side == Side::Lo ? "lo" : "hi"}; }
inline Endpoint parse_endpoint(const nlohmann::json& j) {
  return {j.at(0).get<std::size_t>(), j.at(1).get<std::string>() == "lo" ? Side::Lo : Side::Hi};
}
inline nlohmann::json poly1_json(const Poly1& p) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : p.coeffs()) a.push_back(to_string(c));
  return a;
}
inline Poly1 parse_poly1(const nlohmann::json& j) {
  std::vector<Rational> c;
  for (const auto& x : j) c.emplace_back(x.get<std::string>());
  for (auto& x : c) x.canonicalize();
  return Poly1::from_coeffs(std::move(c));
}
inline nlohmann::json form_json(const PiecewiseForm& f) {
  nlohmann::json ps = nlohmann::json::array();
  for (const auto& p : f.pieces) ps.push_back(poly1_json(p));
  return {{"degree", f.degree}, {"pieces", ps}};
}
inline PiecewiseForm parse_form(const nlohmann::json& j) {
  PiecewiseForm f{j.at("degree").get<int>(), {}};
  for (const auto& p : j.at("pieces")) f.pieces.push_back(parse_poly1(p));
  return f;
}
inline Rational parse_rational(const nlohmann::json& j) {
  Rational r(j.get<std::string>());
  r.canonicalize();
  return r;
}

}  // namespace detail

inline nlohmann::json to_json(const PiecewiseKernel& k) {
  using nlohmann::json;
  json pieces = json::array(), joints = json::array(), regions = json::array();
  for (const auto& p : k.manifold().pieces)
    pieces.push_back({{"lo", to_string(p.lo)}, {"hi", to_string(p.hi)}, {"left", detail::label_name(p.left)}, {"right", detail::label_name(p.right)}});
  for (const auto& j : k.manifold().joints) joints.push_back({detail::endpoint_json(j.a), detail::endpoint_json(j.b)});
  for (const auto& [key, poly] : k.regions()) {
    json coeffs = json::array();
    for (const auto& [e, c] : poly.terms()) coeffs.push_back({e.first, e.second, to_string(c)});
    regions.push_back({{"charts", {key.p, key.q}}, {"order", detail::order_name(key.order)}, {"coeffs", coeffs}});
  }
  return {{"manifold", {{"pieces", pieces}, {"joints", joints}}}, {"regions", regions}, {"jump", to_string(k.jump())}};
}

inline PiecewiseKernel kernel_from_json(const nlohmann::json& j) {
  Manifold1D m;
  for (const auto& p : j.at("manifold").at("pieces"))
    m.pieces.push_back({detail::parse_rational(p.at("lo")), detail::parse_rational(p.at("hi")),
                        detail::parse_label(p.at("left").get<std::string>()), detail::parse_label(p.at("right").get<std::string>())});
  for (const auto& jt : j.at("manifold").at("joints")) m.add_joint(detail::parse_endpoint(jt.at(0)), detail::parse_endpoint(jt.at(1)));
  PiecewiseKernel k(m);
  for (const auto& r : j.at("regions")) {
    RegionKey key{r.at("charts").at(0).get<std::size_t>(), r.at("charts").at(1).get<std::size_t>(),
                  detail::parse_order(r.at("order").get<std::string>())};
    Poly2 poly;
    for (const auto& c : r.at("coeffs")) poly.add({c.at(0).get<int>(), c.at(1).get<int>()}, detail::parse_rational(c.at(2)));
    k.region(key) = poly;
  }
  k.set_jump(detail::parse_rational(j.at("jump")));
  return k;
}

inline nlohmann::json to_json(const Propagator1D& d) {
  nlohmann::json reps = nlohmann::json::array(), duals = nlohmann::json::array();
  for (const auto& f : d.basis.reps) reps.push_back(detail::form_json(f));
  for (const auto& f : d.basis.duals) duals.push_back(detail::form_json(f));
  nlohmann::json j = to_json(d.kernel);
  j["basis"] = {{"reps", reps}, {"duals", duals}};
  return j;
}

inline Propagator1D propagator_from_json(const nlohmann::json& j) {
  Propagator1D d{kernel_from_json(j), {}};
  if (j.contains("basis")) {
    for (const auto& f : j.at("basis").at("reps")) d.basis.reps.push_back(detail::parse_form(f));
    for (const auto& f : j.at("basis").at("duals")) d.basis.duals.push_back(detail::parse_form(f));
  }
  return d;
}

// ---------------------------------------------------------------- half-plane gluing

/// Coefficients of dz, dzbar, dw, dwbar of a one-form in (z, w).
struct OneFormCoefficients {
  std::array<std::complex<double>, 4> c{};
  double error_estimate = 0.0;

  double max_diff(const OneFormCoefficients& o) const {
    double m = 0.0;
    for (std::size_t k = 0; k < 4; ++k) m = std::max(m, std::abs(c[k] - o.c[k]));
    return m;
  }
};

/// (1/pi) d arg(z - w).
inline OneFormCoefficients darg_over_pi(std::complex<double> z, std::complex<double> w) {
  const std::complex<double> two_pi_i(0.0, 2.0 * M_PI);
  OneFormCoefficients out;
  out.c = {1.0 / (two_pi_i * (z - w)), -1.0 / (two_pi_i * std::conj(z - w)), -1.0 / (two_pi_i * (z - w)),
           1.0 / (two_pi_i * std::conj(z - w))};
  return out;
}

namespace detail {

/// Integrand factors c / prod (x - p_k) of the four coefficients of the glued half-plane kernel.
struct RationalIntegrand {
  std::complex<double> numerator;
  std::vector<std::complex<double>> poles;
  std::complex<double> operator()(double x) const {
    std::complex<double> d(1.0, 0.0);
    for (const auto& p : poles) d *= x - p;
    return numerator / d;
  }
};

inline std::array<RationalIntegrand, 4> kontsevich_integrands(std::complex<double> z, std::complex<double> w) {
  const double s = 1.0 / (4.0 * M_PI * M_PI);
  const std::complex<double> zb = std::conj(z), wb = std::conj(w);
  // dz: A W, dzbar: -B W, dw: -Z C, dwbar: Z D
  return {RationalIntegrand{-s * (w - wb), {z, w, wb}}, RationalIntegrand{s * (w - wb), {zb, w, wb}},
          RationalIntegrand{s * (z - zb), {z, zb, w}}, RationalIntegrand{-s * (z - zb), {z, zb, wb}}};
}

}  // namespace detail

/// Integral over the real line of eta_upper(z, x) ^ eta_lower(x, w) by adaptive Gauss-Kronrod plus a tail bound.
inline OneFormCoefficients kontsevich_glue_eval(std::complex<double> z, std::complex<double> w, double tol = 1e-10) {
  if (!(z.imag() > 0.0) || !(w.imag() < 0.0)) throw std::domain_error("need Im z > 0 and Im w < 0");
  using boost::math::quadrature::gauss_kronrod;
  OneFormCoefficients out;
  auto ig = detail::kontsevich_integrands(z, w);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& f = ig[k];
    double P = 0.0;
    for (const auto& p : f.poles) P = std::max(P, std::abs(p));
    const double c = std::abs(f.numerator);
    const double R = P + std::sqrt(10.0 * c / tol);
    const double tail = c / ((R - P) * (R - P));
    // split at the pole scale so the adaptive rule resolves the peaks
    std::vector<double> cuts{-R};
    for (double x : {-4.0 * P - 1.0, -P - 1.0, P + 1.0, 4.0 * P + 1.0})
      if (x > cuts.back() && x < R) cuts.push_back(x);
    cuts.push_back(R);
    std::complex<double> total(0.0, 0.0);
    double err = tail;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      double er = 0.0, ei = 0.0;
      double re = gauss_kronrod<double, 61>::integrate([&](double x) { return f(x).real(); }, cuts[s], cuts[s + 1], 30, tol * 1e-2, &er);
      double im = gauss_kronrod<double, 61>::integrate([&](double x) { return f(x).imag(); }, cuts[s], cuts[s + 1], 30, tol * 1e-2, &ei);
      total += std::complex<double>(re, im);
      err += er + ei;
    }
    if (err > tol) throw QuadratureFailure("quadrature did not reach tolerance", err);
    out.c[k] = total;
    out.error_estimate = std::max(out.error_estimate, err);
  }
  return out;
}

/// Same integral by residues in the upper half-plane.
inline OneFormCoefficients kontsevich_residue_eval(std::complex<double> z, std::complex<double> w) {
  const std::complex<double> two_pi_i(0.0, 2.0 * M_PI);
  OneFormCoefficients out;
  auto ig = detail::kontsevich_integrands(z, w);
  for (std::size_t k = 0; k < 4; ++k) {
    std::complex<double> s(0.0, 0.0);
    const auto& ps = ig[k].poles;
    for (std::size_t a = 0; a < ps.size(); ++a) {
      if (!(ps[a].imag() > 0.0)) continue;
      std::complex<double> d(1.0, 0.0);
      for (std::size_t b = 0; b < ps.size(); ++b)
        if (b != a) d *= ps[a] - ps[b];
      s += ig[k].numerator / d;
    }
    out.c[k] = two_pi_i * s;
  }
  return out;
}

}  // namespace bvkit

#endif  // BVKIT_KERNEL1D_HPP
