#ifndef BVKIT_BFSTATE_HPP
#define BVKIT_BFSTATE_HPP

#include <algorithm>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bvkit/kernel1d.hpp"
#include "bvkit/linalg.hpp"
#include "bvkit/superpoly.hpp"

namespace bvkit {

struct SingularInterface : std::domain_error {
  using std::domain_error::domain_error;
};

/// Exponents of (2 pi hbar)^a (e^{-i pi/2} hbar)^b.
struct XiExponents {
  Rational two_pi_hbar{0}, phase_hbar{0};

  XiExponents& operator+=(const XiExponents& o) {
    two_pi_hbar += o.two_pi_hbar;
    phase_hbar += o.phase_hbar;
    return *this;
  }
  XiExponents& operator-=(const XiExponents& o) {
    two_pi_hbar -= o.two_pi_hbar;
    phase_hbar -= o.phase_hbar;
    return *this;
  }
  friend XiExponents operator+(XiExponents a, const XiExponents& b) { return a += b; }
  friend XiExponents operator-(XiExponents a, const XiExponents& b) { return a -= b; }
  friend bool operator==(const XiExponents&, const XiExponents&) = default;
  std::string str() const { return "(2 pi hbar)^" + to_string(two_pi_hbar) + " (e^{-i pi/2} hbar)^" + to_string(phase_hbar); }
};

/// Relative Betti numbers dim H^0, dim H^1 counted with the coefficient dimension.
struct Betti {
  std::size_t h0 = 0, h1 = 0;
  friend bool operator==(const Betti&, const Betti&) = default;
};

inline Betti betti(const CohomologyBasis& b, std::size_t dim = 1) {
  Betti out;
  for (const auto& r : b.reps) (r.degree == 0 ? out.h0 : out.h1) += dim;
  return out;
}

/// Normalization factor of the Gaussian measure for fields of shift k.
inline XiExponents xi(const Betti& h, int k) {
  const Rational quarter = make_rational(k % 2 == 0 ? 1 : -1, 4);
  const Rational half = make_rational(1, 2);
  XiExponents out;
  const Rational total = Rational(static_cast<long>(h.h0 + h.h1));
  const Rational odd = Rational(static_cast<long>(h.h1));
  out.two_pi_hbar = quarter * total + half * odd;
  out.phase_hbar = -quarter * total + half * odd;
  return out;
}

/// Factor (2 pi i)^m (i/hbar)^n of a Gaussian integral over a Lagrangian of dimension (2m | 2n).
inline XiExponents gaussian_xi(std::size_t even_dim, std::size_t odd_dim) {
  if (even_dim % 2 || odd_dim % 2) throw std::invalid_argument("Lagrangian dimensions must be even");
  Rational m(static_cast<long>(even_dim / 2)), n(static_cast<long>(odd_dim / 2));
  return {m, -n - m};
}

struct NormalizationCheck {
  XiExponents xi_m, xi_1, xi_2, big_xi;
  bool holds() const { return big_xi == xi_m - xi_1 - xi_2; }
  XiExponents ratio() const { return xi_m - xi_1 - xi_2; }
};

/// Both sides of Xi = xi_M / (xi_M1 xi_M2) for given Betti data and redshirt Lagrangian dimensions.
inline NormalizationCheck normalization_factors(const Betti& m1, const Betti& m2, const Betti& m, std::size_t redshirt_even,
                                                std::size_t redshirt_odd, int k) {
  return {xi(m, k), xi(m1, k), xi(m2, k), gaussian_xi(redshirt_even, redshirt_odd)};
}

struct Prefactor {
  XiExponents xi;
  Rational ber{1};
  friend bool operator==(const Prefactor&, const Prefactor&) = default;
};

/// Abelian BF state on a 1-manifold: residual fields z, z+ and boundary fields A on d1, B on d2.
struct BFState {
  Propagator1D prop;
  int k = 0;
  std::size_t dim = 1;
  std::vector<Endpoint> a_points, b_points;
  UniversePtr universe;
  SuperPolynomial<Rational> action{nullptr};
  Prefactor prefactor;

  std::size_t classes() const { return prop.basis.size(); }
  std::size_t z(std::size_t i, std::size_t c) const { return universe->index(z_name(i, c)); }
  std::size_t zplus(std::size_t i, std::size_t c) const { return universe->index(zplus_name(i, c)); }
  std::size_t a(const Endpoint& e, std::size_t c) const { return universe->index(boundary_name('A', e, c)); }
  std::size_t b(const Endpoint& e, std::size_t c) const { return universe->index(boundary_name('B', e, c)); }

  static std::string z_name(std::size_t i, std::size_t c) { return "z[" + std::to_string(i) + "]." + std::to_string(c); }
  static std::string zplus_name(std::size_t i, std::size_t c) { return "z+[" + std::to_string(i) + "]." + std::to_string(c); }
  static std::string boundary_name(char f, const Endpoint& e, std::size_t c) {
    return std::string(1, f) + "[" + std::to_string(e.piece) + "," + (e.side == Side::Lo ? "lo" : "hi") + "]." +
           std::to_string(c);
  }

  DarbouxPairing pairing() const {
    std::vector<DarbouxPairing::Pair> pairs;
    std::vector<std::size_t> spectators;
    for (std::size_t i = 0; i < classes(); ++i)
      for (std::size_t c = 0; c < dim; ++c) {
        std::size_t zi = z(i, c);
        pairs.push_back({zi, zplus(i, c), universe->generator(zi).odd() ? -1 : 1});
      }
    for (const auto& e : a_points)
      for (std::size_t c = 0; c < dim; ++c) spectators.push_back(a(e, c));
    for (const auto& e : b_points)
      for (std::size_t c = 0; c < dim; ++c) spectators.push_back(b(e, c));
    return DarbouxPairing(universe, pairs, spectators);
  }
};

namespace detail {

inline int sign_pow(int e) { return (e % 2 == 0) ? 1 : -1; }
inline Rational orientation(const Endpoint& e) { return Rational(e.side == Side::Hi ? 1 : -1); }

inline Rational kernel_at(const PiecewiseKernel& k, const Endpoint& y, const Endpoint& yp) {
  return k.at_first(y).at(yp.piece)(k.manifold().coord(yp));
}

inline SuperPolynomial<Rational> pair_sum(const UniversePtr& u, const std::vector<std::size_t>& left,
                                          const std::vector<std::size_t>& right, const Rational& coef) {
  SuperPolynomial<Rational> out(u);
  if (sgn(coef) == 0) return out;
  for (std::size_t c = 0; c < left.size(); ++c)
    out += SuperPolynomial<Rational>::generator(u, left[c]) * SuperPolynomial<Rational>::generator(u, right[c]);
  return out.scaled(HbarScalar<Rational>(coef));
}

/// Rewrites p in universe target, sending generator g to target generator map[g].
template <class C>
SuperPolynomial<C> transplant(const SuperPolynomial<C>& p, const UniversePtr& target, const std::vector<long>& map) {
  const auto& u = *p.universe();
  SuperPolynomial<C> out(target);
  for (const auto& [m, c] : p.terms()) {
    SuperPolynomial<C> t = SuperPolynomial<C>::constant(target, c);
    for (std::size_t s = 0; s < u.num_odd(); ++s)
      if ((m.odd >> s) & 1u) {
        long g = map[u.odd_generator(static_cast<int>(s))];
        if (g < 0) throw std::invalid_argument("transplant: unmapped generator " + u.generator(u.odd_generator(static_cast<int>(s))).name);
        t = t * SuperPolynomial<C>::generator(target, static_cast<std::size_t>(g));
      }
    for (std::size_t s = 0; s < m.even.size(); ++s)
      for (int e = 0; e < m.even[s]; ++e) {
        long g = map[u.even_generator(static_cast<int>(s))];
        if (g < 0) throw std::invalid_argument("transplant: unmapped generator " + u.generator(u.even_generator(static_cast<int>(s))).name);
        t = t * SuperPolynomial<C>::generator(target, static_cast<std::size_t>(g));
      }
    out += t;
  }
  return out;
}

template <class C>
bool mentions(const SuperPolynomial<C>& p, std::size_t k) {
  return !p.derive(k).is_zero();
}

}  // namespace detail

/// Abelian BF state with the effective action built from the propagator and cohomology basis.
inline BFState abelian_state(const Propagator1D& prop, int k, std::size_t dim = 1) {
  if (dim == 0) throw std::invalid_argument("coefficient dimension must be positive");
  const Manifold1D& m = prop.kernel.manifold();
  const auto& basis = prop.basis;
  if (basis.duals.size() != basis.reps.size()) throw std::invalid_argument("basis has unequal numbers of representatives and duals");
  auto sized = [&](const PiecewiseForm& f) { return f.pieces.size() == m.pieces.size(); };
  if (!std::all_of(basis.reps.begin(), basis.reps.end(), sized) || !std::all_of(basis.duals.begin(), basis.duals.end(), sized))
    throw std::invalid_argument("basis forms do not match the manifold");
  if (!check_pairing(prop)) throw std::invalid_argument("basis is not dual under the pairing");
  require_decomposition(prop);

  BFState s;
  s.prop = prop;
  s.k = k;
  s.dim = dim;
  for (std::size_t p = 0; p < m.pieces.size(); ++p)
    for (Side side : {Side::Lo, Side::Hi}) {
      Endpoint e{p, side};
      if (m.label(e) == EndLabel::D1) s.a_points.push_back(e);
      if (m.label(e) == EndLabel::D2) s.b_points.push_back(e);
    }

  std::vector<Generator> gens;
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (std::size_t c = 0; c < dim; ++c) gens.push_back({BFState::z_name(i, c), k - basis.reps[i].degree});
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (std::size_t c = 0; c < dim; ++c) gens.push_back({BFState::zplus_name(i, c), basis.reps[i].degree - k - 1});
  for (const auto& e : s.a_points)
    for (std::size_t c = 0; c < dim; ++c) gens.push_back({BFState::boundary_name('A', e, c), k});
  for (const auto& e : s.b_points)
    for (std::size_t c = 0; c < dim; ++c) gens.push_back({BFState::boundary_name('B', e, c), -k});
  s.universe = Universe::make(std::move(gens));

  auto comps = [&](auto index) {
    std::vector<std::size_t> v;
    for (std::size_t c = 0; c < dim; ++c) v.push_back(index(c));
    return v;
  };
  const Rational sigma(detail::sign_pow(1 + k));
  SuperPolynomial<Rational> S(s.universe);
  for (const auto& y : s.b_points)
    for (std::size_t i = 0; i < basis.size(); ++i) {
      if (basis.reps[i].degree != 0) continue;
      Rational coef = sigma * detail::orientation(y) * basis.reps[i].value_at(m, y);
      S += detail::pair_sum(s.universe, comps([&](std::size_t c) { return s.b(y, c); }),
                            comps([&](std::size_t c) { return s.z(i, c); }), coef);
    }
  for (const auto& y : s.a_points)
    for (std::size_t i = 0; i < basis.size(); ++i) {
      if (basis.duals[i].degree != 0) continue;
      Rational coef = -sigma * detail::orientation(y) * basis.duals[i].value_at(m, y);
      S += detail::pair_sum(s.universe, comps([&](std::size_t c) { return s.zplus(i, c); }),
                            comps([&](std::size_t c) { return s.a(y, c); }), coef);
    }
  for (const auto& y : s.b_points)
    for (const auto& yp : s.a_points) {
      Rational coef = -sigma * detail::orientation(y) * detail::orientation(yp) * detail::kernel_at(prop.kernel, y, yp);
      S += detail::pair_sum(s.universe, comps([&](std::size_t c) { return s.b(y, c); }),
                            comps([&](std::size_t c) { return s.a(yp, c); }), coef);
    }
  s.action = S;
  s.prefactor = {xi(betti(basis, dim), k), Rational(1)};
  return s;
}

/// Classical and quantum parts of the modified master equation; the boundary operator vanishes in one dimension.
struct MqmeResidual {
  SuperPolynomial<Rational> bracket{nullptr}, laplacian{nullptr};
  bool zero() const { return bracket.is_zero() && laplacian.is_zero(); }
};

inline MqmeResidual mqme_check(const BFState& s) {
  DarbouxPairing d = s.pairing();
  return {bv_bracket(s.action, s.action, d).scaled(HbarScalar<Rational>(make_rational(1, 2))), bv_laplacian(s.action, d)};
}

struct GluedState {
  BFState state;
  GluedData data;
  NormalizationCheck normalization;
  std::size_t eliminated_boundary = 0, eliminated_redshirts = 0;
};

/// Pairs two states across the interface: stationary elimination of the interface boundary fields,
/// then Gaussian integration of the redshirt residual fields.
inline GluedState glue_states(const BFState& s1, const BFState& s2, const std::vector<InterfacePoint>& sigma) {
  if (s1.k != s2.k || s1.dim != s2.dim) throw std::invalid_argument("glued states have different field content");
  GluedData g = glue(s1.prop, s2.prop, sigma);
  const int k = s1.k;
  const std::size_t dim = s1.dim;
  const std::size_t n1 = s1.prop.kernel.manifold().pieces.size();

  std::vector<Generator> gens;
  for (const auto& x : s1.universe->generators()) gens.push_back({"1:" + x.name, x.ghost});
  for (const auto& x : s2.universe->generators()) gens.push_back({"2:" + x.name, x.ghost});
  auto u = Universe::make(gens);
  const long off = static_cast<long>(s1.universe->size());
  std::vector<long> map1(s1.universe->size()), map2(s2.universe->size());
  for (std::size_t j = 0; j < map1.size(); ++j) map1[j] = static_cast<long>(j);
  for (std::size_t j = 0; j < map2.size(); ++j) map2[j] = off + static_cast<long>(j);
  auto in1 = [&](std::size_t j) { return static_cast<std::size_t>(map1[j]); };
  auto in2 = [&](std::size_t j) { return static_cast<std::size_t>(map2[j]); };

  SuperPolynomial<Rational> S = detail::transplant(s1.action, u, map1) + detail::transplant(s2.action, u, map2);
  const Rational sigma1(detail::sign_pow(1 + k));
  for (const auto& y : sigma)
    for (std::size_t c = 0; c < dim; ++c)
      S += detail::pair_sum(u, {in2(s2.b(y.right, c))}, {in1(s1.a(y.left, c))}, sigma1 * detail::orientation(y.left));

  GluedState out;
  for (const auto& y : sigma)
    for (std::size_t c = 0; c < dim; ++c) {
      std::size_t bb = in2(s2.b(y.right, c)), aa = in1(s1.a(y.left, c));
      SuperPolynomial<Rational> L = S.derive(bb);
      Rational pivot = L.derive(aa).constant_term().coeff(0);
      if (sgn(pivot) == 0) throw SingularInterface("interface pairing is degenerate");
      SuperPolynomial<Rational> rest = L - SuperPolynomial<Rational>::generator(u, aa).scaled(HbarScalar<Rational>(pivot));
      if (detail::mentions(rest, aa)) throw std::logic_error("boundary equation is not linear");
      S = S.substitute(aa, rest.scaled(HbarScalar<Rational>(Rational(-1) / pivot)));
      if (detail::mentions(S, bb)) throw std::logic_error("interface multiplier survived elimination");
      ++out.eliminated_boundary;
    }

  SuperPolynomial<Rational> zero(u);
  std::vector<std::size_t> xs, ys;
  for (auto i : g.redshirt_left)
    for (std::size_t c = 0; c < dim; ++c) {
      S = S.substitute(in1(s1.z(i, c)), zero);
      xs.push_back(in1(s1.zplus(i, c)));
    }
  for (auto j : g.redshirt_right)
    for (std::size_t c = 0; c < dim; ++c) {
      S = S.substitute(in2(s2.zplus(j, c)), zero);
      ys.push_back(in2(s2.z(j, c)));
    }
  const std::size_t r = xs.size();
  if (r > 0) {
    Matrix<Rational> Q(r, r);
    std::vector<SuperPolynomial<Rational>> U;
    for (std::size_t a = 0; a < r; ++a) {
      SuperPolynomial<Rational> dx = S.derive(xs[a]);
      for (std::size_t b = 0; b < r; ++b) Q(a, b) = dx.derive(ys[b]).constant_term().coeff(0);
      for (auto yb : ys) dx = dx.substitute(yb, zero);
      U.push_back(dx);
    }
    Matrix<Rational> V;
    try {
      V = inverse(Q);
    } catch (const SingularMatrix&) {
      throw SingularInterface("redshirt Hessian is singular");
    }
    std::vector<SuperPolynomial<Rational>> sol;
    for (std::size_t b = 0; b < r; ++b) {
      SuperPolynomial<Rational> v(u);
      for (std::size_t a = 0; a < r; ++a) v += U[a].scaled(HbarScalar<Rational>(-V(b, a)));
      sol.push_back(v);
    }
    for (std::size_t b = 0; b < r; ++b) S = S.substitute(ys[b], sol[b]);
    for (auto x : xs)
      if (detail::mentions(S, x)) throw std::logic_error("redshirt field survived integration");
    out.eliminated_redshirts = 4 * r;
  }

  BFState target = abelian_state(g.result, k, dim);
  std::vector<long> to(u->size(), -1);
  std::size_t next = 0;
  for (std::size_t i = 0; i < s1.classes(); ++i) {
    if (std::find(g.redshirt_left.begin(), g.redshirt_left.end(), i) != g.redshirt_left.end()) continue;
    for (std::size_t c = 0; c < dim; ++c) {
      to[in1(s1.z(i, c))] = static_cast<long>(target.z(next, c));
      to[in1(s1.zplus(i, c))] = static_cast<long>(target.zplus(next, c));
    }
    ++next;
  }
  for (std::size_t j = 0; j < s2.classes(); ++j) {
    if (std::find(g.redshirt_right.begin(), g.redshirt_right.end(), j) != g.redshirt_right.end()) continue;
    for (std::size_t c = 0; c < dim; ++c) {
      to[in2(s2.z(j, c))] = static_cast<long>(target.z(next, c));
      to[in2(s2.zplus(j, c))] = static_cast<long>(target.zplus(next, c));
    }
    ++next;
  }
  for (std::size_t c = 0; c < dim; ++c) {
    for (const auto& e : target.a_points) {
      auto& slot = to[e.piece < n1 ? in1(s1.a(e, c)) : in2(s2.a({e.piece - n1, e.side}, c))];
      slot = static_cast<long>(target.a(e, c));
    }
    for (const auto& e : target.b_points) {
      auto& slot = to[e.piece < n1 ? in1(s1.b(e, c)) : in2(s2.b({e.piece - n1, e.side}, c))];
      slot = static_cast<long>(target.b(e, c));
    }
  }

  BFState res = target;
  res.action = detail::transplant(S, target.universe, to);
  std::size_t even = k % 2 == 0 ? 2 * r : 0, odd = k % 2 == 0 ? 0 : 2 * r;
  out.normalization = normalization_factors(betti(s1.prop.basis, dim), betti(s2.prop.basis, dim), betti(g.result.basis, dim), even, odd, k);
  Rational ber_lambda = g.ber_lambda();
  Rational ber = s1.prefactor.ber * s2.prefactor.ber;
  for (std::size_t c = 0; c < dim; ++c) ber = k % 2 == 0 ? Rational(ber / ber_lambda) : Rational(ber * ber_lambda);
  res.prefactor = {s1.prefactor.xi + s2.prefactor.xi + out.normalization.big_xi, ber};
  out.state = std::move(res);
  out.data = std::move(g);
  return out;
}

/// Interval [0,1] with d1 at t = 0 and d2 at t = 1, kernel Theta(t1 - t2).
inline Propagator1D qm_interval() { return relabel(standard_kernel(StandardKind::Interval12), Rational(-1), Rational(1)); }

// ---------------------------------------------------------------- quantum mechanics

/// Phase space R^{2n} with even coordinates q, p and optional even parameters.
struct PhaseSpace {
  UniversePtr universe;
  std::vector<std::size_t> q, p;

  static PhaseSpace make(std::size_t n, const std::vector<std::string>& parameters = {}) {
    std::vector<Generator> gens;
    auto suffix = [&](std::size_t i) { return n == 1 ? std::string() : std::to_string(i + 1); };
    for (std::size_t i = 0; i < n; ++i) gens.push_back({"q" + suffix(i), 0});
    for (std::size_t i = 0; i < n; ++i) gens.push_back({"p" + suffix(i), 0});
    for (const auto& name : parameters) gens.push_back({name, 0});
    PhaseSpace ps;
    ps.universe = Universe::make(gens);
    for (std::size_t i = 0; i < n; ++i) {
      ps.q.push_back(i);
      ps.p.push_back(n + i);
    }
    return ps;
  }
  SuperPolynomial<GaussQ> var(const std::string& name) const { return SuperPolynomial<GaussQ>::generator(universe, name); }
  SuperPolynomial<GaussQ> constant(const HbarScalar<GaussQ>& c) const { return SuperPolynomial<GaussQ>::constant(universe, c); }
};

/// f * exp(i hbar <-d_q ->d_p) * g, exact on polynomials.
inline SuperPolynomial<GaussQ> star_product(const PhaseSpace& ps, const SuperPolynomial<GaussQ>& f, const SuperPolynomial<GaussQ>& g) {
  using P = SuperPolynomial<GaussQ>;
  using S = HbarScalar<GaussQ>;
  struct Term {
    P f, g;
    S c;
  };
  std::vector<Term> terms{{f, g, S(GaussQ(1))}};
  const S ih = S::monomial(GaussQ::i(), 1);
  for (std::size_t i = 0; i < ps.q.size(); ++i) {
    std::vector<Term> next;
    for (const auto& t : terms) {
      P df = t.f, dg = t.g;
      S c = t.c;
      for (long n = 0; !df.is_zero() && !dg.is_zero(); ++n) {
        if (n > 0) c = c * ih * S(GaussQ(make_rational(1, n)));
        next.push_back({df, dg, c});
        df = df.derive(ps.q[i]);
        dg = dg.derive(ps.p[i]);
      }
    }
    terms = std::move(next);
  }
  P out(ps.universe);
  for (const auto& t : terms) out += (t.f * t.g).scaled(t.c);
  return out;
}

/// Keeps the terms of degree at most max in generator k.
inline SuperPolynomial<GaussQ> truncate_degree(const SuperPolynomial<GaussQ>& p, std::size_t k, int max) {
  int s = p.universe()->slot(k);
  return p.filter([&](const Monomial& m, const HbarScalar<GaussQ>&) { return m.even[s] <= max; });
}

struct QmEvolution {
  SuperPolynomial<GaussQ> free_exponent{nullptr};
  SuperPolynomial<GaussQ> evolution{nullptr};
};

/// Free exponent -sum p q and the star exponential sum_{n <= order} ((i/hbar) dt)^n H^{*n} / n!.
inline QmEvolution qm_evolution_state(const PhaseSpace& ps, const SuperPolynomial<GaussQ>& H, const SuperPolynomial<GaussQ>& dt,
                                      int order) {
  using P = SuperPolynomial<GaussQ>;
  using S = HbarScalar<GaussQ>;
  if (order < 1) throw std::invalid_argument("evolution order must be at least 1");
  QmEvolution out;
  out.free_exponent = P(ps.universe);
  for (std::size_t i = 0; i < ps.q.size(); ++i)
    out.free_exponent -= P::generator(ps.universe, ps.p[i]) * P::generator(ps.universe, ps.q[i]);
  const P step = dt.scaled(S::monomial(GaussQ::i(), -1));
  P power = ps.constant(S(GaussQ(1)));
  P hpow = power;
  out.evolution = power;
  for (int n = 1; n <= order; ++n) {
    hpow = star_product(ps, hpow, H);
    power = power * step;
    out.evolution += (power * hpow).scaled(S(GaussQ(Rational(1) / factorial(static_cast<std::size_t>(n)))));
  }
  return out;
}

// ---------------------------------------------------------------- serialization

namespace detail {

inline nlohmann::json xi_json(const XiExponents& x) { return {{"two_pi_hbar", to_string(x.two_pi_hbar)}, {"phase_hbar", to_string(x.phase_hbar)}}; }

}  // namespace detail

inline nlohmann::json to_json(const BFState& s) {
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : s.universe->generators()) gens.push_back({{"name", g.name}, {"ghost", g.ghost}});
  nlohmann::json terms = nlohmann::json::array();
  const auto& u = *s.universe;
  for (const auto& [m, c] : s.action.terms()) {
    nlohmann::json mono = nlohmann::json::array();
    for (std::size_t j = 0; j < u.size(); ++j) {
      const auto& g = u.generator(j);
      int e = g.odd() ? static_cast<int>((m.odd >> u.slot(j)) & 1u) : m.even[u.slot(j)];
      if (e) mono.push_back({g.name, e});
    }
    nlohmann::json coeff = nlohmann::json::array();
    for (const auto& [pw, v] : c.terms()) coeff.push_back({pw, to_string(v)});
    terms.push_back({{"monomial", mono}, {"coeff", coeff}});
  }
  return {{"propagator", to_json(s.prop)},
          {"k", s.k},
          {"dim", s.dim},
          {"generators", gens},
          {"prefactor", {{"xi", detail::xi_json(s.prefactor.xi)}, {"ber", to_string(s.prefactor.ber)}}},
          {"action", terms}};
}

inline BFState bfstate_from_json(const nlohmann::json& j) {
  BFState s = abelian_state(propagator_from_json(j.at("propagator")), j.at("k").get<int>(), j.at("dim").get<std::size_t>());
  std::vector<Generator> gens;
  for (const auto& g : j.at("generators")) gens.push_back({g.at("name").get<std::string>(), g.at("ghost").get<int>()});
  if (!Universe(gens).same_as(*s.universe)) throw std::invalid_argument("serialized generators do not match the propagator");
  SuperPolynomial<Rational> S(s.universe);
  for (const auto& t : j.at("action")) {
    std::vector<HbarScalar<Rational>::Term> cs;
    for (const auto& c : t.at("coeff")) cs.emplace_back(c.at(0).get<int>(), detail::parse_rational(c.at(1)));
    SuperPolynomial<Rational> term = SuperPolynomial<Rational>::constant(s.universe, HbarScalar<Rational>::from_terms(cs));
    for (const auto& f : t.at("monomial"))
      for (int e = 0; e < f.at(1).get<int>(); ++e) term = term * SuperPolynomial<Rational>::generator(s.universe, f.at(0).get<std::string>());
    S += term;
  }
  s.action = S;
  const auto& pf = j.at("prefactor");
  s.prefactor = {{detail::parse_rational(pf.at("xi").at("two_pi_hbar")), detail::parse_rational(pf.at("xi").at("phase_hbar"))},
                 detail::parse_rational(pf.at("ber"))};
  return s;
}

}  // namespace bvkit

#endif  // BVKIT_BFSTATE_HPP
