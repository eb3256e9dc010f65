#ifndef BVKIT_WICK_HPP
#define BVKIT_WICK_HPP

#include <map>
#include <stdexcept>
#include <vector>

#include "bvkit/superpoly.hpp"

namespace bvkit {

/// Action split into a Gaussian part on fluctuation generators and an interaction.
template <class C>
struct SplitAction {
  UniversePtr universe;
  std::vector<std::size_t> fluctuations;
  SuperPolynomial<C> quadratic;
  SuperPolynomial<C> interaction;
};

/// Raw Gaussian normalization: Ber of the Hessian of (i/hbar) S0 and the fluctuation dimensions.
template <class C>
struct GaussianNormalization {
  HbarScalar<C> hessian_berezinian;
  int even_dim = 0;
  int odd_dim = 0;
};

template <class C>
struct PushforwardResult {
  SuperPolynomial<C> effective_action;
  GaussianNormalization<C> normalization;
  Matrix<HbarScalar<C>> propagator;
};

namespace detail {

template <class C>
class WickEngine {
 public:
  using S = HbarScalar<C>;
  using P = SuperPolynomial<C>;

  explicit WickEngine(const SplitAction<C>& a) : a_(a), u_(*a.universe) {
    fluct_pos_.assign(u_.size(), -1);
    even_fluct_.assign(u_.num_even(), false);
    for (std::size_t k = 0; k < a.fluctuations.size(); ++k) {
      std::size_t g = a.fluctuations[k];
      if (g >= u_.size()) throw std::out_of_range("fluctuation index out of range");
      if (fluct_pos_[g] >= 0) throw std::invalid_argument("duplicate fluctuation generator");
      fluct_pos_[g] = static_cast<int>(k);
      if (u_.generator(g).odd())
        fluct_odd_ |= std::uint64_t{1} << u_.slot(g);
      else
        even_fluct_[u_.slot(g)] = true;
    }
    build_propagator();
  }

  const Matrix<S>& propagator() const { return g_; }
  const GaussianNormalization<C>& normalization() const { return norm_; }

  int residual_degree(const Monomial& m) const {
    int r = std::popcount(m.odd & ~fluct_odd_);
    for (std::size_t s = 0; s < m.even.size(); ++s)
      if (!even_fluct_[s]) r += m.even[s];
    return r;
  }
  int fluct_degree(const Monomial& m) const { return m.degree() - residual_degree(m); }

  /// Gaussian expectation of a polynomial, acting on fluctuation factors only.
  P expectation(const P& p) {
    P out(a_.universe);
    for (const auto& [m, c] : p.terms()) {
      Monomial res = m, fl = m;
      res.odd = m.odd & ~fluct_odd_;
      fl.odd = m.odd & fluct_odd_;
      for (std::size_t s = 0; s < m.even.size(); ++s) {
        if (even_fluct_[s]) res.even[s] = 0;
        else fl.even[s] = 0;
      }
      S e = expect_fluct(fl);
      if (e.is_zero()) continue;
      int sign = koszul_merge_sign(res.odd, fl.odd);
      S v = c * e;
      out.add(res, sign > 0 ? v : -v);
    }
    return out;
  }

 private:
  void build_propagator() {
    using T = ScalarTraits<C>;
    const auto& fl = a_.fluctuations;
    const std::size_t n = fl.size();
    for (const auto& [m, c] : a_.quadratic.terms()) {
      if (residual_degree(m) != 0 || m.degree() != 2) throw std::invalid_argument("quadratic part must be quadratic in fluctuations");
      if (!c.is_constant()) throw std::invalid_argument("quadratic part must have hbar-independent coefficients");
    }
    Matrix<C> hess(n, n);
    for (std::size_t a = 0; a < n; ++a) {
      P da = a_.quadratic.derive(fl[a]);
      for (std::size_t c = 0; c < n; ++c) {
        P lin = P::generator(a_.universe, fl[c]);
        hess(a, c) = da.coefficient(lin.terms().begin()->first).coeff(0);
      }
    }
    Matrix<C> minv;
    try {
      minv = inverse(hess.transpose());
    } catch (const SingularMatrix&) {
      throw SingularMatrix("non-invertible quadratic form on fluctuations");
    }
    g_ = Matrix<S>(n, n);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) {
        C v = minv(b, c) * T::imag_unit();
        if (u_.generator(fl[b]).odd()) v = -v;
        g_(b, c) = S::monomial(v, 1);
      }
    std::vector<Generator> basis;
    for (auto g : fl) basis.push_back(u_.generator(g));
    for (const auto& g : basis) (g.odd() ? norm_.odd_dim : norm_.even_dim) += 1;
    const int sdim = norm_.even_dim - norm_.odd_dim;
    norm_.hessian_berezinian = S::monomial(berezinian(SuperMatrix<C>(basis, basis, hess)) * quarter_turn<C>(sdim), -sdim);
  }

  S expect_fluct(const Monomial& m) {
    if (m.degree() == 0) return S(ScalarTraits<C>::one());
    if (m.degree() % 2) return S();
    auto it = memo_.find(m);
    if (it != memo_.end()) return it->second;
    S total;
    int first_even = -1;
    for (std::size_t s = 0; s < m.even.size(); ++s)
      if (m.even[s]) {
        first_even = static_cast<int>(s);
        break;
      }
    if (first_even >= 0) {
      std::size_t ga = u_.even_generator(first_even);
      int ia = fluct_pos_[ga];
      Monomial rest = m;
      rest.even[first_even] -= 1;
      for (std::size_t s = 0; s < rest.even.size(); ++s) {
        if (!rest.even[s]) continue;
        std::size_t gb = u_.even_generator(static_cast<int>(s));
        const S& prop = g_(ia, fluct_pos_[gb]);
        if (prop.is_zero()) continue;
        Monomial r2 = rest;
        r2.even[s] -= 1;
        S sub = expect_fluct(r2);
        if (sub.is_zero()) continue;
        total += (prop * sub).scaled(ScalarTraits<C>::from_rational(Rational(rest.even[s])));
      }
    } else {
      int sa = std::countr_zero(m.odd);
      std::size_t ga = u_.odd_generator(sa);
      int ia = fluct_pos_[ga];
      std::uint64_t rest = m.odd & ~(std::uint64_t{1} << sa);
      std::uint64_t scan = rest;
      int between = 0;
      while (scan) {
        int sb = std::countr_zero(scan);
        scan &= scan - 1;
        const S& prop = g_(ia, fluct_pos_[u_.odd_generator(sb)]);
        if (!prop.is_zero()) {
          Monomial r2 = m;
          r2.odd = rest & ~(std::uint64_t{1} << sb);
          S sub = expect_fluct(r2);
          if (!sub.is_zero()) total += (between % 2) ? -(prop * sub) : prop * sub;
        }
        ++between;
      }
    }
    memo_.emplace(m, total);
    return total;
  }

  const SplitAction<C>& a_;
  const Universe& u_;
  std::vector<int> fluct_pos_;
  std::vector<bool> even_fluct_;
  std::uint64_t fluct_odd_ = 0;
  Matrix<S> g_;
  GaussianNormalization<C> norm_;
  std::map<Monomial, S> memo_;
};

}  // namespace detail

/// Effective action S' with exp((i/hbar) S') = <exp((i/hbar) I)>, truncated to residual degree and loop order <= order.
template <class C>
PushforwardResult<C> gaussian_pushforward(const SplitAction<C>& a, int order) {
  using S = HbarScalar<C>;
  using P = SuperPolynomial<C>;
  using T = ScalarTraits<C>;
  if (order < 0) throw std::invalid_argument("order must be non-negative");
  constexpr int kMaxOrder = 10;
  if (order > kMaxOrder) throw OrderOverflow("pushforward order exceeds " + std::to_string(kMaxOrder));
  a.quadratic.check(a.interaction);
  detail::WickEngine<C> eng(a);
  const auto& u = a.universe;

  P passthrough(u);
  const int gmax = order == 0 ? 0 : 4 * order - 2;
  std::vector<P> vertices(gmax + 1, P(u));
  for (const auto& [m, c] : a.interaction.terms()) {
    int r = eng.residual_degree(m), f = eng.fluct_degree(m);
    if (f == 0) {
      passthrough.add(m, c);
      continue;
    }
    if (r > order) continue;
    for (const auto& [pw, coef] : c.terms()) {
      int w2 = 2 * r + f - 2 + 2 * pw;
      if (w2 < 1) throw std::invalid_argument("interaction term lacks positive order: " + a.interaction.monomial_string(m));
      if (w2 <= gmax) vertices[w2].add(m, S::monomial(coef, pw));
    }
  }

  auto prune = [&](const P& p) { return p.filter([&](const Monomial& m, const S&) { return eng.residual_degree(m) <= order; }); };
  auto series_mul = [&](const std::vector<P>& x, const std::vector<P>& y) {
    std::vector<P> z(gmax + 1, P(u));
    for (int i = 0; i <= gmax; ++i) {
      if (x[i].is_zero()) continue;
      for (int j = 0; i + j <= gmax; ++j) {
        if (y[j].is_zero()) continue;
        z[i + j] += prune(x[i] * y[j]);
      }
    }
    return z;
  };

  const S i_over_h = S::monomial(T::imag_unit(), -1);
  std::vector<P> expo(gmax + 1, P(u));
  expo[0] = P::constant(u, S(T::one()));
  std::vector<P> power = expo;
  std::vector<P> weighted(gmax + 1, P(u));
  for (int g = 1; g <= gmax; ++g) weighted[g] = vertices[g].scaled(i_over_h);
  for (int n = 1; n <= gmax; ++n) {
    power = series_mul(power, weighted);
    bool any = false;
    for (int g = 0; g <= gmax; ++g) {
      if (power[g].is_zero()) continue;
      any = true;
      expo[g] += power[g].scaled(S(T::from_rational(Rational(1) / factorial(n))));
    }
    if (!any) break;
  }

  std::vector<P> z(gmax + 1, P(u));
  for (int g = 0; g <= gmax; ++g) z[g] = eng.expectation(expo[g]);
  // log Z with Z_0 = 1
  std::vector<P> x = z;
  x[0] = P(u);
  std::vector<P> logz(gmax + 1, P(u));
  std::vector<P> xp(gmax + 1, P(u));
  xp[0] = P::constant(u, S(T::one()));
  for (int k = 1; k <= gmax; ++k) {
    xp = series_mul(xp, x);
    Rational coef = Rational((k % 2) ? 1 : -1) / k;
    bool any = false;
    for (int g = 0; g <= gmax; ++g) {
      if (xp[g].is_zero()) continue;
      any = true;
      logz[g] += xp[g].scaled(S(T::from_rational(coef)));
    }
    if (!any) break;
  }

  const S h_over_i = S::monomial(-T::imag_unit(), 1);
  P eff = prune(passthrough);
  for (int g = 0; g <= gmax; ++g) eff += logz[g].scaled(h_over_i);
  eff = eff.map_coefficients([&](const Monomial& m, const S& c) {
    return eng.residual_degree(m) <= order ? c.truncated(c.min_power(), order) : S();
  });
  return {eff, eng.normalization(), eng.propagator()};
}

template <class C>
SuperPolynomial<C> pushforward_series(const SplitAction<C>& a, int order) {
  return gaussian_pushforward(a, order).effective_action;
}

}  // namespace bvkit

#endif  // BVKIT_WICK_HPP
