#include <gtest/gtest.h>

#include "bvkit/random.hpp"
#include "bvkit/wick.hpp"

using namespace bvkit;
using P = SuperPolynomial<GaussQ>;
using S = ExactHbar;

namespace {

P gen(const UniversePtr& u, const std::string& n) { return P::generator(u, n); }
P num(const UniversePtr& u, const GaussQ& c) { return P::constant(u, S(c)); }
P hbar_num(const UniversePtr& u, const GaussQ& c, int pw) { return P::constant(u, S::monomial(c, pw)); }

std::vector<std::size_t> indices(const UniversePtr& u, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& n : names) out.push_back(u->index(n));
  return out;
}

P truncate(const P& p, int hi) {
  return p.map_coefficients([&](const Monomial&, const S& c) { return c.truncated(c.min_power(), hi); });
}

int residual_degree(const Monomial& m, std::uint64_t fl_odd) { return std::popcount(m.odd & ~fl_odd) + m.even_degree(); }

// Independent oracle for purely odd fluctuations: top Berezin coefficient of exp((i/hbar)(S0 + I)),
// divided by the free integral, then a truncated logarithm.
P berezin_effective_action(const SplitAction<GaussQ>& a, int order) {
  const auto& u = a.universe;
  std::uint64_t fl = 0;
  for (auto g : a.fluctuations) fl |= std::uint64_t{1} << u->slot(g);
  const S i_over_h = S::monomial(GaussQ::i(), -1);
  auto top = [&](const P& p) {
    P out(u);
    for (const auto& [m, c] : p.terms()) {
      if ((m.odd & fl) != fl) continue;
      Monomial res = m;
      res.odd = m.odd & ~fl;
      out.add(res, koszul_merge_sign(res.odd, fl) > 0 ? c : -c);
    }
    return out;
  };
  P z = top(exp_nilpotent((a.quadratic + a.interaction).scaled(i_over_h)));
  S z0 = top(exp_nilpotent(a.quadratic.scaled(i_over_h))).constant_term();
  P x = z.map_coefficients([&](const Monomial&, const S& c) { return c / z0; }) - num(u, GaussQ(1));
  const int extra = static_cast<int>(u->num_odd()) + 2;
  const int hi = order + extra;
  P logz(u), xp = num(u, GaussQ(1));
  for (int k = 1; k <= order + 2 * extra; ++k) {
    xp = truncate(xp * x, hi);
    logz += xp.scaled(S(GaussQ(Rational((k % 2) ? 1 : -1) / k)));
  }
  P eff = logz.scaled(S::monomial(-GaussQ::i(), 1));
  return eff.map_coefficients([&](const Monomial& m, const S& c) {
    return residual_degree(m, fl) <= order ? c.truncated(c.min_power(), order) : S();
  });
}

P random_odd_term(Rng& rng, const UniversePtr& u, const std::vector<std::string>& res, const std::vector<std::string>& fl, int nr,
                  int nf) {
  P t = num(u, rng.gauss());
  std::vector<std::string> r = res, f = fl;
  for (int k = 0; k < nr; ++k) t = t * gen(u, r[rng.integer(0, r.size() - 1)]);
  for (int k = 0; k < nf; ++k) t = t * gen(u, f[rng.integer(0, f.size() - 1)]);
  return t;
}

// Purely odd model: residual r1..r3, fluctuations f1..f2n with a random nondegenerate form.
SplitAction<GaussQ> random_odd_model_once(Rng& rng, int nfl) {
  std::vector<Generator> g;
  std::vector<std::string> res{"r1", "r2", "r3"}, fl;
  for (const auto& n : res) g.push_back({n, 1});
  for (int k = 1; k <= nfl; ++k) {
    fl.push_back("f" + std::to_string(k));
    g.push_back({fl.back(), 1});
  }
  auto u = Universe::make(g);
  P q(u);
  for (int k = 0; k + 1 < nfl; k += 2) q += num(u, GaussQ(rng.integer(1, 3))) * gen(u, fl[k]) * gen(u, fl[k + 1]);
  for (int k = 0; k < 2; ++k) q += random_odd_term(rng, u, res, fl, 0, 2);
  P inter(u);
  const std::vector<std::pair<int, int>> shapes{{1, 1}, {1, 1}, {2, 2}, {1, 3}, {0, 4}, {3, 1}, {2, 2}};
  for (auto [nr, nf] : shapes) inter += random_odd_term(rng, u, res, fl, nr, nf);
  inter += random_odd_term(rng, u, res, fl, 0, 2) * hbar_num(u, GaussQ(1), 1);
  return {u, indices(u, fl), q, inter};
}

SplitAction<GaussQ> random_odd_model(Rng& rng, int nfl) {
  for (;;) {
    auto a = random_odd_model_once(rng, nfl);
    try {
      gaussian_pushforward(a, 0);
      return a;
    } catch (const SingularMatrix&) {
    }
  }
}

// Lie algebra structure constants f[a][b][c] = coefficient of e_a in [e_b, e_c].
using Structure = std::vector<std::vector<std::vector<Rational>>>;

Structure su2_random_basis(Rng& rng) {
  Structure eps(3, std::vector<std::vector<Rational>>(3, std::vector<Rational>(3, Rational(0))));
  for (int a = 0; a < 3; ++a) {
    eps[a][(a + 1) % 3][(a + 2) % 3] = 1;
    eps[a][(a + 2) % 3][(a + 1) % 3] = -1;
  }
  Matrix<Rational> p(3, 3);
  do {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) p(r, c) = rng.rational(2, 2);
  } while (sgn(determinant(p)) == 0);
  Matrix<Rational> pi = inverse(p);
  Rational lam = rng.rational(3, 3);
  if (sgn(lam) == 0) lam = 1;
  // new basis e'_b = sum_i p(i,b) e_i
  Structure f(3, std::vector<std::vector<Rational>>(3, std::vector<Rational>(3, Rational(0))));
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        Rational s(0);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) s += pi(a, k) * eps[k][i][j] * p(i, b) * p(j, c);
        f[a][b][c] = lam * s;
      }
  return f;
}

Structure heisenberg() {
  Structure f(3, std::vector<std::vector<Rational>>(3, std::vector<Rational>(3, Rational(0))));
  f[2][0][1] = 1;
  f[2][1][0] = -1;
  return f;
}

struct ShearedModel {
  UniversePtr u;
  P full;
  DarbouxPairing pairing;
  SplitAction<GaussQ> split;
};

P flow(const P& g, const P& s, const DarbouxPairing& d) {
  P out = s, term = s;
  for (int n = 1; n <= 8; ++n) {
    term = bv_bracket(g, term, d).scaled(S(GaussQ(Rational(1, n))));
    if (term.is_zero()) return out;
    out += term;
  }
  throw std::runtime_error("flow did not terminate");
}

// Chevalley-Eilenberg action plus a free odd pair, moved by two linear canonical transformations.
ShearedModel sheared_model(Rng& rng, const Structure& f) {
  std::vector<Generator> g;
  for (int a = 0; a < 3; ++a) g.push_back({"c" + std::to_string(a), 1});
  for (int a = 0; a < 3; ++a) g.push_back({"c+" + std::to_string(a), -2});
  for (int a = 0; a < 3; ++a) g.push_back({"p" + std::to_string(a), 1});
  for (int a = 0; a < 3; ++a) g.push_back({"p+" + std::to_string(a), -2});
  for (int a = 0; a < 3; ++a) g.push_back({"x" + std::to_string(a), -1});
  for (int a = 0; a < 3; ++a) g.push_back({"x+" + std::to_string(a), 0});
  auto u = Universe::make(g);
  auto G = [&](const std::string& n, int a) { return gen(u, n + std::to_string(a)); };
  std::vector<std::tuple<std::string, std::string, int>> pairs;
  for (int a = 0; a < 3; ++a)
    for (std::string n : {"c", "p", "x"}) pairs.emplace_back(n + std::to_string(a), n + "+" + std::to_string(a), 1);
  auto d = DarbouxPairing::by_name(u, pairs);
  auto rnd = [&]() { return num(u, GaussQ(rng.rational(2, 2))); };

  P s(u);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        if (sgn(f[a][b][c]) != 0) s += num(u, GaussQ(f[a][b][c] / 2)) * G("c+", a) * G("c", b) * G("c", c);
  for (int a = 0; a < 3; ++a) s += num(u, GaussQ(rng.integer(1, 3))) * G("x", a) * G("p", a);
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) s += rnd() * G("p", a) * G("p", b);
  P g1(u), g2(u);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      g1 += rnd() * G("c+", a) * (G("p", b) + rnd() * G("x", b));
      g2 += rnd() * G("p+", a) * G("c", b);
    }
  P full = flow(g2, flow(g1, s, d), d);
  std::vector<std::size_t> fl;
  for (std::string n : {"p", "x"})
    for (int a = 0; a < 3; ++a) fl.push_back(u->index(n + std::to_string(a)));
  std::uint64_t flmask = 0, antimask = 0;
  for (auto k : fl) flmask |= std::uint64_t{1} << u->slot(k);
  P on_l = full.filter([&](const Monomial& m, const S&) {
    for (std::string n : {"p+", "x+"})
      for (int a = 0; a < 3; ++a) {
        std::size_t k = u->index(n + std::to_string(a));
        if (m.even[u->slot(k)]) return false;
      }
    return true;
  });
  (void)antimask;
  P quad = on_l.filter([&](const Monomial& m, const S&) { return m.degree() == 2 && (m.odd & flmask) == m.odd && m.even_degree() == 0; });
  return {u, full, d, {u, fl, quad, on_l - quad}};
}

P qme_residual(const P& s, const DarbouxPairing& d) {
  return bv_bracket(s, s, d).scaled(S(GaussQ(Rational(1, 2)))) - bv_laplacian(s, d).scaled(S::monomial(GaussQ::i(), 1));
}

}  // namespace

TEST(Pushforward, ZeroInteraction) {
  auto u = Universe::make({{"x", 0}, {"phi", 0}});
  SplitAction<GaussQ> a{u, indices(u, {"phi"}), num(u, GaussQ(Rational(3, 2))) * gen(u, "phi") * gen(u, "phi"), P(u)};
  auto r = gaussian_pushforward(a, 3);
  EXPECT_TRUE(r.effective_action.is_zero());
  EXPECT_EQ(r.normalization.hessian_berezinian, S::monomial(GaussQ(0, 3), -1));
  EXPECT_EQ(r.propagator(0, 0), S::monomial(GaussQ(0, Rational(1, 3)), 1));
}

TEST(Pushforward, CompletingTheSquareOneEvenVariable) {
  auto u = Universe::make({{"x", 0}, {"phi", 0}});
  const Rational q(5, 2), j(3, 1);
  P x = gen(u, "x"), phi = gen(u, "phi");
  SplitAction<GaussQ> a{u, indices(u, {"phi"}), num(u, GaussQ(q / 2)) * phi * phi, num(u, GaussQ(j)) * x * phi};
  // S' = -J^2/(2Q) with J = j x
  P expect = num(u, GaussQ(-j * j / (2 * q))) * x * x;
  for (int order : {2, 3, 4}) EXPECT_EQ(pushforward_series(a, order), expect);
  EXPECT_TRUE(pushforward_series(a, 1).is_zero());
}

TEST(Pushforward, CompletingTheSquareSeveralVariables) {
  Rng rng(17);
  auto u = Universe::make({{"x1", 0}, {"x2", 0}, {"phi1", 0}, {"phi2", 0}});
  P x1 = gen(u, "x1"), x2 = gen(u, "x2"), f1 = gen(u, "phi1"), f2 = gen(u, "phi2");
  // Q = [[2,1],[1,3]], J = (x1 + x2, 2 x1)
  P quad = num(u, GaussQ(1)) * f1 * f1 + f1 * f2 + num(u, GaussQ(Rational(3, 2))) * f2 * f2;
  P j1 = x1 + x2, j2 = num(u, GaussQ(2)) * x1;
  SplitAction<GaussQ> a{u, indices(u, {"phi1", "phi2"}), quad, j1 * f1 + j2 * f2};
  // Q^{-1} = (1/5)[[3,-1],[-1,2]]
  P expect = (num(u, GaussQ(3)) * j1 * j1 - num(u, GaussQ(2)) * j1 * j2 + num(u, GaussQ(2)) * j2 * j2)
                 .scaled(S(GaussQ(Rational(-1, 10))));
  EXPECT_EQ(pushforward_series(a, 2), expect);
}

TEST(Pushforward, SingleOddPairMatchesBerezinIntegral) {
  auto u = Universe::make({{"e1", 1}, {"e2", -1}, {"t1", 1}, {"t2", -1}});
  P e1 = gen(u, "e1"), e2 = gen(u, "e2"), t1 = gen(u, "t1"), t2 = gen(u, "t2");
  SplitAction<GaussQ> a{u, indices(u, {"t1", "t2"}), num(u, GaussQ(2)) * t1 * t2,
                        num(u, GaussQ(3)) * e1 * t2 + num(u, GaussQ(0, 1)) * e2 * t1};
  P direct = berezin_effective_action(a, 2);
  EXPECT_EQ(pushforward_series(a, 2), direct);
  EXPECT_FALSE(direct.is_zero());
  // by hand: <t1 t2> = -i hbar/2 gives S' = (3i/2) e1 e2
  EXPECT_EQ(direct, num(u, GaussQ(0, Rational(3, 2))) * e1 * e2);
}

TEST(Pushforward, MatchesBerezinIntegralOnRandomOddModels) {
  Rng rng(23);
  for (int trial = 0; trial < 12; ++trial) {
    int nfl = trial % 3 == 0 ? 2 : (trial % 3 == 1 ? 4 : 6);
    auto a = random_odd_model(rng, nfl);
    for (int order : {1, 2, 3}) {
      P lhs = pushforward_series(a, order);
      P rhs = berezin_effective_action(a, order);
      EXPECT_EQ(lhs, rhs) << "trial " << trial << " order " << order;
    }
  }
}

TEST(Pushforward, TwoStagesEqualOneStage) {
  Rng rng(29);
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_odd_model(rng, trial % 2 ? 4 : 6);
    const auto& u = a.universe;
    const int order = 3;
    std::vector<std::size_t> st1(a.fluctuations.begin(), a.fluctuations.begin() + 2);
    std::vector<std::size_t> st2(a.fluctuations.begin() + 2, a.fluctuations.end());
    std::uint64_t m1 = 0, m2 = 0;
    for (auto k : st1) m1 |= std::uint64_t{1} << u->slot(k);
    for (auto k : st2) m2 |= std::uint64_t{1} << u->slot(k);
    P total = a.quadratic + a.interaction;
    auto pure_quad = [&](std::uint64_t mask) {
      return [mask](const Monomial& m, const S& c) {
        bool quad = m.degree() == 2 && (m.odd & mask) == m.odd && m.even_degree() == 0;
        return quad ? S(c.coeff(0)) : S();
      };
    };
    P q1 = total.map_coefficients(pure_quad(m1));
    SplitAction<GaussQ> s1{u, st1, q1, total - q1};
    P mid(u);
    try {
      mid = pushforward_series(s1, 9);
    } catch (const SingularMatrix&) {
      continue;
    }
    P q2 = mid.map_coefficients(pure_quad(m2));
    SplitAction<GaussQ> s2{u, st2, q2, mid - q2};
    EXPECT_EQ(pushforward_series(s2, order), pushforward_series(a, order)) << "trial " << trial;
    ++checked;
  }
  EXPECT_GE(checked, 5);
}

TEST(Pushforward, PreservesQuantumMasterEquation) {
  Rng rng(31);
  const int order = 6;
  for (int trial = 0; trial < 4; ++trial) {
    Structure f = trial % 2 ? heisenberg() : su2_random_basis(rng);
    auto m = sheared_model(rng, f);
    ASSERT_TRUE(qme_residual(m.full, m.pairing).is_zero());
    auto res = gaussian_pushforward(m.split, order);
    std::vector<std::tuple<std::string, std::string, int>> pairs;
    std::vector<std::string> spect;
    for (int a = 0; a < 3; ++a) {
      pairs.emplace_back("c" + std::to_string(a), "c+" + std::to_string(a), 1);
      for (std::string n : {"p", "p+", "x", "x+"}) spect.push_back(n + std::to_string(a));
    }
    auto d = DarbouxPairing::by_name(m.u, pairs, spect);
    P eff = res.effective_action;
    EXPECT_NE(eff, m.split.interaction.filter([&](const Monomial& mm, const S&) {
      std::uint64_t flm = 0;
      for (auto k : m.split.fluctuations) flm |= std::uint64_t{1} << m.u->slot(k);
      return (mm.odd & flm) == 0;
    }));
    bool has_loop = false;
    for (const auto& [mm, c] : eff.terms()) has_loop |= c.max_power() >= 1;
    if (trial % 2 == 0) {
      EXPECT_TRUE(has_loop) << eff;
    }
    P defect = qme_residual(eff, d).filter([&](const Monomial& mm, const S&) { return mm.degree() <= order - 2; });
    defect = defect.map_coefficients([&](const Monomial&, const S& c) { return c.truncated(c.min_power(), order); });
    EXPECT_TRUE(defect.is_zero()) << defect.str();
  }
}

TEST(Pushforward, Errors) {
  auto u = Universe::make({{"x", 0}, {"phi", 0}, {"psi", 0}});
  P x = gen(u, "x"), phi = gen(u, "phi"), psi = gen(u, "psi");
  SplitAction<GaussQ> degenerate{u, indices(u, {"phi", "psi"}), phi * phi, x * psi};
  EXPECT_THROW(pushforward_series(degenerate, 2), SingularMatrix);
  SplitAction<GaussQ> ok{u, indices(u, {"phi"}), phi * phi, x * phi};
  EXPECT_THROW(pushforward_series(ok, 11), OrderOverflow);
  EXPECT_THROW(pushforward_series(ok, -1), std::invalid_argument);
  SplitAction<GaussQ> nonpositive{u, indices(u, {"phi"}), phi * phi, phi};
  EXPECT_THROW(pushforward_series(nonpositive, 2), std::invalid_argument);
}

TEST(Pushforward, FloatBackendAgreesWithExact) {
  Rng rng(37);
  auto a = random_odd_model(rng, 4);
  P exact = pushforward_series(a, 3);
  SplitAction<Complex> af{a.universe, a.fluctuations, a.quadratic.template convert<Complex>(),
                          a.interaction.template convert<Complex>()};
  auto fl = pushforward_series(af, 3);
  auto diff = fl - exact.template convert<Complex>();
  EXPECT_LT(diff.max_coefficient(), 1e-9);
}
