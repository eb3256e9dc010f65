#include <gtest/gtest.h>

#include "bvkit/bfstate.hpp"
#include "bvkit/random.hpp"

using namespace bvkit;

namespace {

using P = SuperPolynomial<GaussQ>;
using H = HbarScalar<GaussQ>;

Rational q(long n, long d = 1) { return make_rational(n, d); }

Propagator1D std_kernel(const char* name) { return standard_kernel(parse_standard_kind(name)); }

SuperPolynomial<Rational> gen(const BFState& s, std::size_t k) { return SuperPolynomial<Rational>::generator(s.universe, k); }

struct Gluing {
  const char* name;
  Propagator1D m1, m2;
  bool ring;
  std::vector<InterfacePoint> interface() const { return ring ? ring_interface(m1, m2) : chain_interface(m1, m2); }
};

std::vector<Gluing> interval_cases() {
  return {{"E1", std_kernel("interval-12"), translated(std_kernel("interval-12"), 1), false},
          {"E2", std_kernel("interval-11"), translated(std_kernel("interval-22"), 1), false},
          {"E3", std_kernel("interval-11"), translated(std_kernel("interval-22"), 1), true}};
}

int ghost_of(const SuperPolynomial<Rational>& p, const Monomial& m) { return p.ghost(m); }

// Independent evaluation of the measure normalization: sum over form degrees j of
// ((-1)^k/4 + j(-1)^{j-1}/2) h_j and (-(-1)^k/4 + j(-1)^{j-1}/2) h_j.
XiExponents xi_oracle(std::vector<long> h, int k) {
  XiExponents out;
  for (std::size_t j = 0; j < h.size(); ++j) {
    Rational sk = k % 2 ? q(-1, 4) : q(1, 4);
    Rational sj = q(static_cast<long>(j), 2) * (j % 2 ? 1 : -1);
    out.two_pi_hbar += (sk + sj) * h[j];
    out.phase_hbar += (-sk + sj) * h[j];
  }
  return out;
}

P random_poly(const PhaseSpace& ps, Rng& rng, int degree) {
  P out(ps.universe);
  for (int a = 0; a <= degree; ++a)
    for (int b = 0; a + b <= degree; ++b) {
      if (rng.integer(0, 2) == 0) continue;
      P t = ps.constant(H(rng.gauss()));
      for (int j = 0; j < a; ++j) t = t * P::generator(ps.universe, ps.q[static_cast<std::size_t>(rng.integer(0, static_cast<long>(ps.q.size()) - 1))]);
      for (int j = 0; j < b; ++j) t = t * P::generator(ps.universe, ps.p[static_cast<std::size_t>(rng.integer(0, static_cast<long>(ps.p.size()) - 1))]);
      out += t;
    }
  return out;
}

P to_gauss(const SuperPolynomial<Rational>& p) {
  P out(p.universe());
  for (const auto& [m, c] : p.terms()) {
    std::vector<H::Term> ts;
    for (const auto& [pw, v] : c.terms()) ts.emplace_back(pw, GaussQ(v));
    out.add(m, H::from_terms(ts));
  }
  return out;
}

}  // namespace

TEST(AbelianState, QuantumMechanicsIntervalIsTheIdentityKernel) {
  // d1 at the initial time, d2 at the final time: exponent -p q
  auto s = abelian_state(qm_interval(), 0, 1);
  EXPECT_EQ(s.universe->size(), 2u);
  auto A = gen(s, s.a({0, Side::Lo}, 0)), B = gen(s, s.b({0, Side::Hi}, 0));
  EXPECT_EQ(s.action, -(B * A));
  EXPECT_TRUE(s.prefactor.xi == XiExponents{});
}

TEST(AbelianState, StandardIntervalCarriesTheOppositeOrientation) {
  auto s = abelian_state(std_kernel("interval-12"), 0, 1);
  auto A = gen(s, s.a({0, Side::Hi}, 0)), B = gen(s, s.b({0, Side::Lo}, 0));
  EXPECT_EQ(s.action, B * A);
}

TEST(AbelianState, Interval11CouplesTheZeroModeToTheEndpoints) {
  auto s = abelian_state(std_kernel("interval-11"), 0, 1);
  auto zp = gen(s, s.zplus(0, 0));
  auto q1 = gen(s, s.a({0, Side::Lo}, 0)), q2 = gen(s, s.a({0, Side::Hi}, 0));
  EXPECT_EQ(s.action, zp * (q2 - q1));
  EXPECT_EQ(s.universe->generator(s.z(0, 0)).ghost, -1);
  EXPECT_EQ(s.universe->generator(s.zplus(0, 0)).ghost, 0);
}

TEST(AbelianState, CircleHasOnlyThePrefactor) {
  for (int k = 0; k < 2; ++k) {
    auto s = abelian_state(std_kernel("circle"), k, 3);
    EXPECT_TRUE(s.action.is_zero());
    EXPECT_EQ(s.universe->size(), 12u);
    EXPECT_EQ(s.prefactor.xi, xi_oracle({3, 3}, k));
  }
}

TEST(AbelianState, ActionIsBilinearWithGhostZero) {
  for (const char* name : {"interval-12", "interval-11", "interval-22"})
    for (int k = 0; k < 3; ++k) {
      auto s = abelian_state(relabel(std_kernel(name), q(2, 3), q(1, 5)), k, 2);
      for (const auto& [m, c] : s.action.terms()) {
        EXPECT_EQ(m.degree(), 2);
        EXPECT_EQ(ghost_of(s.action, m), 0);
      }
    }
}

TEST(AbelianState, RejectsMismatchedBasis) {
  auto d = std_kernel("interval-11");
  d.basis.duals[0].pieces[0] = Poly1(q(2));
  EXPECT_THROW(abelian_state(d, 0), std::invalid_argument);
  auto e = std_kernel("interval-11");
  e.basis = {};
  EXPECT_THROW(abelian_state(e, 0), DecompositionFailure);
  auto f = std_kernel("circle");
  f.basis.reps[0].pieces.push_back(Poly1(1));
  EXPECT_THROW(abelian_state(f, 1), std::invalid_argument);
  EXPECT_THROW(abelian_state(std_kernel("circle"), 1, 0), std::invalid_argument);
}

TEST(Mqme, StandardStatesSatisfyTheMasterEquation) {
  for (const char* name : {"interval-12", "interval-11", "interval-22", "circle"})
    for (int k = 0; k < 2; ++k)
      for (std::size_t dim = 1; dim <= 2; ++dim) {
        auto r = mqme_check(abelian_state(std_kernel(name), k, dim));
        EXPECT_TRUE(r.zero()) << name << " k=" << k;
      }
}

TEST(Mqme, CorruptedActionIsDetected) {
  for (int k = 0; k < 2; ++k) {
    auto s = abelian_state(std_kernel("interval-11"), k, 1);
    s.action += gen(s, s.z(0, 0)) * gen(s, s.zplus(0, 0));
    auto r = mqme_check(s);
    EXPECT_FALSE(r.laplacian.is_zero());
    EXPECT_FALSE(r.zero());
  }
  auto s = abelian_state(std_kernel("interval-11"), 1, 1);
  s.action += gen(s, s.z(0, 0)) * gen(s, s.z(0, 0));
  auto r = mqme_check(s);
  EXPECT_TRUE(r.laplacian.is_zero());
  EXPECT_FALSE(r.bracket.is_zero());
}

TEST(Glue, IntervalCasesReproduceTheDirectState) {
  for (const auto& gcase : interval_cases())
    for (int k = 0; k < 2; ++k)
      for (std::size_t dim = 1; dim <= 2; ++dim) {
        SCOPED_TRACE(std::string(gcase.name) + " k=" + std::to_string(k) + " dim=" + std::to_string(dim));
        auto g = glue_states(abelian_state(gcase.m1, k, dim), abelian_state(gcase.m2, k, dim), gcase.interface());
        auto direct = abelian_state(g.data.result, k, dim);
        EXPECT_EQ(g.state.action, direct.action);
        EXPECT_TRUE(g.state.universe->same_as(*direct.universe));
        EXPECT_TRUE(mqme_check(g.state).zero());
        EXPECT_EQ(g.state.prefactor.ber * g.state.prefactor.ber, Rational(1));
      }
}

TEST(Glue, E1IsTheIdentityKernelOnTheDoubledInterval) {
  for (int k = 0; k < 2; ++k) {
    auto c = interval_cases()[0];
    auto g = glue_states(abelian_state(c.m1, k), abelian_state(c.m2, k), c.interface());
    const auto& s = g.state;
    Rational sign(k == 0 ? 1 : -1);
    EXPECT_EQ(s.action, (gen(s, s.b({0, Side::Lo}, 0)) * gen(s, s.a({1, Side::Hi}, 0))).scaled(sign));
    EXPECT_EQ(g.eliminated_boundary, 1u);
    EXPECT_EQ(g.eliminated_redshirts, 0u);
    EXPECT_EQ(s.prefactor, (Prefactor{{}, Rational(1)}));
  }
}

TEST(Glue, E2IntegratesAllRedshirts) {
  for (int k = 0; k < 2; ++k) {
    auto c = interval_cases()[1];
    auto s1 = abelian_state(c.m1, k), s2 = abelian_state(c.m2, k);
    EXPECT_EQ(s1.universe->size() + s2.universe->size(), 8u);
    auto g = glue_states(s1, s2, c.interface());
    EXPECT_EQ(g.data.redshirt_generators(), 4u);
    EXPECT_EQ(g.eliminated_redshirts, 4u);
    EXPECT_EQ(g.state.classes(), 0u);
    EXPECT_EQ(g.data.ber_lambda() * g.data.ber_lambda(), Rational(1));
    const auto& s = g.state;
    // interval-12 after the flip t -> 2 - t: d1 at the left end
    Rational sign(k == 0 ? -1 : 1);
    EXPECT_EQ(s.action, (gen(s, s.b({1, Side::Hi}, 0)) * gen(s, s.a({0, Side::Lo}, 0))).scaled(sign));
    auto flipped = abelian_state(relabel(std_kernel("interval-12"), q(-1, 2), 1), k);
    EXPECT_EQ(flipped.action.size(), s.action.size());
  }
}

TEST(Glue, E3ClosesUpWithoutRedshirts) {
  for (int k = 0; k < 2; ++k) {
    auto c = interval_cases()[2];
    auto g = glue_states(abelian_state(c.m1, k, 2), abelian_state(c.m2, k, 2), c.interface());
    EXPECT_EQ(g.eliminated_redshirts, 0u);
    EXPECT_EQ(g.eliminated_boundary, 4u);
    EXPECT_EQ(g.state.classes(), 2u);
    EXPECT_TRUE(g.state.action.is_zero());
    EXPECT_TRUE(g.normalization.holds());
  }
}

TEST(Glue, RandomChainsMatchTheDirectState) {
  Rng rng(41);
  const char* firsts[] = {"interval-11", "interval-12"};
  const char* lasts[] = {"interval-22", "interval-12"};
  for (int trial = 0; trial < 24; ++trial) {
    Rational pos(0);
    auto piece = [&](const char* name) {
      Rational len = Rational(1) + rng.rational_unit();
      auto d = relabel(std_kernel(name), Rational(1) / len, -pos / len);
      pos += len;
      return d;
    };
    const int k = trial % 2;
    const std::size_t dim = 1 + static_cast<std::size_t>(rng.integer(0, 1));
    auto chain = piece(firsts[(trial / 2) % 2]);
    BFState state = abelian_state(chain, k, dim);
    long mid = rng.integer(0, 2);
    for (long j = 0; j < mid; ++j) {
      auto nxt = piece("interval-12");
      auto g = glue_states(state, abelian_state(nxt, k, dim), chain_interface(state.prop, nxt));
      state = g.state;
    }
    auto last = piece(lasts[(trial / 4) % 2]);
    bool ring = trial % 8 < 2;
    auto sigma = ring ? ring_interface(state.prop, last) : chain_interface(state.prop, last);
    auto g = glue_states(state, abelian_state(last, k, dim), sigma);
    SCOPED_TRACE(trial);
    auto direct = abelian_state(g.data.result, k, dim);
    EXPECT_EQ(g.state.action, direct.action);
    EXPECT_TRUE(mqme_check(g.state).zero());
    if (k == 1) {
      EXPECT_EQ(g.state.prefactor.xi, direct.prefactor.xi);
    }
  }
}

TEST(Glue, SurvivingZeroModeCouplesThroughTheSecondPiece) {
  auto m1 = std_kernel("interval-11");
  auto m2 = translated(std_kernel("interval-12"), 1);
  auto g = glue_states(abelian_state(m1, 0), abelian_state(m2, 0), chain_interface(m1, m2));
  const auto& s = g.state;
  ASSERT_EQ(s.classes(), 1u);
  auto zp = gen(s, s.zplus(0, 0));
  auto qa = gen(s, s.a({0, Side::Lo}, 0)), qb = gen(s, s.a({1, Side::Hi}, 0));
  EXPECT_EQ(s.action, zp * (qb - qa));
}

TEST(Glue, RejectsMismatchedStates) {
  auto m1 = std_kernel("interval-12");
  auto m2 = translated(std_kernel("interval-12"), 1);
  EXPECT_THROW(glue_states(abelian_state(m1, 0), abelian_state(m2, 1), chain_interface(m1, m2)), std::invalid_argument);
  EXPECT_THROW(glue_states(abelian_state(m1, 0, 2), abelian_state(m2, 0, 1), chain_interface(m1, m2)), std::invalid_argument);
  auto w = std_kernel("interval-22");
  EXPECT_THROW(glue_states(abelian_state(w, 0), abelian_state(m2, 0), chain_interface(w, m2)), PolarizationMismatch);
}

TEST(Normalization, XiMatchesTheDegreeSum) {
  for (int k = 0; k < 4; ++k)
    for (long h0 = 0; h0 < 4; ++h0)
      for (long h1 = 0; h1 < 4; ++h1)
        EXPECT_EQ(xi({static_cast<std::size_t>(h0), static_cast<std::size_t>(h1)}, k), xi_oracle({h0, h1}, k));
}

TEST(Normalization, GaussianFactorExponents) {
  // (2 pi i)^m (i/hbar)^n = (2 pi hbar)^m (e^{-i pi/2} hbar)^{-m-n}
  EXPECT_EQ(gaussian_xi(0, 0), XiExponents{});
  EXPECT_EQ(gaussian_xi(2, 0), (XiExponents{q(1), q(-1)}));
  EXPECT_EQ(gaussian_xi(0, 4), (XiExponents{q(0), q(-2)}));
  EXPECT_THROW(gaussian_xi(1, 0), std::invalid_argument);
}

TEST(Normalization, IdentityForOddShift) {
  for (const auto& c : interval_cases())
    for (std::size_t dim = 1; dim <= 3; ++dim) {
      auto g = glue_states(abelian_state(c.m1, 1, dim), abelian_state(c.m2, 1, dim), c.interface());
      EXPECT_TRUE(g.normalization.holds()) << c.name;
      EXPECT_EQ(g.state.prefactor, abelian_state(g.data.result, 1, dim).prefactor) << c.name;
    }
}

TEST(Normalization, EvenShiftRedshirtFactorDiffersForE2) {
  auto c = interval_cases()[1];
  auto g = glue_states(abelian_state(c.m1, 0), abelian_state(c.m2, 0), c.interface());
  EXPECT_EQ(g.normalization.big_xi, (XiExponents{q(1), q(-1)}));
  EXPECT_EQ(g.normalization.ratio(), (XiExponents{q(-1), q(0)}));
  EXPECT_FALSE(g.normalization.holds());
  for (int idx : {0, 2}) {
    auto d = interval_cases()[static_cast<std::size_t>(idx)];
    EXPECT_TRUE(glue_states(abelian_state(d.m1, 0), abelian_state(d.m2, 0), d.interface()).normalization.holds());
  }
}

TEST(Star, CanonicalPairs) {
  auto ps = PhaseSpace::make(1);
  auto Q = ps.var("q"), Pp = ps.var("p");
  const H ih = H::monomial(GaussQ::i(), 1);
  EXPECT_EQ(star_product(ps, Q, Pp), Q * Pp + ps.constant(ih));
  EXPECT_EQ(star_product(ps, Pp, Q), Pp * Q);
  EXPECT_EQ(star_product(ps, Q, Pp) - star_product(ps, Pp, Q), ps.constant(ih));
  Rng rng(5);
  auto f = random_poly(ps, rng, 3);
  auto one = ps.constant(H(GaussQ(1)));
  EXPECT_EQ(star_product(ps, one, f), f);
  EXPECT_EQ(star_product(ps, f, one), f);
}

TEST(Star, MonomialClosedForm) {
  auto ps = PhaseSpace::make(1);
  auto pw = [&](const char* v, int n) {
    P out = ps.constant(H(GaussQ(1)));
    for (int j = 0; j < n; ++j) out = out * ps.var(v);
    return out;
  };
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; b <= 4; ++b) {
      P want(ps.universe);
      for (int n = 0; n <= std::min(a, b); ++n) {
        Rational c = factorial(static_cast<std::size_t>(a)) * factorial(static_cast<std::size_t>(b)) /
                     (factorial(static_cast<std::size_t>(n)) * factorial(static_cast<std::size_t>(a - n)) * factorial(static_cast<std::size_t>(b - n)));
        GaussQ in(1);
        for (int j = 0; j < n; ++j) in = in * GaussQ::i();
        want += (pw("q", a - n) * pw("p", b - n)).scaled(H::monomial(in * GaussQ(c), n));
      }
      EXPECT_EQ(star_product(ps, pw("q", a), pw("p", b)), want) << a << "," << b;
    }
}

TEST(Star, AssociativeOnRandomTriples) {
  Rng rng(17);
  for (std::size_t n : {1u, 2u}) {
    auto ps = PhaseSpace::make(n);
    for (int t = 0; t < 100; ++t) {
      auto f = random_poly(ps, rng, 3), g = random_poly(ps, rng, 3), h = random_poly(ps, rng, 3);
      EXPECT_EQ(star_product(ps, star_product(ps, f, g), h), star_product(ps, f, star_product(ps, g, h)));
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        auto qi = P::generator(ps.universe, ps.q[i]), pj = P::generator(ps.universe, ps.p[j]);
        P comm = star_product(ps, qi, pj) - star_product(ps, pj, qi);
        EXPECT_EQ(comm, i == j ? ps.constant(H::monomial(GaussQ::i(), 1)) : P(ps.universe));
      }
  }
}

TEST(QmEvolution, FreeHamiltonianIsTheIntervalState) {
  for (std::size_t n : {1u, 3u}) {
    auto ps = PhaseSpace::make(n);
    auto e = qm_evolution_state(ps, P(ps.universe), ps.constant(H(GaussQ(1))), 3);
    EXPECT_EQ(e.evolution, ps.constant(H(GaussQ(1))));
    auto s = abelian_state(qm_interval(), 0, n);
    std::vector<long> map(s.universe->size(), -1);
    for (std::size_t c = 0; c < n; ++c) {
      map[s.a({0, Side::Lo}, c)] = static_cast<long>(ps.q[c]);
      map[s.b({0, Side::Hi}, c)] = static_cast<long>(ps.p[c]);
    }
    EXPECT_EQ(detail::transplant(to_gauss(s.action), ps.universe, map), e.free_exponent);
  }
}

TEST(QmEvolution, LinearHamiltonianFirstOrder) {
  auto ps = PhaseSpace::make(1, {"T"});
  auto T = ps.var("T"), Pp = ps.var("p");
  auto e = qm_evolution_state(ps, Pp, T, 1);
  EXPECT_EQ(e.evolution, ps.constant(H(GaussQ(1))) + (T * Pp).scaled(H::monomial(GaussQ::i(), -1)));
  EXPECT_THROW(qm_evolution_state(ps, Pp, T, 0), std::invalid_argument);
}

TEST(QmEvolution, HalfStepsComposeToTheFullStep) {
  auto ps = PhaseSpace::make(1, {"T"});
  auto Q = ps.var("q"), Pp = ps.var("p"), T = ps.var("T");
  const std::size_t t = ps.universe->index("T");
  P hamiltonian = (Pp * Pp).scaled(H(GaussQ(q(1, 2)))) + Q * Q * Q + (Q * Pp).scaled(H(GaussQ(q(1), q(2))));
  auto half = qm_evolution_state(ps, hamiltonian, T.scaled(H(GaussQ(q(1, 2)))), 2).evolution;
  auto full = qm_evolution_state(ps, hamiltonian, T, 2).evolution;
  EXPECT_EQ(truncate_degree(star_product(ps, half, half), t, 2), full);
  auto third = qm_evolution_state(ps, hamiltonian, T, 3).evolution;
  EXPECT_EQ(truncate_degree(third, t, 2), full);
}

TEST(Serialization, StatesRoundTripExactly) {
  std::vector<BFState> states;
  for (const char* name : {"interval-12", "interval-11", "interval-22", "circle"}) states.push_back(abelian_state(std_kernel(name), 1, 2));
  for (const auto& c : interval_cases()) states.push_back(glue_states(abelian_state(c.m1, 0, 2), abelian_state(c.m2, 0, 2), c.interface()).state);
  states.push_back(abelian_state(qm_interval(), 0, 3));
  for (const auto& s : states) {
    auto j = to_json(s);
    auto back = bfstate_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.action, s.action);
    EXPECT_EQ(back.prefactor, s.prefactor);
    EXPECT_EQ(to_json(back).dump(), j.dump());
  }
  auto j = to_json(states[1]);
  j["generators"][0]["ghost"] = 7;
  EXPECT_THROW(bfstate_from_json(j), std::invalid_argument);
}
