#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>

#include "bvkit/polygon_bf.hpp"
#include "bvkit/random.hpp"

using namespace bvkit;

namespace {

Rational q(long a, long b = 1) { return make_rational(a, b); }

Matrix<Rational> rot(int axis, long a, long b, long c) {
  Matrix<Rational> m = Matrix<Rational>::identity(3);
  const int u = (axis + 1) % 3, v = (axis + 2) % 3;
  m(u, u) = q(a, c);
  m(u, v) = q(-b, c);
  m(v, u) = q(b, c);
  m(v, v) = q(a, c);
  return m;
}

std::array<double, 3> random_axis(Rng& rng) {
  std::array<double, 3> a{};
  double n = 0;
  while (n < 0.1) {
    for (auto& v : a) v = rng.normal();
    n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  }
  for (auto& v : a) v /= n;
  return a;
}

std::vector<std::vector<double>> random_edges(Rng& rng, std::size_t N, std::size_t n, double scale) {
  std::vector<std::vector<double>> x(N, std::vector<double>(n));
  for (auto& xk : x)
    for (auto& v : xk) v = rng.uniform(-scale, scale);
  return x;
}

}  // namespace

TEST(LieAlgebra, Su2IsTheCrossProduct) {
  auto l = LieAlgebra::su2();
  std::vector<Rational> x{q(1), q(2), q(3)}, y{q(-1), q(1, 2), q(4)};
  auto b = l.bracket(x, y);
  EXPECT_EQ(b[0], x[1] * y[2] - x[2] * y[1]);
  EXPECT_EQ(b[1], x[2] * y[0] - x[0] * y[2]);
  EXPECT_EQ(b[2], x[0] * y[1] - x[1] * y[0]);
  EXPECT_EQ(l.rank, 1u);
  EXPECT_FALSE(l.is_abelian());
  EXPECT_TRUE(LieAlgebra::abelian(4).is_abelian());
  EXPECT_TRUE(LieAlgebra::abelian(2).ad(std::vector<double>{1.0, 2.0}).is_zero());
}

TEST(LieAlgebra, ValidationRejectsBrokenData) {
  auto l = LieAlgebra::su2();
  auto sym = l;
  sym.f[(0 * 3 + 1) * 3 + 2] = 2;
  EXPECT_THROW(sym.validate(), std::invalid_argument);
  auto skew = l;
  skew.kappa(0, 0) = 2;
  EXPECT_THROW(skew.validate(), std::invalid_argument);
  auto degenerate = LieAlgebra::abelian(2);
  degenerate.kappa(1, 1) = 0;
  EXPECT_THROW(degenerate.validate(), std::invalid_argument);
  // [e0, e1] = e1 with e1 central except for e0: a valid algebra with no invariant identity metric
  auto affine = LieAlgebra::abelian(2);
  affine.f[(1 * 2 + 0) * 2 + 1] = 1;
  affine.f[(1 * 2 + 1) * 2 + 0] = -1;
  EXPECT_THROW(affine.validate(), std::invalid_argument);
  EXPECT_THROW(lie_algebra("e8"), std::invalid_argument);
}

TEST(Holonomy, RotationsAreAutomorphisms) {
  auto l = LieAlgebra::su2();
  EXPECT_NO_THROW(Holonomy<Rational>::from_matrix(l, rot(2, 3, 4, 5) * rot(0, 5, 12, 13)));
  auto U = su2_rotation({1, 2, 2}, 0.7);
  auto I = Matrix<double>::identity(3);
  EXPECT_LT((U.Ad.transpose() * U.Ad - I).max_abs(), 1e-14);
  std::vector<double> axis{1.0 / 3, 2.0 / 3, 2.0 / 3};
  auto fixed = U.Ad.apply(axis);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(fixed[a], axis[a], 1e-14);
  double trace = U.Ad(0, 0) + U.Ad(1, 1) + U.Ad(2, 2);
  EXPECT_NEAR(trace, 1 + 2 * std::cos(0.7), 1e-14);
}

TEST(Holonomy, RejectsNonAutomorphisms) {
  auto l = LieAlgebra::su2();
  auto reflection = Matrix<Rational>::identity(3);
  reflection(0, 0) = -1;
  EXPECT_THROW(Holonomy<Rational>::from_matrix(l, reflection), std::invalid_argument);
  EXPECT_THROW(Holonomy<Rational>::from_matrix(l, Matrix<Rational>::identity(3).scaled(q(2))), std::invalid_argument);
  EXPECT_NO_THROW(Holonomy<Rational>::from_matrix(LieAlgebra::abelian(3), reflection));
}

TEST(MatrixFunction, DetGClosedFormOnACartanElement) {
  auto l = LieAlgebra::su2();
  for (double alpha : {1e-6, 0.3, 1.7, 3.0, 5.5}) {
    std::vector<double> x{0, 0, alpha};
    double expected = std::pow(2 / alpha * std::sin(alpha / 2), 2);
    EXPECT_NEAR(determinant(matrix_function_G(l, x)), expected, 1e-12 * std::max(1.0, expected)) << alpha;
    auto F = matrix_function_F(l, x);
    double plane = alpha / 2 / std::tan(alpha / 2);
    EXPECT_NEAR(F(0, 0), plane, 1e-12);
    EXPECT_NEAR(F(1, 1), plane, 1e-12);
    EXPECT_NEAR(F(2, 2), 1.0, 1e-12);
    EXPECT_NEAR(F(0, 1), 0.0, 1e-12);
  }
}

TEST(MatrixFunction, SeriesAndEigenRoutesAgree) {
  auto l = LieAlgebra::su2();
  Rng rng;
  for (int t = 0; t < 20; ++t) {
    auto axis = random_axis(rng);
    double r = rng.uniform(1.6, 1.75);
    std::vector<double> x{r * axis[0], r * axis[1], r * axis[2]};
    auto ad = l.ad(x);
    auto series = matrix_function(ad, function_F());
    auto big = matrix_function(ad.scaled(2.0), function_F());
    // doubling the argument leaves the series domain; compare with the scalar value on the plane
    double plane = r / std::tan(r);
    std::vector<double> perp{axis[1], -axis[0], 0};
    double pn = std::hypot(perp[0], perp[1]);
    perp[0] /= pn;
    perp[1] /= pn;
    auto v = big.apply(perp);
    auto w = series.apply(perp);
    double along = 0, small = 0;
    for (int a = 0; a < 3; ++a) {
      along += v[a] * perp[a];
      small += w[a] * perp[a];
    }
    EXPECT_NEAR(along, plane, 1e-11);
    EXPECT_NEAR(small, r / 2 / std::tan(r / 2), 1e-12);
  }
}

TEST(MatrixFunction, FrechetDerivativeMatchesDifferences) {
  auto l = LieAlgebra::su2();
  Rng rng;
  for (const auto* fn : {&function_F(), &function_G(), &function_F_tanh()}) {
    for (int t = 0; t < 10; ++t) {
      auto x = random_edges(rng, 1, 3, 1.5)[0];
      auto e = random_edges(rng, 1, 3, 1.0)[0];
      auto X = l.ad(x), E = l.ad(e);
      const double h = 1e-5;
      auto fd = (matrix_function(X + E.scaled(h), *fn) - matrix_function(X - E.scaled(h), *fn)).scaled(1 / (2 * h));
      auto d = matrix_function(X, E, *fn).derivative;
      EXPECT_LT((d - fd).max_abs(), 1e-8) << fn->name;
    }
  }
}

TEST(PolygonState, OneEdgeMatchesTheClosedForm) {
  auto l = LieAlgebra::su2();
  auto U = su2_rotation({0.2, 0.9, -0.4}, 2.1);
  std::vector<double> x{0.4, -0.7, 0.25};
  auto s = polygon_state(l, U, {x});
  using P = SuperPolynomial<Complex>;
  using S = HbarScalar<Complex>;
  const auto& f = s.fields;
  const auto& u = f.universe;
  auto I = Matrix<double>::identity(3);
  auto ad = l.ad(x);
  auto M1 = matrix_function_F(l, x) * (U.Ad - I);
  auto M2 = (ad * (U.Ad + I)).scaled(0.5);
  P expected(u);
  for (int a = 0; a < 3; ++a) {
    P v(u), sq(u);
    for (int b = 0; b < 3; ++b) v += P::generator(u, f.av[0][b]).scaled(S(Complex(M1(a, b) + M2(a, b), 0)));
    // ½[a,a] for odd a: components a^b a^c with b < c
    int b = (a + 1) % 3, c = (a + 2) % 3;
    sq = P::generator(u, f.av[0][b]) * P::generator(u, f.av[0][c]);
    expected += P::generator(u, f.bv[0][a]) * v + P::generator(u, f.be[0][a]) * sq;
  }
  EXPECT_LT((s.exponent - expected).max_coefficient(), 1e-14);
  EXPECT_NEAR(s.loop_factor.real(), determinant(matrix_function_G(l, x)), 1e-15);
  EXPECT_EQ(s.xi_power, 3);
}

TEST(PolygonState, QuantumMasterEquationForSu2) {
  auto l = LieAlgebra::su2();
  Rng rng(11);
  for (std::size_t N : {1u, 2u, 3u}) {
    for (int t = 0; t < 4; ++t) {
      auto U = su2_rotation(random_axis(rng), rng.uniform(-3, 3));
      auto s = polygon_state(l, U, random_edges(rng, N, 3, 1.0));
      auto r = qme_residual(s);
      EXPECT_LT(r.cme, 1e-10) << N;
      EXPECT_LT(r.mixed, 1e-6) << N;
      EXPECT_EQ(r.loop, 0.0) << N;
    }
  }
}

TEST(PolygonState, AbelianIsExactlyClosed) {
  auto l = LieAlgebra::abelian(2);
  Rng rng(5);
  auto s = polygon_state(l, Holonomy<double>::identity(l), random_edges(rng, 3, 2, 2.0));
  auto r = qme_residual(s);
  EXPECT_EQ(r.cme, 0.0);
  EXPECT_EQ(r.mixed, 0.0);
  EXPECT_EQ(r.loop, 0.0);
  EXPECT_EQ(s.loop_factor, Complex(1.0, 0.0));
}

TEST(PolygonState, CorruptedFunctionViolatesTheMasterEquation) {
  auto l = LieAlgebra::su2();
  Rng rng(3);
  for (std::size_t N : {1u, 2u}) {
    auto U = su2_rotation(random_axis(rng), 1.3);
    auto x = random_edges(rng, N, 3, 1.0);
    auto bad = qme_residual(polygon_state(l, U, x, function_F_tanh()));
    EXPECT_GT(std::max(bad.cme, bad.mixed), 1e-3);
  }
}

TEST(PolygonState, ExpansionStartsWithTheLoopFactor) {
  auto l = LieAlgebra::su2();
  auto s = polygon_state(l, su2_rotation({0, 0, 1}, 0.9), {{0.1, 0.2, 0.3}, {0.0, -0.5, 0.2}});
  auto e = s.expanded();
  EXPECT_NEAR(std::abs(e.constant_term().coeff(0) - s.loop_factor), 0.0, 1e-15);
  auto first = e.filter([](const Monomial& m, const HbarScalar<Complex>&) { return m.degree() == 2; });
  auto lin = s.exponent.filter([](const Monomial& m, const HbarScalar<Complex>&) { return m.degree() == 2; });
  auto scaled = lin.scaled(HbarScalar<Complex>::monomial(Complex(0, 1) * s.loop_factor, -1));
  EXPECT_LT((first - scaled).max_coefficient(), 1e-14);
}

TEST(PolygonState, RejectsBadInput) {
  auto l = LieAlgebra::su2();
  auto U = Holonomy<double>::identity(l);
  EXPECT_THROW(polygon_state(l, U, {}), std::invalid_argument);
  EXPECT_THROW(polygon_state(l, U, {{1.0, 2.0}}), std::invalid_argument);
}

TEST(Aggregation, AbelianIsExactAtAllOrders) {
  auto l = LieAlgebra::abelian(2);
  auto U = Holonomy<Rational>::identity(l);
  for (std::size_t N : {2u, 3u})
    for (std::size_t k = 0; k < N; ++k)
      for (const auto& kappa : {q(0), q(1, 4), q(1, 2), q(1)})
        for (int order = 1; order <= 5; ++order) {
          auto rep = aggregate_check<GaussQ, Rational>(l, U, N, k, kappa, order);
          EXPECT_EQ(rep.pushed, rep.expected) << N << " " << k << " " << order;
          if (order >= 2) {
            EXPECT_EQ(rep.terms, N == 2 ? 0u : (N - 1) * 2 * 2);
          }
        }
}

TEST(Aggregation, AbelianMatchesTheHandWrittenAction) {
  auto l = LieAlgebra::abelian(1);
  auto rep = aggregate_check<GaussQ, Rational>(l, Holonomy<Rational>::identity(l), 3, 0, q(1, 3), 2);
  using P = SuperPolynomial<GaussQ>;
  const auto& u = rep.expected.universe();
  auto g = [&](const std::string& name) { return P::generator(u, name); };
  P s = g("b'[0].0") * (g("a'[1].0") - g("a'[0].0")) + g("b'[1].0") * (g("a'[0].0") - g("a'[1].0"));
  EXPECT_EQ(rep.pushed, s);
}

TEST(Aggregation, Su2ExactWithRationalHolonomy) {
  auto l = LieAlgebra::su2();
  auto U = Holonomy<Rational>::from_matrix(l, rot(2, 3, 4, 5) * rot(0, 5, 12, 13) * rot(1, 8, 15, 17));
  for (const auto& kappa : {q(0), q(1, 4), q(1, 2), q(1)})
    for (int order = 1; order <= 3; ++order) {
      auto rep = aggregate_check<GaussQ, Rational>(l, U, 2, 0, kappa, order);
      EXPECT_EQ(rep.pushed, rep.expected) << kappa << " " << order;
    }
  auto rep = aggregate_check<GaussQ, Rational>(l, U, 3, 2, q(2, 5), 3);
  EXPECT_EQ(rep.pushed, rep.expected);
  EXPECT_GT(rep.terms, 0u);
}

TEST(Aggregation, Su2FloatWithinTolerance) {
  auto l = LieAlgebra::su2();
  Rng rng(7);
  for (int t = 0; t < 3; ++t) {
    auto U = su2_rotation(random_axis(rng), rng.uniform(-3, 3));
    for (const auto& kappa : {q(0), q(1, 4), q(1, 2), q(1)}) {
      auto rep = aggregate_check<Complex, double>(l, U, 2, 1, kappa, 3);
      EXPECT_LT(rep.discrepancy, 1e-8);
    }
  }
}

TEST(Aggregation, OneLoopTermComesFromTheFluctuations) {
  auto l = LieAlgebra::su2();
  auto U = Holonomy<Rational>::identity(l);
  auto rep = aggregate_check<GaussQ, Rational>(l, U, 2, 0, q(1, 2), 2);
  using P = SuperPolynomial<GaussQ>;
  const auto& u = rep.expected.universe();
  // (ħ/i) log det G(ad_X) = (ħ/i)(-|X|²/12) to second order
  P loop(u);
  for (int c = 0; c < 3; ++c) {
    auto x = P::generator(u, "a'[0,1]." + std::to_string(c));
    loop += (x * x).scaled(HbarScalar<GaussQ>::monomial(GaussQ(Rational(0), q(1, 12)), 1));
  }
  auto quantum = rep.pushed.filter([](const Monomial&, const HbarScalar<GaussQ>& c) { return c.min_power() == 1; });
  EXPECT_EQ(quantum, loop);
}

TEST(Aggregation, RejectsDegenerateInput) {
  auto l = LieAlgebra::su2();
  auto U = Holonomy<Rational>::identity(l);
  EXPECT_THROW((aggregate_check<GaussQ, Rational>(l, U, 1, 0, q(1, 2), 2)), std::invalid_argument);
  EXPECT_THROW((aggregate_check<GaussQ, Rational>(l, U, 2, 2, q(1, 2), 2)), std::invalid_argument);
  EXPECT_THROW((aggregate_check<GaussQ, Rational>(l, U, 2, 0, q(3, 2), 2)), std::invalid_argument);
}

TEST(Minimal, MatchesTheRotationAngle) {
  auto l = LieAlgebra::su2();
  Rng rng(19);
  for (int t = 0; t < 20; ++t) {
    auto axis = random_axis(rng);
    double theta = rng.uniform(0.3, 2.8), phi = rng.uniform(-1.2, 1.2);
    auto v = minimal_state(l, su2_rotation(axis, theta), {phi * axis[0], phi * axis[1], phi * axis[2]});
    double expected = 4 * std::pow(std::sin((theta + phi) / 2), 2);
    EXPECT_NEAR(v.simplified, expected, 1e-12);
    EXPECT_LT(v.relative_error(), 1e-9);
    EXPECT_EQ(v.xi_power, 1);
  }
}

TEST(Minimal, HorizontalAlongTheCentralizer) {
  auto l = LieAlgebra::su2();
  Rng rng(23);
  for (int t = 0; t < 20; ++t) {
    auto axis = random_axis(rng);
    double theta = rng.uniform(0.3, 2.8), phi = rng.uniform(-1, 1), shift = rng.uniform(-0.2, 0.2);
    auto U = su2_rotation(axis, theta);
    auto shifted = su2_rotation(axis, theta + shift);
    auto v = minimal_state(l, U, {phi * axis[0], phi * axis[1], phi * axis[2]});
    auto w = minimal_state(l, shifted, {(phi - shift) * axis[0], (phi - shift) * axis[1], (phi - shift) * axis[2]});
    EXPECT_NEAR(v.long_form, w.long_form, 1e-9 * std::abs(v.long_form));
  }
}

TEST(Minimal, RejectsIrregularHolonomyAndForeignDirections) {
  auto l = LieAlgebra::su2();
  EXPECT_THROW(minimal_state(l, Holonomy<double>::identity(l), {0, 0, 0.3}), NotRegular);
  EXPECT_THROW(minimal_state(l, su2_rotation({0, 0, 1}, 1.0), {0.3, 0, 0}), std::invalid_argument);
  auto a = LieAlgebra::abelian(2);
  auto v = minimal_state(a, Holonomy<double>::identity(a), {0.5, -0.5});
  EXPECT_EQ(v.long_form, 1.0);
  EXPECT_EQ(v.xi_power, 2);
}

TEST(Partition, ZetaValues) {
  const double pi = std::numbers::pi;
  EXPECT_NEAR(partition_2d(2, 1000000).sum, pi * pi / 6, 1e-5);
  EXPECT_NEAR(partition_2d(3, 10000).sum, std::pow(pi, 4) / 90, 1e-10);
}

TEST(Partition, Bookkeeping) {
  auto r = partition_2d(3, 10, 2.5);
  EXPECT_EQ(r.n, 6);
  EXPECT_EQ(r.two_pi_hbar_exponent, q(3));
  EXPECT_EQ(r.phase_hbar_exponent, q(9));
  EXPECT_EQ(r.center, 2);
  EXPECT_EQ(r.volume, 2.5);
  EXPECT_THROW(partition_2d(1, 10), std::invalid_argument);
  EXPECT_THROW(partition_2d(2, 0), std::invalid_argument);
}
