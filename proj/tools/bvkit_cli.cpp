#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bvkit/acceptance.hpp"
#include "bvkit/bfstate.hpp"
#include "bvkit/kernel1d.hpp"
#include "bvkit/polygon_bf.hpp"
#include "bvkit/random.hpp"

using namespace bvkit;
using json = nlohmann::json;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class Backend { Rational, Float };

Backend backend_from_env() {
  const char* v = std::getenv("BVKIT_BACKEND");
  if (!v || std::string(v).empty() || std::string(v) == "rational") return Backend::Rational;
  if (std::string(v) == "float") return Backend::Float;
  throw UsageError("BVKIT_BACKEND must be 'rational' or 'float'");
}

std::string backend_name(Backend b) { return b == Backend::Rational ? "rational" : "float"; }

struct Report {
  std::string command;
  json parameters = json::object();
  json results = json::object();
  std::vector<Check> checks;

  void add(Check c) { checks.push_back(std::move(c)); }
  void add(const std::string& prefix, const std::vector<Check>& cs) {
    for (auto c : cs) {
      c.name = prefix + c.name;
      checks.push_back(std::move(c));
    }
  }
  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  json to_json(bool timing, double seconds) const {
    auto sorted = checks;
    std::stable_sort(sorted.begin(), sorted.end(), [](const Check& a, const Check& b) { return a.name < b.name; });
    json cs = json::array();
    for (const auto& c : sorted) {
      json j = {{"name", c.name}, {"tolerance", c.tolerance}, {"pass", c.pass}};
      if (!c.wall_time || timing) j["residual"] = c.residual;
      if (!c.detail.empty()) j["detail"] = c.detail;
      cs.push_back(j);
    }
    json out = {{"schema", 1}, {"command", command}, {"parameters", parameters}, {"checks", cs}, {"pass", pass()}};
    if (!results.empty()) out["results"] = results;
    if (timing) out["wall_time_s"] = seconds;
    return out;
  }
};

Rational parse_fraction(const std::string& s) {
  try {
    return parse_rational(s);
  } catch (const std::exception&) {
    throw UsageError("not a rational number: " + s);
  }
}

// ---------------------------------------------------------------- phase-space expressions

class ExprParser {
 public:
  ExprParser(const PhaseSpace& ps, std::string text) : ps_(ps), s_(std::move(text)) {}

  SuperPolynomial<GaussQ> parse() {
    auto e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  using P = SuperPolynomial<GaussQ>;
  using S = HbarScalar<GaussQ>;

  [[noreturn]] void fail(const std::string& what) const {
    throw UsageError("expression '" + s_ + "': " + what + " at position " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  P expr() {
    P out = term();
    for (;;) {
      if (eat('+')) out += term();
      else if (eat('-')) out -= term();
      else return out;
    }
  }
  P term() {
    P out = power();
    for (;;) {
      if (eat('*')) {
        out = out * power();
      } else if (eat('/')) {
        P d = power();
        const auto& t = d.terms();
        if (t.size() != 1 || !(t.begin()->first == d.unit_monomial()) || !t.begin()->second.is_constant())
          fail("division by a non-constant");
        out = out.scaled(S(GaussQ(1) / t.begin()->second.coeff(0)));
      } else {
        return out;
      }
    }
  }
  P power() {
    P base = unary();
    if (!eat('^')) return base;
    skip();
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) fail("expected an exponent");
    int e = std::stoi(s_.substr(start, pos_ - start));
    if (e > 64) fail("exponent too large");
    P out = ps_.constant(S(GaussQ(1)));
    for (int j = 0; j < e; ++j) out = out * base;
    return out;
  }
  P unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return atom();
  }
  P atom() {
    skip();
    if (eat('(')) {
      P e = expr();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      return ps_.constant(S(GaussQ(Rational(s_.substr(start, pos_ - start)))));
    }
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    std::string name = s_.substr(start, pos_ - start);
    if (name == "i") return ps_.constant(S(GaussQ::i()));
    if (name == "hbar") return ps_.constant(S::monomial(GaussQ(1), 1));
    if (!name.empty() && ps_.universe->contains(name)) return ps_.var(name);
    fail(name.empty() ? "expected a term" : "unknown symbol '" + name + "'");
  }

  const PhaseSpace& ps_;
  std::string s_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------- subcommands

struct Options {
  std::uint64_t seed = Rng::kDefaultSeed;
  bool timing = false;
  std::string gcase = "e1", emit, theory = "polygon", algebra = "su2", kappa = "1/2", f = "q", g = "p";
  std::size_t n = 2, samples = 20;
  long k = 0, order = 2, nmax = 1000000;
  int genus = 2;
  double angle = 0.7, volume = 1.0;
  bool print = false, all = false;
};

void glue_propagator(const Options& o, Report& r) {
  r.parameters = {{"case", o.gcase}};
  Propagator1D m1, m2;
  bool ring = o.gcase == "e3";
  if (o.gcase == "e1") {
    m1 = standard_kernel(StandardKind::Interval12);
    m2 = translated(standard_kernel(StandardKind::Interval12), 1);
    r.add("", accept::gluing_e1());
  } else {
    m1 = standard_kernel(StandardKind::Interval11);
    m2 = translated(standard_kernel(StandardKind::Interval22), 1);
    r.add("", o.gcase == "e2" ? accept::gluing_e2() : accept::gluing_e3());
  }
  auto g = glue(m1, m2, ring ? ring_interface(m1, m2) : chain_interface(m1, m2));
  r.add(exact_check(o.gcase + ".propagator", accept::propagator_ok(g.result)));
  auto st = glue_states(abelian_state(m1, 1), abelian_state(m2, 1), ring ? ring_interface(m1, m2) : chain_interface(m1, m2));
  r.add(exact_check(o.gcase + ".mqme", mqme_check(st.state).zero()));
  r.add(exact_check(o.gcase + ".normalization_k1", st.normalization.holds(),
                    "Xi " + st.normalization.big_xi.str() + " vs ratio " + st.normalization.ratio().str()));
  r.results = {{"redshirt_generators", g.redshirt_generators()},
               {"ber_lambda", to_string(g.ber_lambda())},
               {"glued_classes", g.result.basis.size()},
               {"state_action_k1", st.state.action.str()}};
  if (!o.emit.empty()) {
    std::ofstream out(o.emit);
    if (!out) throw std::runtime_error("cannot write " + o.emit);
    out << json{{"kernel", to_json(g.result)}, {"state", to_json(st.state)}}.dump(2) << "\n";
  }
}

void check_qme(const Options& o, Report& r, Backend b) {
  r.parameters = {{"theory", o.theory}, {"algebra", o.algebra}, {"n", o.n}, {"samples", o.samples}, {"seed", o.seed}};
  Rng rng(o.seed);
  if (o.theory == "abelian") {
    // abelian BF states with coefficient dimension n
    for (const char* name : {"interval-12", "interval-11", "interval-22", "circle"})
      for (int k = 0; k < 2; ++k)
        r.add(exact_check(std::string("standard.") + name + ".k" + std::to_string(k),
                          mqme_check(abelian_state(standard_kernel(parse_standard_kind(name)), k, o.n)).zero()));
    std::size_t bad = 0;
    for (std::size_t t = 0; t < o.samples; ++t) {
      Rational pos(0);
      auto piece = [&](StandardKind kind) {
        Rational len = Rational(1) + rng.rational_unit();
        auto d = relabel(standard_kernel(kind), Rational(1) / len, -pos / len);
        pos += len;
        return d;
      };
      const int k = static_cast<int>(t % 2);
      auto first = piece(t % 4 < 2 ? StandardKind::Interval11 : StandardKind::Interval12);
      auto last = piece(StandardKind::Interval22);
      bool ring = t % 4 == 0;
      auto g = glue_states(abelian_state(first, k, o.n), abelian_state(last, k, o.n),
                           ring ? ring_interface(first, last) : chain_interface(first, last));
      if (!mqme_check(g.state).zero() || !(g.state.action == abelian_state(g.data.result, k, o.n).action)) ++bad;
    }
    r.add(exact_check("glued.random", bad == 0, std::to_string(bad) + " failures"));
    return;
  }
  if (o.n < 1) throw UsageError("--n must be at least 1");
  auto l = lie_algebra(o.algebra, 3);
  const bool abelian = l.is_abelian();
  double cme = 0, mixed = 0, loop = 0;
  for (std::size_t t = 0; t < o.samples; ++t) {
    Holonomy<double> U = abelian ? Holonomy<double>::identity(l) : su2_rotation(accept::random_axis(rng), rng.uniform(-3, 3));
    auto s = polygon_state(l, U, accept::random_edges(rng, o.n, l.n, 1.0));
    auto q = qme_residual(s);
    cme = std::max(cme, q.cme);
    mixed = std::max(mixed, q.mixed);
    loop = std::max(loop, q.loop);
  }
  r.add(numeric_check("cme", cme, abelian ? 0.0 : 1e-10));
  r.add(numeric_check("mixed", mixed, abelian ? 0.0 : 1e-6));
  r.add(numeric_check("loop", loop, 0.0));
  r.results = {{"backend", backend_name(b)}};
}

void polygon_state_cmd(const Options& o, Report& r) {
  r.parameters = {{"n", o.n}, {"angle", o.angle}, {"seed", o.seed}};
  if (o.n < 1) throw UsageError("--n must be at least 1");
  auto l = LieAlgebra::su2();
  Rng rng(o.seed);
  auto s = polygon_state(l, su2_rotation({0, 0, 1}, o.angle), accept::random_edges(rng, o.n, 3, 1.0));
  auto q = qme_residual(s);
  r.add(numeric_check("cme", q.cme, 1e-10));
  r.add(numeric_check("mixed", q.mixed, 1e-6));
  r.add(numeric_check("loop", q.loop, 0.0));
  r.results = {{"loop_factor", {s.loop_factor.real(), s.loop_factor.imag()}},
               {"xi_power", s.xi_power},
               {"exponent_terms", s.exponent.size()}};
  if (o.print) r.results["exponent"] = s.exponent.str();
}

void aggregate_cmd(const Options& o, Report& r, Backend b) {
  Rational kappa = parse_fraction(o.kappa);
  r.parameters = {{"n", o.n}, {"k", o.k}, {"kappa", to_string(kappa)}, {"order", o.order}, {"algebra", o.algebra}, {"seed", o.seed}};
  if (o.k < 0) throw UsageError("--k must be non-negative");
  auto l = lie_algebra(o.algebra, 3);
  const auto k = static_cast<std::size_t>(o.k);
  const int order = static_cast<int>(o.order);
  if (b == Backend::Rational) {
    Holonomy<Rational> U = Holonomy<Rational>::identity(l);
    if (!l.is_abelian()) {
      // rotation by the Pythagorean angle (3/5, 4/5) about the third axis
      Matrix<Rational> m = Matrix<Rational>::identity(3);
      m(0, 0) = make_rational(3, 5);
      m(0, 1) = make_rational(-4, 5);
      m(1, 0) = make_rational(4, 5);
      m(1, 1) = make_rational(3, 5);
      U = Holonomy<Rational>::from_matrix(l, m);
    }
    auto rep = aggregate_check<GaussQ, Rational>(l, U, o.n, k, kappa, order);
    r.add(exact_check("automorphism", rep.pushed == rep.expected));
    r.results = {{"backend", "rational"}, {"terms", rep.terms}};
  } else {
    Rng rng(o.seed);
    Holonomy<double> U = l.is_abelian() ? Holonomy<double>::identity(l) : su2_rotation(accept::random_axis(rng), rng.uniform(-3, 3));
    auto rep = aggregate_check<Complex, double>(l, U, o.n, k, kappa, order);
    r.add(numeric_check("automorphism", rep.discrepancy, 1e-8));
    r.results = {{"backend", "float"}, {"terms", rep.terms}};
  }
}

void minimal_cmd(const Options& o, Report& r) {
  r.parameters = {{"samples", o.samples}, {"seed", o.seed}};
  auto l = LieAlgebra::su2();
  Rng rng(o.seed);
  double det = 0, horiz = 0;
  for (std::size_t s = 0; s < o.samples; ++s) {
    auto axis = accept::random_axis(rng);
    double theta = rng.uniform(0.3, 2.8), phi = rng.uniform(-1, 1), shift = rng.uniform(-0.2, 0.2);
    auto along = [&](double c) { return std::vector<double>{c * axis[0], c * axis[1], c * axis[2]}; };
    auto v = minimal_state(l, su2_rotation(axis, theta), along(phi));
    auto w = minimal_state(l, su2_rotation(axis, theta + shift), along(phi - shift));
    det = std::max(det, v.relative_error());
    horiz = std::max(horiz, std::abs(v.long_form - w.long_form) / std::abs(v.long_form));
  }
  r.add(numeric_check("determinant", det, 1e-9));
  r.add(numeric_check("horizontality", horiz, 1e-9));
}

void partition_cmd(const Options& o, Report& r) {
  r.parameters = {{"genus", o.genus}, {"nmax", o.nmax}, {"volume", o.volume}};
  auto p = partition_2d(o.genus, o.nmax, o.volume);
  const double s = 2.0 * o.genus - 2.0;
  const double zeta = std::riemann_zeta(s);
  // tail of the zeta series beyond nmax
  const double tail = 1.0 / ((s - 1.0) * std::pow(static_cast<double>(o.nmax), s - 1.0));
  r.add(numeric_check("zeta", std::abs(p.sum - zeta), tail + 1e-12));
  r.results = {{"sum", p.sum},
               {"zeta", zeta},
               {"n", p.n},
               {"two_pi_hbar_exponent", to_string(p.two_pi_hbar_exponent)},
               {"phase_hbar_exponent", to_string(p.phase_hbar_exponent)},
               {"center", p.center}};
}

void star_cmd(const Options& o, Report& r) {
  r.parameters = {{"f", o.f}, {"g", o.g}};
  using P = SuperPolynomial<GaussQ>;
  using S = HbarScalar<GaussQ>;
  auto ps = PhaseSpace::make(1);
  P f = ExprParser(ps, o.f).parse(), g = ExprParser(ps, o.g).parse();
  P fg = star_product(ps, f, g), gf = star_product(ps, g, f);
  // first-order commutator i {f, g}
  auto order1 = [&](const P& x) { return x.map_coefficients([](const Monomial&, const S& c) { return S(c.coeff(1)); }); };
  auto order0 = [&](const P& x) { return x.map_coefficients([](const Monomial&, const S& c) { return S(c.coeff(0)); }); };
  P poisson = order0(f.derive(ps.q[0]) * g.derive(ps.p[0]) - f.derive(ps.p[0]) * g.derive(ps.q[0])).scaled(S(GaussQ::i()));
  bool hbar_free = true;
  for (const auto* x : {&f, &g})
    for (const auto& [m, c] : x->terms()) hbar_free = hbar_free && c.is_constant();
  if (hbar_free) {
    r.add(exact_check("classical_limit", order0(fg) == f * g));
    r.add(exact_check("commutator", order1(fg - gf) == poisson));
  }
  r.add(exact_check("unit", star_product(ps, ps.constant(S(GaussQ(1))), f) == f));
  r.results = {{"product", fg.str()}};
}

void report_cmd(const Options& o, Report& r) {
  r.parameters = {{"all", true}, {"seed", o.seed}};
  auto criteria = run_acceptance(o.seed);
  json summary = json::array();
  for (const auto& c : criteria) {
    char prefix[8];
    std::snprintf(prefix, sizeof prefix, "c%02d.", c.id);
    r.add(prefix, c.checks);
    summary.push_back({{"criterion", c.id}, {"title", c.title}, {"pass", c.pass()}});
  }
  r.results = {{"criteria", summary}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bvkit: verification suites for BV pushforward, gluing and BF states"};
  app.fallthrough();
  app.require_subcommand(1);
  Options o;
  app.add_option("--seed", o.seed, "64-bit seed for all randomness")->capture_default_str();
  app.add_flag("--timing", o.timing, "Include wall-clock times in the report");

  auto* glue_c = app.add_subcommand("glue-propagator", "Glue the three interval propagator configurations");
  glue_c->add_option("--case", o.gcase, "Configuration")->check(CLI::IsMember({"e1", "e2", "e3"}))->capture_default_str();
  glue_c->add_option("--emit", o.emit, "Write the glued kernel and state as JSON");

  auto* qme_c = app.add_subcommand("check-qme", "Check the (modified) quantum master equation");
  qme_c->add_option("--theory", o.theory)->check(CLI::IsMember({"abelian", "polygon"}))->capture_default_str();
  qme_c->add_option("--algebra", o.algebra)->check(CLI::IsMember({"abelian", "su2"}))->capture_default_str();
  qme_c->add_option("--n", o.n, "Polygon edges, or coefficient dimension for the abelian theory")->capture_default_str();
  qme_c->add_option("--samples", o.samples)->capture_default_str();

  auto* poly_c = app.add_subcommand("polygon-state", "Evaluate an su(2) polygon state");
  poly_c->add_option("--n", o.n)->capture_default_str();
  poly_c->add_option("--angle", o.angle, "Holonomy rotation angle")->capture_default_str();
  poly_c->add_flag("--print", o.print, "Include the exponent");

  auto* agg_c = app.add_subcommand("aggregate", "Check the aggregation automorphism");
  agg_c->add_option("--n", o.n)->capture_default_str();
  agg_c->add_option("--k", o.k)->capture_default_str();
  agg_c->add_option("--kappa", o.kappa)->capture_default_str();
  agg_c->add_option("--order", o.order)->capture_default_str();
  agg_c->add_option("--algebra", o.algebra)->check(CLI::IsMember({"abelian", "su2"}))->capture_default_str();

  auto* min_c = app.add_subcommand("minimal", "Check the minimal-realization state");
  min_c->add_option("--samples", o.samples)->capture_default_str();

  auto* part_c = app.add_subcommand("partition2d", "Truncated su(2) partition function on a closed surface");
  part_c->add_option("--genus", o.genus)->capture_default_str();
  part_c->add_option("--nmax", o.nmax)->capture_default_str();
  part_c->add_option("--volume", o.volume)->capture_default_str();

  auto* star_c = app.add_subcommand("star", "Star product of polynomials in q, p");
  star_c->add_option("--f", o.f)->capture_default_str();
  star_c->add_option("--g", o.g)->capture_default_str();

  auto* rep_c = app.add_subcommand("report", "Run the acceptance suite");
  rep_c->add_flag("--all", o.all, "Run every criterion")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  Report report;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Backend backend = backend_from_env();
    CLI::App* sub = app.get_subcommands().front();
    report.command = sub->get_name();
    if (sub == glue_c) glue_propagator(o, report);
    else if (sub == qme_c) check_qme(o, report, backend);
    else if (sub == poly_c) polygon_state_cmd(o, report);
    else if (sub == agg_c) aggregate_cmd(o, report, backend);
    else if (sub == min_c) minimal_cmd(o, report);
    else if (sub == part_c) partition_cmd(o, report);
    else if (sub == star_c) star_cmd(o, report);
    else report_cmd(o, report);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << report.to_json(o.timing, seconds).dump(2) << "\n";
  return report.pass() ? 0 : 1;
}
