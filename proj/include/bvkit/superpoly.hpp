#ifndef BVKIT_SUPERPOLY_HPP
#define BVKIT_SUPERPOLY_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <ostream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bvkit/hbar.hpp"
#include "bvkit/supermatrix.hpp"

namespace bvkit {

struct UniverseMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct UnpairedGenerator : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NotNilpotent : std::domain_error {
  using std::domain_error::domain_error;
};

/// Ordered set of generators; odd ones get bit slots, even ones exponent slots.
class Universe {
 public:
  explicit Universe(std::vector<Generator> gens) : gens_(std::move(gens)) {
    slot_.resize(gens_.size());
    for (std::size_t k = 0; k < gens_.size(); ++k) {
      if (index_.count(gens_[k].name)) throw std::invalid_argument("duplicate generator " + gens_[k].name);
      index_[gens_[k].name] = k;
      if (gens_[k].odd()) {
        slot_[k] = static_cast<int>(odd_.size());
        odd_.push_back(k);
      } else {
        slot_[k] = static_cast<int>(even_.size());
        even_.push_back(k);
      }
    }
    if (odd_.size() > 64) throw std::invalid_argument("at most 64 odd generators");
  }

  static std::shared_ptr<const Universe> make(std::vector<Generator> gens) {
    return std::make_shared<const Universe>(std::move(gens));
  }

  std::size_t size() const { return gens_.size(); }
  const Generator& generator(std::size_t k) const { return gens_[k]; }
  const std::vector<Generator>& generators() const { return gens_; }
  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown generator " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  int slot(std::size_t k) const { return slot_[k]; }
  std::size_t num_odd() const { return odd_.size(); }
  std::size_t num_even() const { return even_.size(); }
  std::size_t odd_generator(int slot) const { return odd_[slot]; }
  std::size_t even_generator(int slot) const { return even_[slot]; }

  bool same_as(const Universe& o) const {
    if (this == &o) return true;
    if (gens_.size() != o.gens_.size()) return false;
    for (std::size_t k = 0; k < gens_.size(); ++k)
      if (!(gens_[k] == o.gens_[k])) return false;
    return true;
  }

 private:
  std::vector<Generator> gens_;
  std::vector<int> slot_;
  std::vector<std::size_t> odd_;
  std::vector<std::size_t> even_;
  std::unordered_map<std::string, std::size_t> index_;
};

using UniversePtr = std::shared_ptr<const Universe>;

/// Canonical monomial: odd generators as a bit set in universe order, even ones as exponents.
struct Monomial {
  std::uint64_t odd = 0;
  std::vector<std::uint16_t> even;

  int odd_count() const { return std::popcount(odd); }
  int parity() const { return odd_count() % 2; }
  int even_degree() const {
    int d = 0;
    for (auto e : even) d += e;
    return d;
  }
  int degree() const { return odd_count() + even_degree(); }

  friend bool operator<(const Monomial& a, const Monomial& b) {
    int da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    if (a.even != b.even) return a.even > b.even;
    return a.odd < b.odd;
  }
  friend bool operator==(const Monomial& a, const Monomial& b) { return a.odd == b.odd && a.even == b.even; }
};

/// Sign of reordering (odd factors of a)(odd factors of b) into canonical order; 0 if they overlap.
inline int koszul_merge_sign(std::uint64_t a, std::uint64_t b) {
  if (a & b) return 0;
  int swaps = 0;
  std::uint64_t rest = b;
  while (rest) {
    int s = std::countr_zero(rest);
    rest &= rest - 1;
    std::uint64_t above = (s == 63) ? 0 : (a >> (s + 1));
    swaps += std::popcount(above);
  }
  return (swaps % 2) ? -1 : 1;
}

template <class C>
class SuperPolynomial {
 public:
  using Scalar = HbarScalar<C>;
  using Terms = std::map<Monomial, Scalar>;

  explicit SuperPolynomial(UniversePtr u) : u_(std::move(u)) {}

  static SuperPolynomial constant(UniversePtr u, const Scalar& c) {
    SuperPolynomial p(u);
    p.add(p.unit_monomial(), c);
    return p;
  }
  static SuperPolynomial generator(UniversePtr u, const std::string& name) {
    return generator(u, u->index(name));
  }
  static SuperPolynomial generator(UniversePtr u, std::size_t k) {
    SuperPolynomial p(u);
    Monomial m = p.unit_monomial();
    if (u->generator(k).odd())
      m.odd = std::uint64_t{1} << u->slot(k);
    else
      m.even[u->slot(k)] = 1;
    p.add(m, Scalar(ScalarTraits<C>::one()));
    return p;
  }

  const UniversePtr& universe() const { return u_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  template <class D>
  SuperPolynomial<D> convert() const {
    SuperPolynomial<D> r(u_);
    for (const auto& [m, c] : terms_) r.add(m, c.template convert<D>());
    return r;
  }

  Monomial unit_monomial() const {
    Monomial m;
    m.even.assign(u_->num_even(), 0);
    return m;
  }

  Scalar coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? Scalar() : it->second;
  }
  Scalar constant_term() const { return coefficient(unit_monomial()); }

  /// Adds c times the canonical monomial m.
  void add(const Monomial& m, const Scalar& c) {
    if (c.is_zero()) return;
    auto it = terms_.find(m);
    if (it == terms_.end()) {
      terms_.emplace(m, c);
    } else {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  int ghost(const Monomial& m) const {
    int g = 0;
    for (std::size_t s = 0; s < m.even.size(); ++s) g += m.even[s] * u_->generator(u_->even_generator(s)).ghost;
    std::uint64_t rest = m.odd;
    while (rest) {
      int s = std::countr_zero(rest);
      rest &= rest - 1;
      g += u_->generator(u_->odd_generator(s)).ghost;
    }
    return g;
  }

  /// Parity of a homogeneous polynomial; throws if mixed.
  int parity() const {
    int par = -1;
    for (const auto& [m, c] : terms_) {
      if (par == -1) par = m.parity();
      else if (par != m.parity()) throw std::domain_error("polynomial has mixed parity");
    }
    return par < 0 ? 0 : par;
  }
  SuperPolynomial parity_part(int par) const {
    SuperPolynomial r(u_);
    for (const auto& [m, c] : terms_)
      if (m.parity() == par) r.terms_.emplace(m, c);
    return r;
  }

  SuperPolynomial& operator+=(const SuperPolynomial& o) {
    check(o);
    for (const auto& [m, c] : o.terms_) add(m, c);
    return *this;
  }
  SuperPolynomial& operator-=(const SuperPolynomial& o) {
    check(o);
    for (const auto& [m, c] : o.terms_) add(m, -c);
    return *this;
  }
  SuperPolynomial operator-() const {
    SuperPolynomial r(u_);
    for (const auto& [m, c] : terms_) r.terms_.emplace(m, -c);
    return r;
  }
  friend SuperPolynomial operator+(SuperPolynomial a, const SuperPolynomial& b) { return a += b; }
  friend SuperPolynomial operator-(SuperPolynomial a, const SuperPolynomial& b) { return a -= b; }

  friend SuperPolynomial operator*(const SuperPolynomial& a, const SuperPolynomial& b) {
    a.check(b);
    SuperPolynomial r(a.u_);
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) {
        int s = koszul_merge_sign(ma.odd, mb.odd);
        if (s == 0) continue;
        Monomial m;
        m.odd = ma.odd | mb.odd;
        m.even.resize(ma.even.size());
        for (std::size_t k = 0; k < m.even.size(); ++k) m.even[k] = ma.even[k] + mb.even[k];
        Scalar c = ca * cb;
        r.add(m, s > 0 ? c : -c);
      }
    return r;
  }
  SuperPolynomial& operator*=(const SuperPolynomial& o) { return *this = *this * o; }

  SuperPolynomial scaled(const Scalar& s) const {
    SuperPolynomial r(u_);
    if (s.is_zero()) return r;
    for (const auto& [m, c] : terms_) r.add(m, c * s);
    return r;
  }
  friend SuperPolynomial operator*(const Scalar& s, const SuperPolynomial& p) { return p.scaled(s); }

  friend bool operator==(const SuperPolynomial& a, const SuperPolynomial& b) {
    return a.u_->same_as(*b.u_) && a.terms_ == b.terms_;
  }
  friend bool operator!=(const SuperPolynomial& a, const SuperPolynomial& b) { return !(a == b); }

  /// Left derivative with respect to generator k.
  SuperPolynomial derive(std::size_t k) const {
    SuperPolynomial r(u_);
    const Generator& g = u_->generator(k);
    int s = u_->slot(k);
    for (const auto& [m, c] : terms_) {
      if (g.odd()) {
        std::uint64_t bit = std::uint64_t{1} << s;
        if (!(m.odd & bit)) continue;
        Monomial n = m;
        n.odd &= ~bit;
        bool neg = std::popcount(m.odd & (bit - 1)) % 2;
        r.add(n, neg ? -c : c);
      } else {
        if (m.even[s] == 0) continue;
        Monomial n = m;
        n.even[s] -= 1;
        r.add(n, c.scaled(ScalarTraits<C>::from_rational(Rational(m.even[s]))));
      }
    }
    return r;
  }
  SuperPolynomial derive(const std::string& name) const { return derive(u_->index(name)); }

  /// Replaces generator k by expr (same parity).
  SuperPolynomial substitute(std::size_t k, const SuperPolynomial& expr) const {
    check(expr);
    const Generator& g = u_->generator(k);
    for (const auto& [m, c] : expr.terms_)
      if (m.parity() != g.parity()) throw std::invalid_argument("substitution changes parity of " + g.name);
    int s = u_->slot(k);
    SuperPolynomial r(u_);
    std::vector<SuperPolynomial> powers{constant(u_, Scalar(ScalarTraits<C>::one()))};
    for (const auto& [m, c] : terms_) {
      Monomial rest = m;
      int e = 0;
      int sign = 1;
      if (g.odd()) {
        std::uint64_t bit = std::uint64_t{1} << s;
        if (m.odd & bit) {
          e = 1;
          rest.odd &= ~bit;
          if (std::popcount(m.odd & (bit - 1)) % 2) sign = -1;
        }
      } else {
        e = m.even[s];
        rest.even[s] = 0;
      }
      if (e == 0) {
        r.add(m, c);
        continue;
      }
      while (static_cast<int>(powers.size()) <= e) powers.push_back(powers.back() * expr);
      SuperPolynomial tail(u_);
      tail.add(rest, sign > 0 ? c : -c);
      r += powers[e] * tail;
    }
    return r;
  }
  SuperPolynomial substitute(const std::string& name, const SuperPolynomial& expr) const {
    return substitute(u_->index(name), expr);
  }

  /// Keeps the terms satisfying pred(monomial, coefficient).
  template <class Pred>
  SuperPolynomial filter(Pred pred) const {
    SuperPolynomial r(u_);
    for (const auto& [m, c] : terms_)
      if (pred(m, c)) r.terms_.emplace(m, c);
    return r;
  }
  template <class F>
  SuperPolynomial map_coefficients(F f) const {
    SuperPolynomial r(u_);
    for (const auto& [m, c] : terms_) r.add(m, f(m, c));
    return r;
  }

  double max_coefficient() const {
    double mx = 0.0;
    for (const auto& [m, c] : terms_) mx = std::max(mx, c.magnitude());
    return mx;
  }

  std::string monomial_string(const Monomial& m) const {
    std::string s;
    for (std::size_t k = 0; k < u_->size(); ++k) {
      const Generator& g = u_->generator(k);
      int e = g.odd() ? static_cast<int>((m.odd >> u_->slot(k)) & 1u) : m.even[u_->slot(k)];
      if (e == 0) continue;
      if (!s.empty()) s += "*";
      s += g.name;
      if (e > 1) s += "^" + std::to_string(e);
    }
    return s.empty() ? "1" : s;
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::string s;
    for (const auto& [m, c] : terms_) {
      if (!s.empty()) s += " + ";
      s += "(" + c.str() + ")*" + monomial_string(m);
    }
    return s;
  }

  void check(const SuperPolynomial& o) const {
    if (!u_->same_as(*o.u_)) throw UniverseMismatch("generator-universe mismatch");
  }

 private:
  UniversePtr u_;
  Terms terms_;
};

/// Canonical pairs (z, z+, s) with ghost(z) + ghost(z+) = -1; spectators are inert parameters.
template <class C>
std::ostream& operator<<(std::ostream& os, const SuperPolynomial<C>& p) {
  return os << p.str();
}

class DarbouxPairing {
 public:
  struct Pair {
    std::size_t z;
    std::size_t zplus;
    int sign;
  };

  DarbouxPairing(UniversePtr u, std::vector<Pair> pairs, std::vector<std::size_t> spectators = {})
      : u_(std::move(u)), pairs_(std::move(pairs)), role_(u_->size(), 0) {
    for (const auto& p : pairs_) {
      if (p.sign != 1 && p.sign != -1) throw std::invalid_argument("pair sign must be +1 or -1");
      if (u_->generator(p.z).ghost + u_->generator(p.zplus).ghost != -1)
        throw std::invalid_argument("ghost(z) + ghost(z+) must be -1 for " + u_->generator(p.z).name);
      for (auto k : {p.z, p.zplus}) {
        if (role_[k] != 0) throw std::invalid_argument("generator paired twice: " + u_->generator(k).name);
        role_[k] = 1;
      }
    }
    for (auto k : spectators) {
      if (role_[k] != 0) throw std::invalid_argument("spectator is paired: " + u_->generator(k).name);
      role_[k] = 2;
    }
  }

  static DarbouxPairing by_name(UniversePtr u, const std::vector<std::tuple<std::string, std::string, int>>& pairs,
                                const std::vector<std::string>& spectators = {}) {
    std::vector<Pair> ps;
    for (const auto& [z, zp, s] : pairs) ps.push_back({u->index(z), u->index(zp), s});
    std::vector<std::size_t> sp;
    for (const auto& n : spectators) sp.push_back(u->index(n));
    return DarbouxPairing(u, ps, sp);
  }

  const UniversePtr& universe() const { return u_; }
  const std::vector<Pair>& pairs() const { return pairs_; }

  template <class C>
  void check_covers(const SuperPolynomial<C>& p) const {
    if (!u_->same_as(*p.universe())) throw UniverseMismatch("pairing universe mismatch");
    Monomial seen;
    seen.even.assign(u_->num_even(), 0);
    for (const auto& [m, c] : p.terms()) {
      seen.odd |= m.odd;
      for (std::size_t s = 0; s < m.even.size(); ++s) seen.even[s] |= m.even[s];
    }
    for (std::size_t k = 0; k < u_->size(); ++k) {
      const Generator& g = u_->generator(k);
      bool used = g.odd() ? ((seen.odd >> u_->slot(k)) & 1u) : seen.even[u_->slot(k)] != 0;
      if (used && role_[k] == 0) throw UnpairedGenerator("unpaired generator " + g.name);
    }
  }

 private:
  UniversePtr u_;
  std::vector<Pair> pairs_;
  std::vector<int> role_;
};

inline Rational factorial(std::size_t k) {
  Rational f(1);
  for (std::size_t j = 2; j <= k; ++j) f *= static_cast<unsigned long>(j);
  return f;
}

/// Delta p = sum_i s_i d/dz^i d/dz+_i p.
template <class C>
SuperPolynomial<C> bv_laplacian(const SuperPolynomial<C>& p, const DarbouxPairing& d) {
  d.check_covers(p);
  SuperPolynomial<C> r(p.universe());
  for (const auto& pr : d.pairs()) {
    SuperPolynomial<C> t = p.derive(pr.zplus).derive(pr.z);
    r += pr.sign > 0 ? t : -t;
  }
  return r;
}

/// Bracket fixed by Delta(pq) = (Delta p) q + (-1)^|p| p Delta q + (-1)^|p| (p,q).
template <class C>
SuperPolynomial<C> bv_bracket(const SuperPolynomial<C>& p, const SuperPolynomial<C>& q, const DarbouxPairing& d) {
  d.check_covers(p);
  d.check_covers(q);
  SuperPolynomial<C> r(p.universe());
  for (int par = 0; par < 2; ++par) {
    SuperPolynomial<C> ph = p.parity_part(par);
    if (ph.is_zero()) continue;
    for (const auto& pr : d.pairs()) {
      const auto& u = *p.universe();
      int a = u.generator(pr.z).parity();
      int ap = u.generator(pr.zplus).parity();
      SuperPolynomial<C> t1 = ph.derive(pr.zplus) * q.derive(pr.z);
      SuperPolynomial<C> t2 = ph.derive(pr.z) * q.derive(pr.zplus);
      if ((ap * par) % 2) t1 = -t1;
      if ((a * par) % 2) t2 = -t2;
      SuperPolynomial<C> t = t1 + t2;
      r += pr.sign > 0 ? t : -t;
    }
  }
  return r;
}

/// exp of a nilpotent element as a finite sum.
template <class C>
SuperPolynomial<C> exp_nilpotent(const SuperPolynomial<C>& p) {
  using S = HbarScalar<C>;
  const auto& u = p.universe();
  SuperPolynomial<C> one = SuperPolynomial<C>::constant(u, S(ScalarTraits<C>::one()));
  if (!p.constant_term().is_zero()) throw NotNilpotent("exp_nilpotent: nonzero constant term");
  SuperPolynomial<C> result = one;
  SuperPolynomial<C> power = one;
  const std::size_t bound = u->num_odd() + 1;
  for (std::size_t k = 1; k <= bound; ++k) {
    power = power * p;
    if (power.is_zero()) return result;
    if (k == bound) break;
    result += power.scaled(S(ScalarTraits<C>::from_rational(Rational(1) / factorial(k))));
  }
  throw NotNilpotent("exp_nilpotent: argument is not nilpotent");
}

}  // namespace bvkit

#endif  // BVKIT_SUPERPOLY_HPP
