#ifndef BVKIT_HBAR_HPP
#define BVKIT_HBAR_HPP

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bvkit/scalar.hpp"

namespace bvkit {

struct OrderOverflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Finite Laurent sum in the formal parameter hbar.
template <class C>
class HbarScalar {
 public:
  using Coeff = C;
  using Term = std::pair<int, C>;
  using T = ScalarTraits<C>;

  HbarScalar() = default;
  HbarScalar(C c) { if (!T::is_zero(c)) terms_.emplace_back(0, std::move(c)); }  // NOLINT
  HbarScalar(long v) : HbarScalar(C(v)) {}  // NOLINT

  static HbarScalar monomial(C c, int power) {
    HbarScalar h;
    if (!T::is_zero(c)) h.terms_.emplace_back(power, std::move(c));
    return h;
  }
  static HbarScalar hbar(int power = 1) { return monomial(T::one(), power); }
  static HbarScalar from_terms(std::vector<Term> terms) {
    HbarScalar h;
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.first < b.first; });
    for (auto& t : terms) h.add_term(t.first, t.second);
    return h;
  }

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_[0].first == 0); }
  int min_power() const { return terms_.empty() ? 0 : terms_.front().first; }
  int max_power() const { return terms_.empty() ? 0 : terms_.back().first; }

  template <class D>
  HbarScalar<D> convert() const {
    std::vector<std::pair<int, D>> out;
    for (const auto& t : terms_) out.emplace_back(t.first, D(T::to_complex(t.second)));
    return HbarScalar<D>::from_terms(std::move(out));
  }

  C coeff(int power) const {
    for (const auto& t : terms_)
      if (t.first == power) return t.second;
    return T::zero();
  }

  HbarScalar& operator+=(const HbarScalar& o) { merge(o, false); return *this; }
  HbarScalar& operator-=(const HbarScalar& o) { merge(o, true); return *this; }
  HbarScalar operator-() const {
    HbarScalar r = *this;
    for (auto& t : r.terms_) t.second = -t.second;
    return r;
  }
  HbarScalar& operator*=(const HbarScalar& o) { *this = *this * o; return *this; }

  friend HbarScalar operator+(HbarScalar a, const HbarScalar& b) { return a += b; }
  friend HbarScalar operator-(HbarScalar a, const HbarScalar& b) { return a -= b; }
  friend HbarScalar operator*(const HbarScalar& a, const HbarScalar& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<Term> out;
    out.reserve(a.terms_.size() * b.terms_.size());
    for (const auto& x : a.terms_)
      for (const auto& y : b.terms_) out.emplace_back(x.first + y.first, x.second * y.second);
    std::sort(out.begin(), out.end(), [](const Term& p, const Term& q) { return p.first < q.first; });
    HbarScalar r;
    for (auto& t : out) r.add_term(t.first, t.second);
    return r;
  }
  friend bool operator==(const HbarScalar& a, const HbarScalar& b) {
    if (a.terms_.size() != b.terms_.size()) return false;
    for (std::size_t k = 0; k < a.terms_.size(); ++k)
      if (a.terms_[k].first != b.terms_[k].first || !(a.terms_[k].second == b.terms_[k].second)) return false;
    return true;
  }
  friend bool operator!=(const HbarScalar& a, const HbarScalar& b) { return !(a == b); }

  HbarScalar scaled(const C& c) const {
    if (T::is_zero(c)) return {};
    HbarScalar r = *this;
    for (auto& t : r.terms_) t.second = t.second * c;
    r.prune();
    return r;
  }
  HbarScalar shifted(int power) const {
    HbarScalar r = *this;
    for (auto& t : r.terms_) t.first += power;
    return r;
  }

  /// Exact division; throws unless the quotient is again a finite Laurent sum.
  friend HbarScalar operator/(const HbarScalar& a, const HbarScalar& b) {
    if (b.is_zero()) throw std::domain_error("HbarScalar division by zero");
    if (a.is_zero()) return {};
    int sa = a.min_power(), sb = b.min_power();
    int da = a.max_power() - sa, db = b.max_power() - sb;
    std::vector<C> num(da + 1, T::zero()), den(db + 1, T::zero());
    for (const auto& t : a.terms_) num[t.first - sa] = t.second;
    for (const auto& t : b.terms_) den[t.first - sb] = t.second;
    if (da < db) throw std::domain_error("HbarScalar division is not exact");
    std::vector<C> q(da - db + 1, T::zero());
    for (int k = da - db; k >= 0; --k) {
      C c = num[k + db] / den[db];
      q[k] = c;
      if (T::is_zero(c)) continue;
      for (int j = 0; j <= db; ++j) num[k + j] = num[k + j] - c * den[j];
    }
    for (const auto& r : num)
      if (!T::is_zero(r)) throw std::domain_error("HbarScalar division is not exact");
    HbarScalar out;
    for (int k = 0; k <= da - db; ++k) out.add_term(sa - sb + k, q[k]);
    return out;
  }
  HbarScalar& operator/=(const HbarScalar& o) { *this = *this / o; return *this; }

  Complex evaluate(Complex h) const {
    Complex s{0.0, 0.0};
    for (const auto& t : terms_) s += T::to_complex(t.second) * std::pow(h, t.first);
    return s;
  }

  double magnitude() const {
    double m = 0.0;
    for (const auto& t : terms_) m = std::max(m, T::magnitude(t.second));
    return m;
  }

  /// Keeps only powers in [lo, hi].
  HbarScalar truncated(int lo, int hi) const {
    HbarScalar r;
    for (const auto& t : terms_)
      if (t.first >= lo && t.first <= hi) r.terms_.push_back(t);
    return r;
  }

  /// Throws OrderOverflow if any power exceeds `hi`.
  void check_bound(int hi) const {
    if (!terms_.empty() && max_power() > hi)
      throw OrderOverflow("hbar power " + std::to_string(max_power()) + " exceeds bound " + std::to_string(hi));
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::string s;
    for (const auto& t : terms_) {
      if (!s.empty()) s += " + ";
      s += T::str(t.second);
      if (t.first != 0) s += "*hbar^" + std::to_string(t.first);
    }
    return s;
  }

 private:
  void add_term(int power, const C& c) {
    if (T::is_zero(c)) return;
    if (!terms_.empty() && terms_.back().first == power) {
      terms_.back().second = terms_.back().second + c;
      if (T::is_zero(terms_.back().second)) terms_.pop_back();
    } else {
      terms_.emplace_back(power, c);
    }
  }
  void merge(const HbarScalar& o, bool negate) {
    std::vector<Term> out;
    out.reserve(terms_.size() + o.terms_.size());
    auto i = terms_.begin();
    auto j = o.terms_.begin();
    while (i != terms_.end() || j != o.terms_.end()) {
      if (j == o.terms_.end() || (i != terms_.end() && i->first < j->first)) {
        out.push_back(*i++);
      } else {
        C c = negate ? -j->second : j->second;
        if (i != terms_.end() && i->first == j->first) {
          c = i->second + c;
          ++i;
        }
        if (!T::is_zero(c)) out.emplace_back(j->first, std::move(c));
        ++j;
      }
    }
    terms_ = std::move(out);
  }
  void prune() {
    terms_.erase(std::remove_if(terms_.begin(), terms_.end(), [](const Term& t) { return T::is_zero(t.second); }),
                 terms_.end());
  }

  std::vector<Term> terms_;
};

using ExactHbar = HbarScalar<GaussQ>;
using FloatHbar = HbarScalar<Complex>;

template <class C>
struct ScalarTraits<HbarScalar<C>> {
  static constexpr bool exact = ScalarTraits<C>::exact;
  static HbarScalar<C> zero() { return {}; }
  static HbarScalar<C> one() { return HbarScalar<C>(ScalarTraits<C>::one()); }
  static HbarScalar<C> imag_unit() { return HbarScalar<C>(ScalarTraits<C>::imag_unit()); }
  static bool is_zero(const HbarScalar<C>& c) { return c.is_zero(); }
  static double magnitude(const HbarScalar<C>& c) { return c.magnitude(); }
  static HbarScalar<C> from_rational(const Rational& r) { return HbarScalar<C>(ScalarTraits<C>::from_rational(r)); }
  static std::string str(const HbarScalar<C>& c) { return c.str(); }
};

}  // namespace bvkit

#endif  // BVKIT_HBAR_HPP
