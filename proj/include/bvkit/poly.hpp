#ifndef BVKIT_POLY_HPP
#define BVKIT_POLY_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bvkit/scalar.hpp"

namespace bvkit {

/// Univariate polynomial with rational coefficients, c[k] t^k.
class Poly1 {
 public:
  Poly1() = default;
  Poly1(Rational c) { if (sgn(c) != 0) c_.push_back(std::move(c)); }  // NOLINT
  Poly1(long c) : Poly1(Rational(c)) {}  // NOLINT
  static Poly1 from_coeffs(std::vector<Rational> c) {
    Poly1 p;
    p.c_ = std::move(c);
    p.trim();
    return p;
  }
  static Poly1 t() { return from_coeffs({Rational(0), Rational(1)}); }

  const std::vector<Rational>& coeffs() const { return c_; }
  bool is_zero() const { return c_.empty(); }
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  Rational coeff(std::size_t k) const { return k < c_.size() ? c_[k] : Rational(0); }

  Rational operator()(const Rational& x) const {
    Rational r(0);
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * x + *it;
    return r;
  }
  double eval(double x) const {
    double r = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * x + it->get_d();
    return r;
  }

  Poly1& operator+=(const Poly1& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), Rational(0));
    for (std::size_t k = 0; k < o.c_.size(); ++k) c_[k] += o.c_[k];
    trim();
    return *this;
  }
  Poly1& operator-=(const Poly1& o) { return *this += -o; }
  Poly1 operator-() const {
    Poly1 r = *this;
    for (auto& x : r.c_) x = -x;
    return r;
  }
  friend Poly1 operator+(Poly1 a, const Poly1& b) { return a += b; }
  friend Poly1 operator-(Poly1 a, const Poly1& b) { return a -= b; }
  friend Poly1 operator*(const Poly1& a, const Poly1& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<Rational> c(a.c_.size() + b.c_.size() - 1, Rational(0));
    for (std::size_t i = 0; i < a.c_.size(); ++i)
      for (std::size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
    return from_coeffs(std::move(c));
  }
  friend bool operator==(const Poly1& a, const Poly1& b) { return a.c_ == b.c_; }

  Poly1 derivative() const {
    std::vector<Rational> c;
    for (std::size_t k = 1; k < c_.size(); ++k) c.push_back(c_[k] * static_cast<long>(k));
    return from_coeffs(std::move(c));
  }
  /// Antiderivative vanishing at 0.
  Poly1 antiderivative() const {
    std::vector<Rational> c{Rational(0)};
    for (std::size_t k = 0; k < c_.size(); ++k) c.push_back(c_[k] / static_cast<long>(k + 1));
    return from_coeffs(std::move(c));
  }
  Rational integrate(const Rational& lo, const Rational& hi) const {
    Poly1 a = antiderivative();
    return a(hi) - a(lo);
  }
  /// p(a t + b).
  Poly1 compose_affine(const Rational& a, const Rational& b) const {
    Poly1 lin = from_coeffs({b, a});
    Poly1 r;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * lin + Poly1(*it);
    return r;
  }

  std::string str(const std::string& var = "t") const {
    if (c_.empty()) return "0";
    std::string s;
    for (std::size_t k = 0; k < c_.size(); ++k) {
      if (sgn(c_[k]) == 0) continue;
      if (!s.empty()) s += " + ";
      s += to_string(c_[k]);
      if (k > 0) s += "*" + var + (k > 1 ? "^" + std::to_string(k) : "");
    }
    return s;
  }

 private:
  void trim() {
    while (!c_.empty() && sgn(c_.back()) == 0) c_.pop_back();
  }
  std::vector<Rational> c_;
};

/// Bivariate polynomial with rational coefficients in (t1, t2).
class Poly2 {
 public:
  using Key = std::pair<int, int>;
  Poly2() = default;
  Poly2(Rational c) { add({0, 0}, std::move(c)); }  // NOLINT
  Poly2(long c) : Poly2(Rational(c)) {}  // NOLINT
  static Poly2 t1() { Poly2 p; p.add({1, 0}, Rational(1)); return p; }
  static Poly2 t2() { Poly2 p; p.add({0, 1}, Rational(1)); return p; }
  static Poly2 outer(const Poly1& f, const Poly1& g) {
    Poly2 p;
    for (std::size_t i = 0; i < f.coeffs().size(); ++i)
      for (std::size_t j = 0; j < g.coeffs().size(); ++j)
        p.add({static_cast<int>(i), static_cast<int>(j)}, f.coeffs()[i] * g.coeffs()[j]);
    return p;
  }

  const std::map<Key, Rational>& terms() const { return t_; }
  bool is_zero() const { return t_.empty(); }
  void add(Key k, const Rational& c) {
    if (sgn(c) == 0) return;
    auto it = t_.find(k);
    if (it == t_.end()) {
      t_.emplace(k, c);
    } else {
      it->second += c;
      if (sgn(it->second) == 0) t_.erase(it);
    }
  }

  Rational operator()(const Rational& x, const Rational& y) const {
    Rational r(0);
    for (const auto& [k, c] : t_) r += c * pow(x, k.first) * pow(y, k.second);
    return r;
  }
  double eval(double x, double y) const {
    double r = 0.0;
    for (const auto& [k, c] : t_) r += c.get_d() * std::pow(x, k.first) * std::pow(y, k.second);
    return r;
  }

  Poly2& operator+=(const Poly2& o) {
    for (const auto& [k, c] : o.t_) add(k, c);
    return *this;
  }
  Poly2& operator-=(const Poly2& o) {
    for (const auto& [k, c] : o.t_) add(k, -c);
    return *this;
  }
  Poly2 operator-() const {
    Poly2 r;
    for (const auto& [k, c] : t_) r.t_.emplace(k, -c);
    return r;
  }
  friend Poly2 operator+(Poly2 a, const Poly2& b) { return a += b; }
  friend Poly2 operator-(Poly2 a, const Poly2& b) { return a -= b; }
  friend Poly2 operator*(const Poly2& a, const Poly2& b) {
    Poly2 r;
    for (const auto& [ka, ca] : a.t_)
      for (const auto& [kb, cb] : b.t_) r.add({ka.first + kb.first, ka.second + kb.second}, ca * cb);
    return r;
  }
  friend bool operator==(const Poly2& a, const Poly2& b) { return a.t_ == b.t_; }

  /// Fixes t1 = x, leaving a polynomial in t2.
  Poly1 at_first(const Rational& x) const {
    std::vector<Rational> c;
    for (const auto& [k, v] : t_) {
      if (c.size() <= static_cast<std::size_t>(k.second)) c.resize(k.second + 1, Rational(0));
      c[k.second] += v * pow(x, k.first);
    }
    return Poly1::from_coeffs(std::move(c));
  }
  /// Fixes t2 = y, leaving a polynomial in t1.
  Poly1 at_second(const Rational& y) const {
    std::vector<Rational> c;
    for (const auto& [k, v] : t_) {
      if (c.size() <= static_cast<std::size_t>(k.first)) c.resize(k.first + 1, Rational(0));
      c[k.first] += v * pow(y, k.second);
    }
    return Poly1::from_coeffs(std::move(c));
  }
  /// Restriction to t1 = t2 = t.
  Poly1 diagonal() const {
    std::vector<Rational> c;
    for (const auto& [k, v] : t_) {
      std::size_t d = k.first + k.second;
      if (c.size() <= d) c.resize(d + 1, Rational(0));
      c[d] += v;
    }
    return Poly1::from_coeffs(std::move(c));
  }
  Poly2 d1() const {
    Poly2 r;
    for (const auto& [k, c] : t_)
      if (k.first > 0) r.add({k.first - 1, k.second}, c * k.first);
    return r;
  }
  Poly2 d2() const {
    Poly2 r;
    for (const auto& [k, c] : t_)
      if (k.second > 0) r.add({k.first, k.second - 1}, c * k.second);
    return r;
  }
  /// P(a t1 + b, a t2 + b).
  Poly2 compose_affine(const Rational& a, const Rational& b) const {
    Poly2 r;
    Poly1 lin = Poly1::from_coeffs({b, a});
    for (const auto& [k, c] : t_) {
      Poly1 x = Poly1(1), y = Poly1(1);
      for (int i = 0; i < k.first; ++i) x = x * lin;
      for (int j = 0; j < k.second; ++j) y = y * lin;
      r += outer(x, y) * Poly2(c);
    }
    return r;
  }
  /// Integral over the region lo < t2 < t1 < hi (above) or lo < t1 < t2 < hi (below).
  Rational integrate_triangle(const Rational& lo, const Rational& hi, bool above) const {
    Rational total(0);
    for (const auto& [k, c] : t_) {
      // inner t2-integral as a polynomial in t1
      Rational e2 = Rational(1) / (k.second + 1);
      std::vector<Rational> xc(k.first + 1, Rational(0));
      xc[k.first] = 1;
      Poly1 x = Poly1::from_coeffs(xc);
      std::vector<Rational> yc(k.first + k.second + 2, Rational(0));
      yc[k.first + k.second + 1] = e2;
      Poly1 diag = Poly1::from_coeffs(yc);
      Poly1 inner = above ? diag - x * Poly1(e2 * pow(lo, k.second + 1)) : x * Poly1(e2 * pow(hi, k.second + 1)) - diag;
      total += c * inner.integrate(lo, hi);
    }
    return total;
  }
  Rational integrate_rectangle(const Rational& lo1, const Rational& hi1, const Rational& lo2, const Rational& hi2) const {
    Rational total(0);
    for (const auto& [k, c] : t_) {
      Rational a = (pow(hi1, k.first + 1) - pow(lo1, k.first + 1)) / (k.first + 1);
      Rational b = (pow(hi2, k.second + 1) - pow(lo2, k.second + 1)) / (k.second + 1);
      total += c * a * b;
    }
    return total;
  }

  std::string str() const {
    if (t_.empty()) return "0";
    std::string s;
    for (const auto& [k, c] : t_) {
      if (!s.empty()) s += " + ";
      s += to_string(c);
      if (k.first) s += "*t1" + (k.first > 1 ? "^" + std::to_string(k.first) : std::string());
      if (k.second) s += "*t2" + (k.second > 1 ? "^" + std::to_string(k.second) : std::string());
    }
    return s;
  }

  static Rational pow(const Rational& x, int e) {
    Rational r(1);
    for (int i = 0; i < e; ++i) r *= x;
    return r;
  }

 private:
  std::map<Key, Rational> t_;
};

}  // namespace bvkit

#endif  // BVKIT_POLY_HPP
