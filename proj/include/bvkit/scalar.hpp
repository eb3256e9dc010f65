#ifndef BVKIT_SCALAR_HPP
#define BVKIT_SCALAR_HPP

#include <gmpxx.h>

#include <cmath>
#include <complex>
#include <ostream>
#include <stdexcept>
#include <string>

namespace bvkit {

using Rational = mpq_class;

inline Rational make_rational(long num, long den = 1) {
  Rational r(num, den);
  r.canonicalize();
  return r;
}

inline Rational parse_rational(const std::string& s) {
  Rational r;
  if (r.set_str(s, 10) != 0) throw std::invalid_argument("bad rational: " + s);
  if (r.get_den() == 0) throw std::invalid_argument("zero denominator: " + s);
  r.canonicalize();
  return r;
}

inline std::string to_string(const Rational& r) { return r.get_str(); }

/// Exact complex rational a + b i.
class GaussQ {
 public:
  GaussQ() = default;
  GaussQ(long v) : re_(v) {}  // NOLINT
  GaussQ(Rational re) : re_(std::move(re)) {}  // NOLINT
  GaussQ(Rational re, Rational im) : re_(std::move(re)), im_(std::move(im)) {}

  static GaussQ i() { return GaussQ(Rational(0), Rational(1)); }

  const Rational& re() const { return re_; }
  const Rational& im() const { return im_; }
  bool is_zero() const { return sgn(re_) == 0 && sgn(im_) == 0; }
  bool is_real() const { return sgn(im_) == 0; }

  GaussQ conj() const { return {re_, -im_}; }
  Rational norm2() const { return re_ * re_ + im_ * im_; }

  GaussQ& operator+=(const GaussQ& o) { re_ += o.re_; im_ += o.im_; return *this; }
  GaussQ& operator-=(const GaussQ& o) { re_ -= o.re_; im_ -= o.im_; return *this; }
  GaussQ& operator*=(const GaussQ& o) {
    Rational r = re_ * o.re_ - im_ * o.im_;
    Rational m = re_ * o.im_ + im_ * o.re_;
    re_ = std::move(r);
    im_ = std::move(m);
    return *this;
  }
  GaussQ& operator/=(const GaussQ& o) {
    Rational n = o.norm2();
    if (sgn(n) == 0) throw std::domain_error("GaussQ division by zero");
    *this *= o.conj();
    re_ /= n;
    im_ /= n;
    return *this;
  }
  GaussQ operator-() const { return {-re_, -im_}; }

  friend GaussQ operator+(GaussQ a, const GaussQ& b) { return a += b; }
  friend GaussQ operator-(GaussQ a, const GaussQ& b) { return a -= b; }
  friend GaussQ operator*(GaussQ a, const GaussQ& b) { return a *= b; }
  friend GaussQ operator/(GaussQ a, const GaussQ& b) { return a /= b; }
  friend bool operator==(const GaussQ& a, const GaussQ& b) { return a.re_ == b.re_ && a.im_ == b.im_; }
  friend bool operator!=(const GaussQ& a, const GaussQ& b) { return !(a == b); }

  std::complex<double> to_complex() const { return {re_.get_d(), im_.get_d()}; }

  std::string str() const {
    if (sgn(im_) == 0) return re_.get_str();
    if (sgn(re_) == 0) return im_.get_str() + "i";
    return "(" + re_.get_str() + (sgn(im_) > 0 ? "+" : "") + im_.get_str() + "i)";
  }
  friend std::ostream& operator<<(std::ostream& os, const GaussQ& g) { return os << g.str(); }

 private:
  Rational re_{0};
  Rational im_{0};
};

using Complex = std::complex<double>;

/// Uniform interface over the two coefficient backends.
template <class C>
struct ScalarTraits;

template <>
struct ScalarTraits<GaussQ> {
  static constexpr bool exact = true;
  static GaussQ zero() { return GaussQ(); }
  static GaussQ one() { return GaussQ(1); }
  static GaussQ imag_unit() { return GaussQ::i(); }
  static bool is_zero(const GaussQ& c) { return c.is_zero(); }
  static double magnitude(const GaussQ& c) { return std::abs(c.to_complex()); }
  static GaussQ from_rational(const Rational& r) { return GaussQ(r); }
  static GaussQ from_double(double) { throw std::logic_error("float value in exact backend"); }
  static Complex to_complex(const GaussQ& c) { return c.to_complex(); }
  static std::string str(const GaussQ& c) { return c.str(); }
};

template <>
struct ScalarTraits<Complex> {
  static constexpr bool exact = false;
  static Complex zero() { return {0.0, 0.0}; }
  static Complex one() { return {1.0, 0.0}; }
  static Complex imag_unit() { return {0.0, 1.0}; }
  static bool is_zero(const Complex& c) { return c.real() == 0.0 && c.imag() == 0.0; }
  static double magnitude(const Complex& c) { return std::abs(c); }
  static Complex from_rational(const Rational& r) { return {r.get_d(), 0.0}; }
  static Complex from_double(double d) { return {d, 0.0}; }
  static Complex to_complex(const Complex& c) { return c; }
  static std::string str(const Complex& c) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "(%.17g%+.17gi)", c.real(), c.imag());
    return buf;
  }
};

template <>
struct ScalarTraits<Rational> {
  static constexpr bool exact = true;
  static Rational zero() { return Rational(0); }
  static Rational one() { return Rational(1); }
  static bool is_zero(const Rational& c) { return sgn(c) == 0; }
  static double magnitude(const Rational& c) { return std::abs(c.get_d()); }
  static Rational from_rational(const Rational& r) { return r; }
  static Complex to_complex(const Rational& c) { return {c.get_d(), 0.0}; }
  static std::string str(const Rational& c) { return c.get_str(); }
};

template <>
struct ScalarTraits<double> {
  static constexpr bool exact = false;
  static double zero() { return 0.0; }
  static double one() { return 1.0; }
  static bool is_zero(double c) { return c == 0.0; }
  static double magnitude(double c) { return std::abs(c); }
  static double from_rational(const Rational& r) { return r.get_d(); }
  static Complex to_complex(double c) { return {c, 0.0}; }
  static std::string str(double c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", c);
    return buf;
  }
};

/// i^q for an integer number of quarter turns.
template <class C>
C quarter_turn(long q) {
  long r = ((q % 4) + 4) % 4;
  C one = ScalarTraits<C>::one();
  C i = ScalarTraits<C>::imag_unit();
  switch (r) {
    case 0: return one;
    case 1: return i;
    case 2: return -one;
    default: return -i;
  }
}

}  // namespace bvkit

#endif  // BVKIT_SCALAR_HPP
