#ifndef BVKIT_RANDOM_HPP
#define BVKIT_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "bvkit/scalar.hpp"

namespace bvkit {

/// Seeded generator with platform-independent derived distributions.
class Rng {
 public:
  static constexpr std::uint64_t kDefaultSeed = 20240917;

  explicit Rng(std::uint64_t seed = kDefaultSeed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  long integer(long lo, long hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<long>(eng_() % span);
  }
  Rational rational(long range = 5, long maxden = 4) {
    return make_rational(integer(-range, range), integer(1, maxden));
  }
  /// Rational in the open interval (0, 1).
  Rational rational_unit(long maxden = 97) {
    long d = integer(2, maxden);
    return make_rational(integer(1, d - 1), d);
  }
  GaussQ gauss(long range = 3, long maxden = 3) {
    return GaussQ(rational(range, maxden), integer(0, 2) == 0 ? rational(range, maxden) : Rational(0));
  }
  double normal() {
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace bvkit

#endif  // BVKIT_RANDOM_HPP
