#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>

namespace iab {

/// Inverse of the standard normal CDF (Wichura's AS 241, PPND16).
/// Absolute error below 1e-15 for p in (0,1); well inside the 1e-9
/// budget the samplers rely on.
inline double inverse_normal_cdf(double p) {
  assert(p > 0.0 && p < 1.0);
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) *
                    r +
                4.5921953931549871457e+4) *
                   r +
               1.3731693765509461125e+4) *
                  r +
              1.9715909503065514427e+3) *
                 r +
             1.3314166789178437745e+2) *
                r +
            3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) *
                    r +
                2.1213794301586595867e+4) *
                   r +
               5.3941960214247511077e+3) *
                  r +
              6.8718700749205790830e+2) *
                 r +
             4.2313330701600911252e+1) *
                r +
            1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) *
                     r +
                 1.27045825245236838258e+0) *
                    r +
                3.64784832476320460504e+0) *
                   r +
               5.76949722146069140550e+0) *
                  r +
              4.63033784615654529590e+0) *
                 r +
             1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) *
                     r +
                 1.48103976427480074590e-1) *
                    r +
                6.89767334985100004550e-1) *
                   r +
               1.67638483018380384940e+0) *
                  r +
              2.05319162663775882187e+0) *
                 r +
             1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) *
                     r +
                 2.65321895265761230930e-2) *
                    r +
                2.96560571828504891230e-1) *
                   r +
               1.78482653991729133580e+0) *
                  r +
              5.46378491116411436990e+0) *
                 r +
             6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) *
                     r +
                 7.86869131145613259100e-4) *
                    r +
                1.48753612908506148525e-2) *
                   r +
               1.36929880922735805310e-1) *
                  r +
              5.99832206555887937690e-1) *
                 r +
             1.0);
  }
  return q < 0.0 ? -value : value;
}

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based pseudo-random stream (SplitMix64 evaluated at
/// key + i*golden). Streams derived from the same seed but different
/// stream ids are independent for all practical purposes, and a stream's
/// output depends only on (seed, stream, draw index), never on how other
/// streams were consumed.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : key_(detail::mix64(detail::mix64(seed + detail::kGolden) +
                           (stream + 1) * detail::kGolden)) {}

  std::uint64_t next_u64() {
    return detail::mix64(key_ + (++counter_) * detail::kGolden);
  }

  /// Uniform on the open interval (0,1); never returns an exact endpoint,
  /// so it is safe to feed through inverse CDFs.
  double next_double() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * next_double(); }

  /// Standard normal draw via inverse-CDF transform of one uniform.
  double normal() { return inverse_normal_cdf(next_double()); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    assert(n > 0);
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  /// Index drawn according to the given weights (assumed to sum to ~1).
  int categorical(std::span<const double> probabilities) {
    const double u = next_double();
    double cumulative = 0.0;
    for (std::size_t i = 0; i + 1 < probabilities.size(); ++i) {
      cumulative += probabilities[i];
      if (u < cumulative) return static_cast<int>(i);
    }
    return static_cast<int>(probabilities.size()) - 1;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Named sub-streams used by the simulator; listed here so that every
/// component derives the same streams from an episode seed.
enum class StreamId : std::uint64_t {
  Units = 0,
  Policy = 1,
  Fallback = 2,
};

inline RngStream make_stream(std::uint64_t seed, StreamId id) {
  return RngStream(seed, static_cast<std::uint64_t>(id));
}

}  // namespace iab
