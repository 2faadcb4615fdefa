#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace cop2l {

// Binary KL divergence kl(q,p) between Bernoulli(q) and Bernoulli(p), with
// the 0*ln(0) = 0 convention so kl(0,0) = kl(1,1) = 0.
inline double binary_kl(double q, double p) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::domain_error("binary_kl: q outside [0,1]");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("binary_kl: p outside [0,1]");
  double s = 0.0;
  if (q > 0.0) {
    if (p == 0.0) return std::numeric_limits<double>::infinity();
    s += q * std::log(q / p);
  }
  if (q < 1.0) {
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    s += (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
  }
  return s < 0.0 ? 0.0 : s;  // rounding can produce a tiny negative near p=q
}

// Largest p in [q,1] with kl(q,p) <= eps, by bisection to 1e-10 absolute.
// Returns exactly 1.0 once eps reaches kl(q, 1-1e-15), so a vacuous bound is
// machine-checkable as == 1.0.
inline double kl_inverse(double q, double eps) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::domain_error("kl_inverse: q outside [0,1]");
  if (!(eps >= 0.0) || !std::isfinite(eps))
    throw std::domain_error("kl_inverse: eps must be finite and nonnegative");
  if (eps == 0.0) return q;
  if (eps >= binary_kl(q, 1.0 - 1e-15)) return 1.0;
  double lo = q;
  double hi = 1.0;
  while (hi - lo > 1e-10) {
    double mid = 0.5 * (lo + hi);
    if (binary_kl(q, mid) <= eps) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;  // kl(q, lo) <= eps by construction
}

// Prior mass (6/pi^2)(k+1)^-2 over compression-set and iteration counts.
inline double zeta_prior(std::uint64_t k) {
  const double pi = 3.14159265358979323846;
  double kp1 = static_cast<double>(k) + 1.0;
  return 6.0 / (pi * pi * kp1 * kp1);
}

inline double log_zeta_prior(std::uint64_t k) {
  const double pi = 3.14159265358979323846;
  return std::log(6.0) - 2.0 * std::log(pi) - 2.0 * std::log(static_cast<double>(k) + 1.0);
}

// ln C(n,k) via log-gamma; binomials overflow doubles for n in the thousands,
// so every bound works with this instead of C(n,k) itself.
inline double log_binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) throw std::domain_error("log_binomial: k > n");
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace cop2l
