#pragma once

#include <cmath>
#include <cstdint>

namespace xicoal {

// e^{-z} - 1 + z without cancellation near zero.
inline double phi_exp(double z) {
  if (std::fabs(z) < 0.1) {
    // Taylor series: sum_{k>=2} (-z)^k / k!
    double term = z * z / 2.0;
    double sum = term;
    for (int k = 3; k <= 14; ++k) {
      term *= -z / k;
      sum += term;
    }
    return sum;
  }
  return std::expm1(-z) + z;
}

// -log(1-x) - x for x in [0,1).
inline double neg_log1m_minus_x(double x) {
  if (x < 0.1) {
    double pw = x * x;
    double sum = 0.0;
    for (int k = 2; k <= 18; ++k) {
      sum += pw / k;
      pw *= x;
    }
    return sum;
  }
  return -std::log1p(-x) - x;
}

// b x - 1 + (1-x)^b, the expected block decrement contributed by one
// paintbox coordinate of mass x when b blocks are colored.
inline double binomial_decrement(double b, double x) {
  if (x >= 1.0) return b - 1.0;
  if (x <= 0.0) return 0.0;
  if (b * x > 4.0) return b * x - 1.0 + std::exp(b * std::log1p(-x));
  const double z = -b * std::log1p(-x);
  const double v = phi_exp(z) - b * neg_log1m_minus_x(x);
  return v > 0.0 ? v : 0.0;
}

inline double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace xicoal
