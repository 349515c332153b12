#pragma once

// Independent reference computations used by the tests.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace oracle {

// int_0^1 (e^{-qx} - 1 + qx)/x^2 Beta(a,b)(dx) by tanh-sinh in x.
inline double psi_beta(double a, double b, double q) {
  boost::math::quadrature::tanh_sinh<double> ts;
  auto f = [&](double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double z = q * x;
    const double g = (z < 1e-4) ? q * q * (0.5 - z / 6.0 + z * z / 24.0) : (std::expm1(-z) + z) / (x * x);
    return g * std::pow(x, a - 1.0) * std::pow(1.0 - x, b - 1.0);
  };
  double total = 0.0;
  // Breakpoints at the scale 1/q keep tanh-sinh accurate for large q.
  std::vector<double> cuts = {0.0};
  for (double c = 1.0 / q; c < 1.0; c *= 10.0) cuts.push_back(c);
  cuts.push_back(1.0);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] > cuts[i]) total += ts.integrate(f, cuts[i], cuts[i + 1]);
  }
  return total / boost::math::beta(a, b);
}

// Probability of a repeated integer color among n blocks, by enumerating
// every assignment of colors in {0..k-1, unique}.
inline double collision_probability_brute(const std::vector<double>& x, int n) {
  const int k = static_cast<int>(x.size());
  double s1 = 0.0;
  for (double v : x) s1 += v;
  std::vector<int> c(static_cast<std::size_t>(n), 0);
  double p_repeat = 0.0;
  for (;;) {
    double p = 1.0;
    std::vector<int> seen(static_cast<std::size_t>(k), 0);
    bool repeat = false;
    for (int i = 0; i < n; ++i) {
      if (c[static_cast<std::size_t>(i)] == k) {
        p *= 1.0 - s1;
      } else {
        p *= x[static_cast<std::size_t>(c[static_cast<std::size_t>(i)])];
        if (seen[static_cast<std::size_t>(c[static_cast<std::size_t>(i)])]++) repeat = true;
      }
    }
    if (repeat) p_repeat += p;
    int pos = 0;
    while (pos < n && ++c[static_cast<std::size_t>(pos)] > k) c[static_cast<std::size_t>(pos++)] = 0;
    if (pos == n) break;
  }
  return p_repeat;
}

// Exact distribution of the decrement D over all colorings of n blocks.
inline std::map<int, double> decrement_distribution(const std::vector<double>& x, int n) {
  const int k = static_cast<int>(x.size());
  double s1 = 0.0;
  for (double v : x) s1 += v;
  std::map<int, double> dist;
  std::vector<int> c(static_cast<std::size_t>(n), 0);
  for (;;) {
    double p = 1.0;
    std::vector<int> y(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      const int ci = c[static_cast<std::size_t>(i)];
      if (ci == k) {
        p *= 1.0 - s1;
      } else {
        p *= x[static_cast<std::size_t>(ci)];
        ++y[static_cast<std::size_t>(ci)];
      }
    }
    int d = 0;
    for (int v : y) d += v > 0 ? v - 1 : 0;
    dist[d] += p;
    int pos = 0;
    while (pos < n && ++c[static_cast<std::size_t>(pos)] > k) c[static_cast<std::size_t>(pos++)] = 0;
    if (pos == n) break;
  }
  return dist;
}

// Distribution of the block count after a color-joining step from n blocks.
inline std::map<int, double> joining_distribution(const std::vector<double>& x, int n) {
  const int k = static_cast<int>(x.size());
  double s1 = 0.0;
  for (double v : x) s1 += v;
  std::map<int, double> dist;
  std::vector<int> c(static_cast<std::size_t>(n), 0);
  for (;;) {
    double p = 1.0;
    int uniques = 0;
    bool any = false;
    for (int i = 0; i < n; ++i) {
      const int ci = c[static_cast<std::size_t>(i)];
      if (ci == k) {
        p *= 1.0 - s1;
        ++uniques;
      } else {
        p *= x[static_cast<std::size_t>(ci)];
        any = true;
      }
    }
    dist[uniques + (any ? 1 : 0)] += p;
    int pos = 0;
    while (pos < n && ++c[static_cast<std::size_t>(pos)] > k) c[static_cast<std::size_t>(pos++)] = 0;
    if (pos == n) break;
  }
  return dist;
}

// Number of ways to pick disjoint groups of the given sizes from b labelled
// items (groups of equal size unordered), by recursive enumeration.
inline std::uint64_t merger_count_brute(int b, std::vector<int> ks) {
  // Count ordered selections, then divide by permutations of equal sizes.
  std::function<std::uint64_t(int, std::size_t)> rec = [&](int remaining, std::size_t g) -> std::uint64_t {
    if (g == ks.size()) return 1;
    // C(remaining, ks[g])
    std::uint64_t c = 1;
    for (int i = 0; i < ks[g]; ++i) c = c * static_cast<std::uint64_t>(remaining - i) / static_cast<std::uint64_t>(i + 1);
    return c * rec(remaining - ks[g], g + 1);
  };
  std::uint64_t ordered = rec(b, 0);
  std::map<int, int> mult;
  for (int k : ks) ++mult[k];
  for (const auto& [k, m] : mult) {
    for (int i = 2; i <= m; ++i) ordered /= static_cast<std::uint64_t>(i);
  }
  return ordered;
}

}  // namespace oracle
