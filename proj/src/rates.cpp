#include "xicoal/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "xicoal/error.hpp"
#include "xicoal/numerics.hpp"

namespace xicoal {
namespace {

void enumerate_rec(int b, int remaining, int max_k, std::vector<int>& ks,
                   std::vector<MergerPattern>& out) {
  for (int k = std::min(max_k, remaining); k >= 2; --k) {
    ks.push_back(k);
    out.push_back(MergerPattern{b, ks, remaining - k});
    enumerate_rec(b, remaining - k, k, ks, out);
    ks.pop_back();
  }
}

// sum_{l=0}^{sbar} C(sbar,l) sum_{distinct i_1..i_{r+l}} prod_j x_{i_j}^{k_j}
//   x_{i_{r+1}} ... x_{i_{r+l}} (1 - s1)^{sbar-l}
// by dynamic programming over coordinates. Groups are distinguishable and
// tracked by bitmask; the l singleton slots are counted as an unordered set.
double atom_pattern_sum(std::span<const double> xs, double s1, const MergerPattern& p) {
  const int r = p.groups();
  const int states = 1 << r;
  const int lmax = p.sbar;
  const auto idx = [lmax](int mask, int l) {
    return static_cast<std::size_t>(mask) * static_cast<std::size_t>(lmax + 1) +
           static_cast<std::size_t>(l);
  };
  std::vector<double> dp(static_cast<std::size_t>(states) * (lmax + 1), 0.0);
  std::vector<double> next(dp.size());
  dp[idx(0, 0)] = 1.0;
  std::vector<double> powk(static_cast<std::size_t>(r));
  for (double x : xs) {
    for (int j = 0; j < r; ++j) powk[j] = std::pow(x, p.ks[j]);
    next = dp;
    for (int mask = 0; mask < states; ++mask) {
      for (int l = 0; l <= lmax; ++l) {
        const double v = dp[idx(mask, l)];
        if (v == 0.0) continue;
        for (int j = 0; j < r; ++j) {
          if (mask & (1 << j)) continue;
          next[idx(mask | (1 << j), l)] += v * powk[j];
        }
        if (l < lmax) next[idx(mask, l + 1)] += v * x;
      }
    }
    dp.swap(next);
  }
  const double rest = std::max(0.0, 1.0 - s1);
  double total = 0.0;
  for (int l = 0; l <= lmax; ++l) {
    const double e = dp[idx(states - 1, l)];
    if (e == 0.0) continue;
    // C(sbar,l) * l! = sbar! / (sbar-l)!
    const double ordered = std::exp(std::lgamma(lmax + 1.0) - std::lgamma(lmax - l + 1.0));
    const double tail = (lmax - l == 0) ? 1.0 : std::pow(rest, lmax - l);
    total += ordered * e * tail;
  }
  return total;
}

}  // namespace

MergerPattern make_pattern(int b, std::vector<int> ks) {
  if (b < 2) throw Error(ErrorKind::ValidationError, "merger pattern needs b >= 2");
  if (ks.empty()) throw Error(ErrorKind::ValidationError, "merger pattern needs at least one group");
  std::sort(ks.begin(), ks.end(), std::greater<>());
  if (ks.back() < 2) throw Error(ErrorKind::ValidationError, "merger group sizes must be >= 2");
  const int used = std::accumulate(ks.begin(), ks.end(), 0);
  if (used > b) throw Error(ErrorKind::ValidationError, "merger groups exceed block count");
  return MergerPattern{b, std::move(ks), b - used};
}

std::vector<MergerPattern> enumerate_patterns(int b) {
  std::vector<MergerPattern> out;
  std::vector<int> ks;
  enumerate_rec(b, b, b, ks, out);
  return out;
}

BigInt merger_count(const MergerPattern& p) {
  if (p.b > kMaxMergerCountBlocks) {
    throw Error(ErrorKind::Overflow, "merger_count supports b <= 64");
  }
  auto factorial = [](int n) {
    BigInt f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  BigInt denom = factorial(p.sbar);
  for (std::size_t i = 0; i < p.ks.size();) {
    std::size_t j = i;
    while (j < p.ks.size() && p.ks[j] == p.ks[i]) {
      denom *= factorial(p.ks[j]);
      ++j;
    }
    denom *= factorial(static_cast<int>(j - i));
    i = j;
  }
  return factorial(p.b) / denom;
}

double collision_rate(const XiMeasure& m, const MergerPattern& p) {
  if (p.b > kMaxCollisionRateBlocks) {
    throw Error(ErrorKind::PatternTooLarge, "collision_rate supports b <= 24");
  }
  if (const auto* k = m.as<Kingman>()) {
    return (p.ks.size() == 1 && p.ks[0] == 2) ? k->a : 0.0;
  }
  if (m.as<DyadicFamily>()) {
    throw Error(ErrorKind::UnsupportedMeasure, "collision_rate: dyadic support is too large to enumerate");
  }
  if (const auto* l = m.as<LambdaOnUnit>(); l && l->beta) {
    throw Error(ErrorKind::UnsupportedMeasure, "collision_rate: beta density component not supported");
  }
  double total = 0.0;
  if (const auto* f = m.as<FiniteAtomic>()) {
    for (const auto& a : f->atoms) {
      total += a.weight * atom_pattern_sum(a.point.coords(), a.point.s1(), p) / a.point.s2();
    }
  } else {
    for (const auto& a : std::get<LambdaOnUnit>(m.variant()).atoms) {
      const double xs[1] = {a.x};
      total += a.weight * atom_pattern_sum(xs, a.x, p) / (a.x * a.x);
    }
  }
  return total;
}

ValueWithError gamma_rate_with_error(const XiMeasure& m, int b) {
  if (b < 2) throw Error(ErrorKind::ValidationError, "gamma requires b >= 2");
  const double bd = b;
  const double pairs = choose2(bd);
  if (const auto* k = m.as<Kingman>()) return {k->a * pairs, 0.0};
  ValueWithError out{0.0, 0.0};
  const auto* lam = m.as<LambdaOnUnit>();
  if (lam && lam->beta) {
    for (const auto& a : lam->atoms) {
      out.value += a.weight * binomial_decrement(bd, a.x) / (a.x * a.x);
    }
    auto g = [bd, pairs](double x) {
      const double x2 = x * x;
      if (x2 < 1e-280) return pairs;
      return binomial_decrement(bd, x) / x2;
    };
    double err = 0.0;
    out.value += lam->beta->weight * beta_expectation(*lam->beta, g, &err, bd > 2.0 ? 1.0 / bd : 0.5);
    out.error += lam->beta->weight * err;
    return out;
  }
  for (const auto& atom : atom_views(m)) {
    out.value += atom.weight * atom.sum_coords([bd](double x) { return binomial_decrement(bd, x); }) /
                 atom.s2;
  }
  if (const auto* d = m.as<DyadicFamily>()) {
    out.error = d->scale * pairs * std::ldexp(1.0, -d->levels);
  }
  return out;
}

double gamma_rate(const XiMeasure& m, int b) { return gamma_rate_with_error(m, b).value; }

double gamma_via_mergers(const XiMeasure& m, int b) {
  if (b < 2) throw Error(ErrorKind::ValidationError, "gamma requires b >= 2");
  if (b > kMaxMergerOracleBlocks) {
    throw Error(ErrorKind::PatternTooLarge, "gamma_via_mergers supports b <= 10");
  }
  double total = 0.0;
  for (const auto& p : enumerate_patterns(b)) {
    const double lam = collision_rate(m, p);
    if (lam == 0.0) continue;
    total += p.decrement() * merger_count(p).convert_to<double>() * lam;
  }
  return total;
}

double log_lambda_rate(const LambdaOnUnit& l, int b, int k) {
  std::vector<double> terms;
  for (const auto& a : l.atoms) {
    terms.push_back(std::log(a.weight) + (k - 2) * std::log(a.x) + (b - k) * std::log1p(-a.x));
  }
  if (l.beta) {
    const auto lbeta = [](double p, double q) {
      return std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q);
    };
    const auto& be = *l.beta;
    terms.push_back(std::log(be.weight) + lbeta(k - 2 + be.a, b - k + be.b) - lbeta(be.a, be.b));
  }
  if (terms.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

double collision_probability(const SimplexPoint& x, int n) {
  if (n < 2) throw Error(ErrorKind::ValidationError, "collision_probability requires n >= 2");
  const auto xs = x.coords();
  const std::size_t jmax = std::min<std::size_t>(xs.size(), static_cast<std::size_t>(n));
  if (static_cast<double>(xs.size()) * static_cast<double>(jmax) > kCollisionDpBudget) {
    throw Error(ErrorKind::SupportTooLarge, "collision_probability: support x n exceeds DP budget");
  }
  // Elementary symmetric polynomials e_j of the coordinates, j <= jmax.
  std::vector<long double> e(jmax + 1, 0.0L);
  e[0] = 1.0L;
  for (double v : xs) {
    for (std::size_t j = jmax; j >= 1; --j) e[j] += e[j - 1] * static_cast<long double>(v);
  }
  // P(no repeat) = sum_j n!/(n-j)! e_j (1 - s1)^{n-j}: j blocks take distinct
  // integer colors, the rest take continuous labels.
  const long double rest = std::max(0.0L, 1.0L - static_cast<long double>(x.s1()));
  long double none = 0.0L;
  for (std::size_t j = 0; j <= jmax; ++j) {
    if (e[j] <= 0.0L) continue;
    const long double nj = static_cast<long double>(n - static_cast<int>(j));
    if (nj > 0 && rest == 0.0L) continue;
    const long double log_fall = std::lgamma(static_cast<long double>(n) + 1.0L) - std::lgamma(nj + 1.0L);
    const long double log_rest = nj > 0 ? nj * std::log(rest) : 0.0L;
    none += std::exp(log_fall + std::log(e[j]) + log_rest);
  }
  const long double r = 1.0L - none;
  return static_cast<double>(std::clamp(r, 0.0L, 1.0L));
}

const char* to_string(CdiClass c) {
  switch (c) {
    case CdiClass::ComesDown: return "ComesDown";
    case CdiClass::DoesNotComeDown: return "DoesNotComeDown";
    case CdiClass::Inconclusive: return "Inconclusive";
  }
  return "Unknown";
}

double psi_log_slope(const XiMeasure& m, double q) {
  constexpr double h = 1e-4;
  const double up = psi(m, q * std::exp(h));
  const double down = psi(m, q * std::exp(-h));
  return (std::log(up) - std::log(down)) / (2.0 * h);
}

CdiVerdict classify_cdi(const XiMeasure& m, int b_max, double q_max, double margin) {
  if (b_max < 10) throw Error(ErrorKind::ValidationError, "classify_cdi requires b_max >= 10");
  if (!(q_max >= 10.0)) throw Error(ErrorKind::ValidationError, "classify_cdi requires q_max >= 10");
  CdiVerdict out;
  double acc = 0.0;
  int next_mark = 2;
  for (int b = 2; b <= b_max; ++b) {
    acc += 1.0 / gamma_rate(m, b);
    if (b == next_mark || b == b_max) {
      out.gamma_partial_sums.emplace_back(b, acc);
      if (b == next_mark) next_mark *= 2;
    }
  }
  out.psi_log_slope = psi_log_slope(m, q_max);
  out.gamma_log_slope =
      std::log(gamma_rate(m, b_max) / gamma_rate(m, b_max / 2)) / std::log(b_max / static_cast<double>(b_max / 2));

  if (m.as<Kingman>()) {
    out.classification = CdiClass::ComesDown;
    out.note = "psi(q) = a q^2/2";
    return out;
  }
  if (const auto* l = m.as<LambdaOnUnit>()) {
    // Near zero a Beta(a,b) density gives psi = Theta(q^{2-a}) for a < 1,
    // Theta(q log q) for a = 1 and Theta(q) for a > 1; atoms add Theta(q).
    if (l->beta && l->beta->a < 1.0) {
      out.classification = CdiClass::ComesDown;
      out.note = "beta density with a < 1: int^inf dq/psi < inf";
    } else {
      out.classification = CdiClass::DoesNotComeDown;
      out.note = "psi = O(q log q): int^inf dq/psi = inf";
    }
    return out;
  }
  if (m.as<FiniteAtomic>()) {
    out.classification = CdiClass::DoesNotComeDown;
    out.note = "finitely many atoms: psi = Theta(q) and gamma_b = O(b)";
    return out;
  }

  out.heuristic = true;
  const auto& d = std::get<DyadicFamily>(m.variant());
  const auto reg = regularity_integral(m, d.levels);
  const double threshold = 1.0 + margin;
  std::ostringstream note;
  note << "heuristic: psi log-slope " << out.psi_log_slope << ", gamma log-slope "
       << out.gamma_log_slope << "; regularity " << to_string(reg.classification);
  if (out.psi_log_slope >= threshold && out.gamma_log_slope >= threshold) {
    out.classification = CdiClass::ComesDown;
    note << "; sum 1/gamma_b appears finite";
  } else if (out.psi_log_slope < threshold) {
    if (reg.classification == RegularityClass::Regular) {
      out.classification = CdiClass::DoesNotComeDown;
      note << "; regular with infinite candidate speed";
    } else {
      out.classification = CdiClass::Inconclusive;
      if (reg.classification == RegularityClass::NonRegularDiverging) {
        note << "; non-regular: candidate speed infinite, yet the coalescent may still "
                "come down from infinity";
      }
    }
  } else {
    out.classification = CdiClass::Inconclusive;
  }
  out.note = note.str();
  return out;
}

}  // namespace xicoal
