#pragma once

#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "xicoal/measure.hpp"

namespace xicoal {

using BigInt = boost::multiprecision::cpp_int;

// b blocks; groups of sizes ks (each >= 2, non-increasing) merge
// simultaneously; sbar = b - sum(ks) blocks do not participate.
struct MergerPattern {
  int b = 0;
  std::vector<int> ks;
  int sbar = 0;

  int groups() const { return static_cast<int>(ks.size()); }
  // Decrease in block count caused by the merger.
  int decrement() const { return b - groups() - sbar; }
  bool operator==(const MergerPattern&) const = default;
};

// Canonicalizes ks (sorted non-increasing) and validates.
MergerPattern make_pattern(int b, std::vector<int> ks);

// All canonical patterns with b blocks, in lexicographic order of ks.
std::vector<MergerPattern> enumerate_patterns(int b);

inline constexpr int kMaxMergerCountBlocks = 64;
inline constexpr int kMaxCollisionRateBlocks = 24;
inline constexpr int kMaxMergerOracleBlocks = 10;

// Number of ways to choose disjoint k_1-, ..., k_r-tuples from b blocks.
BigInt merger_count(const MergerPattern& p);

// Rate at which a given choice of groups merges (each group into one block).
double collision_rate(const XiMeasure& m, const MergerPattern& p);

// Total rate of decrease of the block count from b blocks.
double gamma_rate(const XiMeasure& m, int b);
ValueWithError gamma_rate_with_error(const XiMeasure& m, int b);

// sum over patterns of decrement * N * lambda; independent route to gamma_rate.
double gamma_via_mergers(const XiMeasure& m, int b);

// Lambda-coalescent rate lambda_{b,k} = int x^{k-2} (1-x)^{b-k} Lambda(dx),
// returned as its logarithm (-inf when zero).
double log_lambda_rate(const LambdaOnUnit& l, int b, int k);

// Probability that n blocks colored under P_x show a repeated integer color.
double collision_probability(const SimplexPoint& x, int n);

inline constexpr double kCollisionDpBudget = 1e7;

enum class CdiClass { ComesDown, DoesNotComeDown, Inconclusive };
const char* to_string(CdiClass c);

struct CdiVerdict {
  std::vector<std::pair<int, double>> gamma_partial_sums;
  double psi_log_slope = 0.0;
  double gamma_log_slope = 0.0;
  CdiClass classification = CdiClass::Inconclusive;
  bool heuristic = false;
  std::string note;
};

// d log psi / d log q by a central difference in log q.
double psi_log_slope(const XiMeasure& m, double q);

CdiVerdict classify_cdi(const XiMeasure& m, int b_max = 1000, double q_max = 1e8,
                        double margin = 0.1);

}  // namespace xicoal
