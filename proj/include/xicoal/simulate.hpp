#pragma once

#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "xicoal/measure.hpp"
#include "xicoal/rng.hpp"

namespace xicoal {

// Uniforms of one coloring step: draw i is stream_uniform(seed, stream, ring, i).
struct UniformSource {
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;
  std::uint64_t ring = 0;
  double operator()(std::uint64_t i) const { return stream_uniform(seed, stream, ring, i); }
};

// Inversion sampler of the coloring law P_x: integer color l with
// probability x_l, a unique label (-1) with probability 1 - S1.
class Paintbox {
 public:
  explicit Paintbox(const AtomView& view);
  explicit Paintbox(const SimplexPoint& x);
  std::int64_t color(double u) const;
  double s1() const { return s1_; }
  double s2() const { return s2_; }

 private:
  std::vector<double> cdf_;  // explicit points
  std::uint64_t count_ = 0;  // uniform points
  double value_ = 0.0;
  double s1_ = 0.0;
  double s2_ = 0.0;
};

inline constexpr std::int64_t kUniqueColor = -1;

struct ColoringOutcome {
  // (integer color, Y) for every color drawn at least once, sorted by color.
  std::vector<std::pair<std::int64_t, int>> counts;
  // D = sum_l (Y_l - 1{Y_l > 0})
  int decrement = 0;
  std::vector<std::int64_t> labels;  // per block position
};

ColoringOutcome sample_coloring(const SimplexPoint& x, int n, const UniformSource& src);
ColoringOutcome sample_coloring(const Paintbox& box, int n, const UniformSource& src);

// Number of classes among labels (unique labels count once each).
int count_classes(const std::int64_t* labels, std::size_t n, std::vector<std::int64_t>& scratch);

struct Trajectory {
  std::vector<double> times;  // events with D > 0 only
  std::vector<int> counts;    // count after each event
  int initial_n = 0;
  std::uint64_t seed = 0;
  double truncation_epsilon = 0.0;
  double horizon = 0.0;
  std::uint64_t null_events = 0;

  // Value after the last event at or before t.
  int count_at(double t) const;
  bool operator==(const Trajectory&) const = default;
};

void write_trajectory_csv(std::ostream& os, const Trajectory& tr);

struct PartitionState {
  // Blocks of {1..n}, each sorted, ordered by smallest element.
  std::vector<std::vector<int>> blocks;
  bool operator==(const PartitionState&) const = default;
};

// Smallest S2 over atoms divided by 2 for finite atomic measures,
// 2^{-2 levels} for dyadic families, 0 otherwise.
double default_epsilon(const XiMeasure& m);

// s C(n,2) Xi{S2 <= epsilon}, clamped to [0, 1].
double truncation_error_bound(const XiMeasure& m, double epsilon, double s, int n);

struct SimulationBudget {
  // Upper bound on the expected number of clock rings, null events included.
  double max_expected_rings = 2e8;
};

Trajectory simulate_block_count(const XiMeasure& m, int n0, double horizon, double epsilon,
                                std::uint64_t seed, const SimulationBudget& budget = {});

// Cached lambda_{b,k} choice distributions for the Lambda block-count chain.
class LambdaChainTable {
 public:
  LambdaChainTable(const LambdaOnUnit& l, int n_max);
  const LambdaOnUnit& measure() const { return lambda_; }
  int n_max() const { return n_max_; }
  // g_b = sum_k C(b,k) lambda_{b,k}. Rows above the cache use the exact
  // recurrence g_{b+1} = g_b + b * int (1-x)^{b-1} Lambda(dx).
  double total_rate(int b) const;
  // k in [2, b] with u in (0,1) by inversion of the normalized rates;
  // uncached rows are inverted by a sequential search from k = 2.
  int sample_k(int b, double u) const;
  // P(k | b) for k in [2, b].
  double probability(int b, int k) const;

 private:
  struct Row {
    double total = 0.0;
    std::vector<double> cdf;  // cdf[k-2]
  };
  Row build_row(int b) const;
  const Row& row(int b, Row& scratch) const;
  double term(int b, int k) const;  // C(b,k) lambda_{b,k}
  LambdaOnUnit lambda_;
  int n_max_;
  std::vector<Row> rows_;
  std::vector<double> totals_;  // totals_[b] for b <= n_max
};

inline constexpr int kLambdaCacheLimit = 3000;

Trajectory simulate_lambda_chain(const LambdaOnUnit& l, int n0, double horizon, std::uint64_t seed);
Trajectory simulate_lambda_chain(const LambdaChainTable& table, int n0, double horizon,
                                 std::uint64_t seed);

inline constexpr int kMaxPartitionBlocks = 256;

std::vector<std::pair<double, PartitionState>> simulate_partition(const XiMeasure& m, int n0,
                                                                  double horizon, double epsilon,
                                                                  std::uint64_t seed);

// Rings of the retained atoms (S2 > epsilon) of a discrete measure in time
// order. Atom j's r-th waiting time uses stream_uniform(seed, clock(j), r, 0).
class PaintboxEvents {
 public:
  PaintboxEvents(const XiMeasure& m, double epsilon, double horizon, std::uint64_t seed,
                 const SimulationBudget& budget = {});
  struct Ring {
    double time;
    std::size_t slot;  // index into retained atoms
    std::uint64_t ring;
  };
  // False once the next ring would fall after the horizon.
  bool next(Ring& out);
  std::size_t size() const { return boxes_.size(); }
  const Paintbox& box(std::size_t slot) const { return boxes_[slot]; }
  std::uint32_t atom_index(std::size_t slot) const { return index_[slot]; }
  UniformSource colors(const Ring& r) const;
  UniformSource flips(const Ring& r) const;
  double total_rate() const { return total_rate_; }

 private:
  void schedule(std::size_t slot);
  std::vector<Paintbox> boxes_;
  std::vector<std::uint32_t> index_;
  std::vector<double> rate_;
  std::vector<double> next_time_;
  std::vector<std::uint64_t> next_ring_;
  std::vector<std::size_t> heap_;
  double horizon_;
  std::uint64_t seed_;
  double total_rate_ = 0.0;
};

}  // namespace xicoal
