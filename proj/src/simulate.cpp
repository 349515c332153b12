#include "xicoal/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

#include "xicoal/error.hpp"
#include "xicoal/numerics.hpp"
#include "xicoal/rates.hpp"

namespace xicoal {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::ValidationError, msg); }

void check_common(int n0, double horizon) {
  if (n0 < 2) invalid("simulation needs n0 >= 2");
  if (!(horizon >= 0.0)) invalid("horizon must be >= 0");
}

Trajectory empty_trajectory(int n0, double horizon, double epsilon, std::uint64_t seed) {
  Trajectory tr;
  tr.initial_n = n0;
  tr.horizon = horizon;
  tr.truncation_epsilon = epsilon;
  tr.seed = seed;
  return tr;
}

double kingman_rate(double a, int b) { return a * choose2(static_cast<double>(b)); }

}  // namespace

Paintbox::Paintbox(const AtomView& view) : s1_(view.s1), s2_(view.s2) {
  if (view.point != nullptr) {
    const auto c = view.point->coords();
    cdf_.resize(c.size());
    std::partial_sum(c.begin(), c.end(), cdf_.begin());
  } else {
    count_ = view.count;
    value_ = view.value;
  }
}

Paintbox::Paintbox(const SimplexPoint& x) : s1_(x.s1()), s2_(x.s2()) {
  const auto c = x.coords();
  cdf_.resize(c.size());
  std::partial_sum(c.begin(), c.end(), cdf_.begin());
}

std::int64_t Paintbox::color(double u) const {
  if (count_ > 0) {
    const double k = std::floor(u / value_);
    if (k < static_cast<double>(count_)) return static_cast<std::int64_t>(k);
    return kUniqueColor;
  }
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return kUniqueColor;
  return static_cast<std::int64_t>(it - cdf_.begin());
}

ColoringOutcome sample_coloring(const Paintbox& box, int n, const UniformSource& src) {
  if (n < 1) invalid("coloring needs n >= 1");
  ColoringOutcome out;
  out.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.labels[static_cast<std::size_t>(i)] = box.color(src(static_cast<std::uint64_t>(i)));
  std::vector<std::int64_t> sorted;
  for (auto l : out.labels) {
    if (l != kUniqueColor) sorted.push_back(l);
  }
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const int y = static_cast<int>(j - i);
    out.counts.emplace_back(sorted[i], y);
    out.decrement += y - 1;
    i = j;
  }
  return out;
}

ColoringOutcome sample_coloring(const SimplexPoint& x, int n, const UniformSource& src) {
  return sample_coloring(Paintbox(x), n, src);
}

int count_classes(const std::int64_t* labels, std::size_t n, std::vector<std::int64_t>& scratch) {
  scratch.clear();
  int classes = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == kUniqueColor) {
      ++classes;
    } else {
      scratch.push_back(labels[i]);
    }
  }
  std::sort(scratch.begin(), scratch.end());
  for (std::size_t i = 0; i < scratch.size(); ++i) {
    if (i == 0 || scratch[i] != scratch[i - 1]) ++classes;
  }
  return classes;
}

int Trajectory::count_at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return initial_n;
  return counts[static_cast<std::size_t>(it - times.begin()) - 1];
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  char buf[64];
  os << "t,n\n";
  os << "0," << tr.initial_n << "\n";
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", tr.times[i]);
    os << buf << "," << tr.counts[i] << "\n";
  }
}

double default_epsilon(const XiMeasure& m) {
  if (const auto* d = m.as<DyadicFamily>()) return std::ldexp(1.0, -2 * d->levels);
  if (const auto* f = m.as<FiniteAtomic>()) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& a : f->atoms) lo = std::min(lo, a.point.s2());
    return 0.5 * lo;
  }
  if (const auto* l = m.as<LambdaOnUnit>(); l && !l->beta) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& a : l->atoms) lo = std::min(lo, a.x * a.x);
    return 0.5 * lo;
  }
  return 0.0;
}

double truncation_error_bound(const XiMeasure& m, double epsilon, double s, int n) {
  if (!(epsilon > 0.0)) invalid("epsilon must be > 0");
  if (!(s >= 0.0)) invalid("s must be >= 0");
  if (n < 1) invalid("n must be >= 1");
  if (s == 0.0) return 0.0;
  double mass = 0.0;
  if (m.as<Kingman>()) {
    mass = 0.0;
  } else if (const auto* l = m.as<LambdaOnUnit>()) {
    for (const auto& a : l->atoms) {
      if (a.x * a.x <= epsilon) mass += a.weight;
    }
    if (l->beta) {
      const double cut = std::sqrt(epsilon);
      if (cut >= 1.0) {
        mass += l->beta->weight;
      } else {
        mass += l->beta->weight * boost::math::ibeta(l->beta->a, l->beta->b, cut);
      }
    }
  } else {
    for (const auto& v : atom_views(m)) {
      if (v.s2 <= epsilon) mass += v.weight;
    }
  }
  const double bound = s * choose2(static_cast<double>(n)) * mass;
  return std::clamp(bound, 0.0, 1.0);
}

PaintboxEvents::PaintboxEvents(const XiMeasure& m, double epsilon, double horizon, std::uint64_t seed,
                               const SimulationBudget& budget)
    : horizon_(horizon), seed_(seed) {
  if (!(epsilon >= 0.0)) invalid("epsilon must be >= 0");
  const auto views = atom_views(m);
  for (std::size_t j = 0; j < views.size(); ++j) {
    if (!(views[j].s2 > epsilon)) continue;
    boxes_.emplace_back(views[j]);
    index_.push_back(static_cast<std::uint32_t>(j));
    rate_.push_back(views[j].weight / views[j].s2);
    total_rate_ += rate_.back();
  }
  if (total_rate_ * horizon > budget.max_expected_rings) {
    throw Error(ErrorKind::RateOverflow, "expected number of clock rings " +
                                             std::to_string(total_rate_ * horizon) + " exceeds budget");
  }
  next_time_.assign(boxes_.size(), 0.0);
  next_ring_.assign(boxes_.size(), 0);
  for (std::size_t s = 0; s < boxes_.size(); ++s) {
    schedule(s);
    heap_.push_back(s);
  }
  auto later = [this](std::size_t a, std::size_t b) {
    return next_time_[a] > next_time_[b] || (next_time_[a] == next_time_[b] && a > b);
  };
  std::make_heap(heap_.begin(), heap_.end(), later);
}

void PaintboxEvents::schedule(std::size_t s) {
  const double u = stream_uniform(seed_, atom_stream(index_[s], StreamPurpose::Clock), next_ring_[s], 0);
  next_time_[s] += exponential_from_uniform(u, rate_[s]);
}

bool PaintboxEvents::next(Ring& out) {
  if (heap_.empty()) return false;
  auto later = [this](std::size_t a, std::size_t b) {
    return next_time_[a] > next_time_[b] || (next_time_[a] == next_time_[b] && a > b);
  };
  const std::size_t s = heap_.front();
  if (next_time_[s] > horizon_) return false;
  out = {next_time_[s], s, next_ring_[s]};
  std::pop_heap(heap_.begin(), heap_.end(), later);
  ++next_ring_[s];
  schedule(s);
  std::push_heap(heap_.begin(), heap_.end(), later);
  return true;
}

UniformSource PaintboxEvents::colors(const Ring& r) const {
  return {seed_, atom_stream(index_[r.slot], StreamPurpose::Coloring), r.ring};
}

UniformSource PaintboxEvents::flips(const Ring& r) const {
  return {seed_, atom_stream(index_[r.slot], StreamPurpose::Flip), r.ring};
}

namespace {

Trajectory simulate_kingman(double a, int n0, double horizon, std::uint64_t seed) {
  Trajectory tr = empty_trajectory(n0, horizon, 0.0, seed);
  double t = 0.0;
  int b = n0;
  for (std::uint64_t ev = 0; b > 1; ++ev) {
    const double u = stream_uniform(seed, kingman_stream(StreamPurpose::Clock), ev, 0);
    t += exponential_from_uniform(u, kingman_rate(a, b));
    if (t > horizon) break;
    --b;
    tr.times.push_back(t);
    tr.counts.push_back(b);
  }
  return tr;
}

void labels_into(const Paintbox& box, const UniformSource& src, int n, std::vector<std::int64_t>& labels) {
  labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = box.color(src(static_cast<std::uint64_t>(i)));
}

}  // namespace

Trajectory simulate_block_count(const XiMeasure& m, int n0, double horizon, double epsilon,
                                std::uint64_t seed, const SimulationBudget& budget) {
  check_common(n0, horizon);
  if (const auto* k = m.as<Kingman>()) return simulate_kingman(k->a, n0, horizon, seed);
  if (const auto* l = m.as<LambdaOnUnit>()) {
    Trajectory tr = simulate_lambda_chain(*l, n0, horizon, seed);
    tr.truncation_epsilon = epsilon;
    return tr;
  }
  Trajectory tr = empty_trajectory(n0, horizon, epsilon, seed);
  PaintboxEvents events(m, epsilon, horizon, seed, budget);
  std::vector<std::int64_t> labels, scratch;
  int b = n0;
  PaintboxEvents::Ring ring{};
  while (b > 1 && events.next(ring)) {
    labels_into(events.box(ring.slot), events.colors(ring), b, labels);
    const int nb = count_classes(labels.data(), labels.size(), scratch);
    if (nb == b) {
      ++tr.null_events;
      continue;
    }
    b = nb;
    tr.times.push_back(ring.time);
    tr.counts.push_back(b);
  }
  return tr;
}

LambdaChainTable::LambdaChainTable(const LambdaOnUnit& l, int n_max) : lambda_(l), n_max_(n_max) {
  if (n_max < 2) invalid("lambda chain table needs n_max >= 2");
  const int cached = std::min(n_max, kLambdaCacheLimit);
  rows_.resize(static_cast<std::size_t>(cached) + 1);
  for (int b = 2; b <= cached; ++b) rows_[static_cast<std::size_t>(b)] = build_row(b);
  totals_.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (int b = 2; b <= cached; ++b) totals_[static_cast<std::size_t>(b)] = rows_[static_cast<std::size_t>(b)].total;
  for (int b = cached; b < n_max; ++b) {
    // int (1-x)^{b-1} Lambda(dx) per component.
    double inc = 0.0;
    for (const auto& a : lambda_.atoms) inc += a.weight * std::pow(1.0 - a.x, b - 1);
    if (lambda_.beta) {
      const auto& be = *lambda_.beta;
      inc += be.weight * std::exp(std::lgamma(be.b + b - 1) - std::lgamma(be.a + be.b + b - 1) -
                                  std::lgamma(be.b) + std::lgamma(be.a + be.b));
    }
    totals_[static_cast<std::size_t>(b) + 1] = totals_[static_cast<std::size_t>(b)] + b * inc;
  }
}

double LambdaChainTable::term(int b, int k) const { return std::exp(log_choose(b, k) + log_lambda_rate(lambda_, b, k)); }

LambdaChainTable::Row LambdaChainTable::build_row(int b) const {
  Row r;
  std::vector<double> logs(static_cast<std::size_t>(b - 1));
  double top = -std::numeric_limits<double>::infinity();
  for (int k = 2; k <= b; ++k) {
    const double lr = log_choose(b, k) + log_lambda_rate(lambda_, b, k);
    logs[static_cast<std::size_t>(k - 2)] = lr;
    top = std::max(top, lr);
  }
  if (!std::isfinite(top)) throw Error(ErrorKind::Overflow, "lambda chain has no positive rate");
  r.cdf.resize(logs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    acc += std::exp(logs[i] - top);
    r.cdf[i] = acc;
  }
  for (double& c : r.cdf) c /= acc;
  r.cdf.back() = 1.0;
  r.total = std::exp(top + std::log(acc));
  return r;
}

const LambdaChainTable::Row& LambdaChainTable::row(int b, Row& scratch) const {
  if (b < 2) invalid("lambda chain row needs b >= 2");
  if (static_cast<std::size_t>(b) < rows_.size()) return rows_[static_cast<std::size_t>(b)];
  scratch = build_row(b);
  return scratch;
}

double LambdaChainTable::total_rate(int b) const {
  if (b < 2) invalid("lambda chain row needs b >= 2");
  if (b <= n_max_) return totals_[static_cast<std::size_t>(b)];
  Row scratch;
  return row(b, scratch).total;
}

int LambdaChainTable::sample_k(int b, double u) const {
  if (b < 2) invalid("lambda chain row needs b >= 2");
  if (static_cast<std::size_t>(b) < rows_.size() || b > n_max_) {
    Row scratch;
    const Row& r = row(b, scratch);
    auto it = std::upper_bound(r.cdf.begin(), r.cdf.end(), u);
    if (it == r.cdf.end()) --it;
    return static_cast<int>(it - r.cdf.begin()) + 2;
  }
  const double target = u * totals_[static_cast<std::size_t>(b)];
  double acc = 0.0;
  for (int k = 2; k < b; ++k) {
    acc += term(b, k);
    if (acc > target) return k;
  }
  return b;
}

double LambdaChainTable::probability(int b, int k) const {
  if (b < 2) invalid("lambda chain row needs b >= 2");
  if (k < 2 || k > b) return 0.0;
  if (static_cast<std::size_t>(b) < rows_.size() || b > n_max_) {
    Row scratch;
    const Row& r = row(b, scratch);
    const std::size_t i = static_cast<std::size_t>(k - 2);
    return r.cdf[i] - (i == 0 ? 0.0 : r.cdf[i - 1]);
  }
  return term(b, k) / totals_[static_cast<std::size_t>(b)];
}

namespace {

// Shared by the count and partition simulators: yields (time, k) events.
template <class OnEvent>
void run_lambda_chain(const LambdaChainTable& table, int n0, double horizon, std::uint64_t seed,
                      OnEvent&& on_event) {
  double t = 0.0;
  int b = n0;
  const std::uint32_t clock = lambda_stream(StreamPurpose::Clock);
  for (std::uint64_t ev = 0; b > 1; ++ev) {
    const double rate = table.total_rate(b);
    t += exponential_from_uniform(stream_uniform(seed, clock, ev, 0), rate);
    if (t > horizon) break;
    const int k = table.sample_k(b, stream_uniform(seed, clock, ev, 1));
    b -= k - 1;
    on_event(t, ev, b, k);
  }
}

}  // namespace

Trajectory simulate_lambda_chain(const LambdaChainTable& table, int n0, double horizon, std::uint64_t seed) {
  check_common(n0, horizon);
  Trajectory tr = empty_trajectory(n0, horizon, 0.0, seed);
  run_lambda_chain(table, n0, horizon, seed, [&](double t, std::uint64_t, int b, int) {
    tr.times.push_back(t);
    tr.counts.push_back(b);
  });
  return tr;
}

Trajectory simulate_lambda_chain(const LambdaOnUnit& l, int n0, double horizon, std::uint64_t seed) {
  check_common(n0, horizon);
  return simulate_lambda_chain(LambdaChainTable(l, n0), n0, horizon, seed);
}

namespace {

PartitionState singletons(int n) {
  PartitionState p;
  for (int i = 1; i <= n; ++i) p.blocks.push_back({i});
  return p;
}

// Merges blocks at the given positions (sorted ascending) into one.
void merge_positions(PartitionState& p, const std::vector<std::size_t>& pos) {
  if (pos.size() < 2) return;
  std::vector<int> merged;
  for (std::size_t i : pos) merged.insert(merged.end(), p.blocks[i].begin(), p.blocks[i].end());
  std::sort(merged.begin(), merged.end());
  for (std::size_t k = pos.size(); k-- > 0;) p.blocks.erase(p.blocks.begin() + static_cast<std::ptrdiff_t>(pos[k]));
  auto it = std::lower_bound(p.blocks.begin(), p.blocks.end(), merged,
                             [](const std::vector<int>& a, const std::vector<int>& b) { return a.front() < b.front(); });
  p.blocks.insert(it, std::move(merged));
}

// Merges equal-colored positions; labels indexed by block position.
void apply_coloring(PartitionState& p, const std::vector<std::int64_t>& labels) {
  std::vector<std::pair<std::int64_t, std::size_t>> tagged;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kUniqueColor) tagged.emplace_back(labels[i], i);
  }
  std::sort(tagged.begin(), tagged.end());
  std::vector<std::vector<int>> next;
  std::vector<bool> used(p.blocks.size(), false);
  for (std::size_t i = 0; i < tagged.size();) {
    std::size_t j = i;
    std::vector<int> merged;
    while (j < tagged.size() && tagged[j].first == tagged[i].first) {
      const auto& blk = p.blocks[tagged[j].second];
      merged.insert(merged.end(), blk.begin(), blk.end());
      used[tagged[j].second] = true;
      ++j;
    }
    std::sort(merged.begin(), merged.end());
    next.push_back(std::move(merged));
    i = j;
  }
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    if (!used[i]) next.push_back(std::move(p.blocks[i]));
  }
  std::sort(next.begin(), next.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  p.blocks = std::move(next);
}

}  // namespace

std::vector<std::pair<double, PartitionState>> simulate_partition(const XiMeasure& m, int n0, double horizon,
                                                                  double epsilon, std::uint64_t seed) {
  check_common(n0, horizon);
  if (n0 > kMaxPartitionBlocks) invalid("partition simulation supports n0 <= 256");
  std::vector<std::pair<double, PartitionState>> out;
  PartitionState state = singletons(n0);
  out.emplace_back(0.0, state);
  if (const auto* k = m.as<Kingman>()) {
    double t = 0.0;
    for (std::uint64_t ev = 0; state.blocks.size() > 1; ++ev) {
      const int b = static_cast<int>(state.blocks.size());
      t += exponential_from_uniform(stream_uniform(seed, kingman_stream(StreamPurpose::Clock), ev, 0),
                                    kingman_rate(k->a, b));
      if (t > horizon) break;
      const std::uint32_t ch = kingman_stream(StreamPurpose::Choice);
      std::size_t i = static_cast<std::size_t>(std::floor(stream_uniform(seed, ch, ev, 0) * b));
      std::size_t j = static_cast<std::size_t>(std::floor(stream_uniform(seed, ch, ev, 1) * (b - 1)));
      i = std::min<std::size_t>(i, static_cast<std::size_t>(b - 1));
      j = std::min<std::size_t>(j, static_cast<std::size_t>(b - 2));
      if (j >= i) ++j;
      merge_positions(state, {std::min(i, j), std::max(i, j)});
      out.emplace_back(t, state);
    }
    return out;
  }
  if (const auto* l = m.as<LambdaOnUnit>()) {
    const LambdaChainTable table(*l, n0);
    const std::uint32_t ch = lambda_stream(StreamPurpose::Choice);
    run_lambda_chain(table, n0, horizon, seed, [&](double t, std::uint64_t ev, int, int k) {
      // Uniform k-subset by partial Fisher-Yates over positions.
      const std::size_t b = state.blocks.size();
      std::vector<std::size_t> idx(b);
      std::iota(idx.begin(), idx.end(), 0);
      for (int r = 0; r < k; ++r) {
        const std::size_t span = b - static_cast<std::size_t>(r);
        std::size_t pick = static_cast<std::size_t>(std::floor(stream_uniform(seed, ch, ev, static_cast<std::uint64_t>(r)) *
                                                                static_cast<double>(span)));
        pick = std::min(pick, span - 1);
        std::swap(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(r) + pick]);
      }
      std::vector<std::size_t> pos(idx.begin(), idx.begin() + k);
      std::sort(pos.begin(), pos.end());
      merge_positions(state, pos);
      out.emplace_back(t, state);
    });
    return out;
  }
  PaintboxEvents events(m, epsilon, horizon, seed);
  std::vector<std::int64_t> labels, scratch;
  PaintboxEvents::Ring ring{};
  while (state.blocks.size() > 1 && events.next(ring)) {
    const int b = static_cast<int>(state.blocks.size());
    labels_into(events.box(ring.slot), events.colors(ring), b, labels);
    if (count_classes(labels.data(), labels.size(), scratch) == b) continue;
    apply_coloring(state, labels);
    out.emplace_back(ring.time, state);
  }
  return out;
}

}  // namespace xicoal
