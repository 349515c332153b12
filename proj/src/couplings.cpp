#include "xicoal/couplings.hpp"

#include <algorithm>
#include <cstdio>

#include "xicoal/error.hpp"

namespace xicoal {

const char* to_string(CouplingKind k) {
  switch (k) {
    case CouplingKind::Reduction: return "reduction";
    case CouplingKind::Joining: return "joining";
  }
  return "?";
}

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::ValidationError, msg); }

[[noreturn]] void violation(const std::string& what, std::uint64_t seed, double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", t);
  throw Error(ErrorKind::CouplingViolation,
              what + " at t=" + buf + " (seed " + std::to_string(seed) + ")");
}

Trajectory blank(int n0, double horizon, double epsilon, std::uint64_t seed) {
  Trajectory tr;
  tr.initial_n = n0;
  tr.horizon = horizon;
  tr.truncation_epsilon = epsilon;
  tr.seed = seed;
  return tr;
}

void record(Trajectory& tr, int& current, int next, double t) {
  if (next != current) {
    current = next;
    tr.times.push_back(t);
    tr.counts.push_back(next);
  }
}

CoupledTriple run_coupled(const XiMeasure& m, double delta, bool with_reduction, bool with_joining, int n0,
                          double horizon, std::uint64_t seed, std::optional<double> epsilon) {
  if (!m.as<FiniteAtomic>() && !m.as<DyadicFamily>()) {
    throw Error(ErrorKind::UnsupportedMeasure, "couplings need a finite atomic or dyadic measure");
  }
  if (n0 < 2) invalid("coupling needs n0 >= 2");
  if (!(horizon >= 0.0)) invalid("horizon must be >= 0");
  if (!(delta >= 0.0 && delta < 1.0)) invalid("delta must lie in [0, 1)");
  const double eps = epsilon.value_or(default_epsilon(m));
  CoupledTriple out;
  out.delta = delta;
  out.shared_seed = seed;
  out.base = blank(n0, horizon, eps, seed);
  out.reduction = blank(n0, horizon, eps, seed);
  out.joining = blank(n0, horizon, eps, seed);

  PaintboxEvents events(m, eps, horizon, seed);
  int b = n0, r = with_reduction ? n0 : 1, j = with_joining ? n0 : 1;
  std::vector<std::int64_t> labels, scratch;
  PaintboxEvents::Ring ring{};
  while ((b > 1 || r > 1) && events.next(ring)) {
    const int width = std::max(b, r);
    const Paintbox& box = events.box(ring.slot);
    const UniformSource colors = events.colors(ring);
    labels.resize(static_cast<std::size_t>(width));
    for (int i = 0; i < width; ++i) labels[static_cast<std::size_t>(i)] = box.color(colors(static_cast<std::uint64_t>(i)));

    const int nb = b > 1 ? count_classes(labels.data(), static_cast<std::size_t>(b), scratch) : 1;
    if (b > 1 && nb == b) ++out.base.null_events;

    int nj = j;
    if (with_joining && j > 1) {
      int uniques = 0;
      bool any = false;
      for (int i = 0; i < j; ++i) {
        if (labels[static_cast<std::size_t>(i)] == kUniqueColor) {
          ++uniques;
        } else {
          any = true;
        }
      }
      nj = uniques + (any ? 1 : 0);
    }

    int nr = r;
    if (with_reduction && r > 1) {
      const UniformSource flips = events.flips(ring);
      for (int i = 0; i < r; ++i) {
        if (delta > 0.0 && flips(static_cast<std::uint64_t>(i)) < delta) labels[static_cast<std::size_t>(i)] = kUniqueColor;
      }
      nr = count_classes(labels.data(), static_cast<std::size_t>(r), scratch);
      if (nr == r) ++out.reduction.null_events;
    }

    record(out.base, b, nb, ring.time);
    if (with_reduction) {
      record(out.reduction, r, nr, ring.time);
      if (r < b) violation("reduction count below base count", seed, ring.time);
    }
    if (with_joining) {
      record(out.joining, j, nj, ring.time);
      if (j > b) violation("joining count above base count", seed, ring.time);
    }
  }
  return out;
}

}  // namespace

CoupledPair simulate_reduction_coupling(const XiMeasure& m, double delta, int n0, double horizon,
                                        std::uint64_t seed, std::optional<double> epsilon) {
  CoupledTriple t = run_coupled(m, delta, true, false, n0, horizon, seed, epsilon);
  return {std::move(t.base), std::move(t.reduction), CouplingKind::Reduction, delta, seed};
}

CoupledPair simulate_joining_coupling(const XiMeasure& m, int n0, double horizon, std::uint64_t seed,
                                      std::optional<double> epsilon) {
  CoupledTriple t = run_coupled(m, 0.0, false, true, n0, horizon, seed, epsilon);
  return {std::move(t.base), std::move(t.joining), CouplingKind::Joining, 0.0, seed};
}

CoupledTriple simulate_sandwich(const XiMeasure& m, double delta, int n0, double horizon, std::uint64_t seed,
                                std::optional<double> epsilon) {
  return run_coupled(m, delta, true, true, n0, horizon, seed, epsilon);
}

void write_paired_csv(std::ostream& os, const CoupledPair& pair, const std::vector<double>& grid) {
  char buf[64];
  os << "t,n_base,n_derived\n";
  for (double t : grid) {
    std::snprintf(buf, sizeof buf, "%.17g", t);
    os << buf << "," << pair.base.count_at(t) << "," << pair.derived.count_at(t) << "\n";
  }
}

}  // namespace xicoal
