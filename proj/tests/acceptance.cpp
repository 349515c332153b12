// One PASS/FAIL line per acceptance criterion; exit status 1 on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "xicoal/couplings.hpp"
#include "xicoal/error.hpp"
#include "xicoal/experiments.hpp"
#include "xicoal/numerics.hpp"
#include "xicoal/rates.hpp"
#include "xicoal/simulate.hpp"
#include "xicoal/speed.hpp"
#include "xicoal/stats.hpp"

using namespace xicoal;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::mt19937_64& rng() {
  static std::mt19937_64 g(20240611);
  return g;
}

double unif(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }
double log_unif(double lo, double hi) { return std::exp(unif(std::log(lo), std::log(hi))); }
int unif_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng()); }

// Point with 1..5 coordinates and total mass in (0, 1).
std::vector<double> random_coords() {
  const int k = unif_int(1, 5);
  std::vector<double> e(static_cast<std::size_t>(k) + 1);
  double s = 0.0;
  for (double& v : e) {
    v = -std::log(unif(1e-300, 1.0));
    s += v;
  }
  std::vector<double> x;
  for (int i = 0; i < k; ++i) x.push_back(e[static_cast<std::size_t>(i)] / s);
  return x;
}

XiMeasure random_atomic_probability() {
  const int atoms = unif_int(1, 5);
  std::vector<WeightedPoint> pts;
  for (int i = 0; i < atoms; ++i) pts.push_back({unif(0.1, 2.0), make_simplex_point(random_coords())});
  return XiMeasure::finite_atomic(pts).normalized();
}

Outcome scaling_identity() {
  Outcome o;
  for (int i = 0; i < 10; ++i) {
    const XiMeasure m = random_atomic_probability();
    const double c = collision_rate(m, make_pattern(2, {2}));
    const double g = gamma_rate(m, 2);
    o.require(std::fabs(c - 1.0) <= 1e-9, "lambda_{2;2} = " + fmt(c) + " for " + m.describe());
    o.require(std::fabs(g - 1.0) <= 1e-9, "gamma_2 = " + fmt(g) + " for " + m.describe());
  }
  return o;
}

Outcome gamma_equivalence() {
  Outcome o;
  for (int i = 0; i < 10; ++i) {
    const XiMeasure m = random_atomic_probability();
    for (int b = 2; b <= 6; ++b) {
      const double g = gamma_rate(m, b);
      const double h = gamma_via_mergers(m, b);
      o.require(std::fabs(g - h) <= 1e-9 * std::fabs(g), "b=" + std::to_string(b) + ": " + fmt(g) + " vs " + fmt(h));
    }
  }
  return o;
}

std::vector<XiMeasure> family_instances() {
  return {XiMeasure::kingman(1.0),
          XiMeasure::finite_atomic({{1.0, make_simplex_point({0.5})}}),
          XiMeasure::finite_atomic({{1.0, make_simplex_point({0.5, 0.25})}, {2.0, make_simplex_point({0.3, 0.3, 0.3})}})
              .normalized(),
          XiMeasure::finite_atomic({{1.0, make_simplex_point({0.6, 0.3})}}),
          XiMeasure::lambda({{1.0, 0.4}}),
          XiMeasure::lambda({}, BetaComponent{0.5, 1.5, 1.0}),
          XiMeasure::lambda({}, BetaComponent{1.0, 1.0, 1.0}),
          XiMeasure::lambda({{0.3, 0.9}, {0.2, 0.05}}, BetaComponent{0.2, 2.5, 0.5}).normalized(),
          XiMeasure::dyadic(DyadicRule::InverseSquare, 40).normalized(),
          XiMeasure::dyadic(DyadicRule::Full, 40).normalized()};
}

Outcome psi_properties() {
  Outcome o;
  std::vector<double> q;
  for (int i = 0; i < 60; ++i) q.push_back(std::pow(10.0, -3.0 + 9.0 * i / 59.0));
  for (const XiMeasure& m : family_instances()) {
    const std::string name = m.describe();
    std::vector<double> p;
    for (double x : q) p.push_back(psi(m, x));
    for (std::size_t i = 0; i < q.size(); ++i) {
      o.require(p[i] <= q[i] * q[i] / 2.0 * (1.0 + 1e-12), name + ": psi > q^2/2 at q=" + fmt(q[i]));
      if (i == 0) continue;
      o.require(p[i] > p[i - 1], name + ": not increasing at q=" + fmt(q[i]));
      o.require(p[i] / q[i] > p[i - 1] / q[i - 1], name + ": psi/q not increasing at q=" + fmt(q[i]));
      if (i + 1 < q.size()) {
        const double s0 = (p[i] - p[i - 1]) / (q[i] - q[i - 1]);
        const double s1 = (p[i + 1] - p[i]) / (q[i + 1] - q[i]);
        o.require(s1 >= s0 * (1.0 - 1e-9), name + ": not convex at q=" + fmt(q[i]));
      }
    }
    const double r = p[0] / (q[0] * q[0] / 2.0);
    o.require(r >= 0.99 && r <= 1.0 + 1e-12, name + ": psi/(q^2/2) = " + fmt(r) + " at q=1e-3");
  }
  return o;
}

Outcome kingman_speed() {
  Outcome o;
  const XiMeasure k = XiMeasure::kingman(1.0);
  const SpeedTable table = build_speed_table(k);
  for (int i = 0; i <= 40; ++i) {
    const double t = std::pow(10.0, -4.0 + 4.0 * i / 40.0);
    const double r = v_of(table, t).value * t / 2.0;
    o.require(std::fabs(r - 1.0) <= 1e-3, "v(t) t/2 = " + fmt(r) + " at t=" + fmt(t));
  }
  for (int n : {100, 10000}) {
    for (double s : {0.01, 0.1}) {
      const double exact = n / (1.0 + n * s / 2.0);
      const double got = v_n(k, n, s).value;
      o.require(std::fabs(got / exact - 1.0) <= 1e-6, "v^n mismatch n=" + std::to_string(n) + " s=" + fmt(s));
    }
  }
  return o;
}

Outcome small_time_ratio() {
  Outcome o;
  const json kingman = {{"experiment", "verify_speed"},
                        {"measure", {{"type", "kingman"}, {"a", 1.0}}},
                        {"n0_list", {10000}},
                        {"time_grid", {0.005, 0.01, 0.02, 0.05}},
                        {"replicates", 200},
                        {"master_seed", 1},
                        {"workers", 8}};
  for (const auto& c : run_verify_speed(config_from_json(kingman)).cells) {
    o.require(c.mean >= 0.95 && c.mean <= 1.05, "Kingman mean ratio " + fmt(c.mean) + " at t=" + fmt(c.t));
  }
  const json beta = {{"experiment", "verify_speed"},
                     {"measure", {{"type", "lambda"}, {"beta", {{"a", 0.5}, {"b", 1.5}, {"w", 1.0}}}}},
                     {"n0_list", {1000}},
                     {"time_grid", {0.01}},
                     {"replicates", 100},
                     {"master_seed", 2},
                     {"workers", 8}};
  const auto cell = run_verify_speed(config_from_json(beta)).cells.at(0);
  o.require(cell.mean >= 0.9 && cell.mean <= 1.1, "Beta mean ratio " + fmt(cell.mean));
  return o;
}

Outcome coloring_oracle() {
  Outcome o;
  const int samples = 100000;
  for (const auto& xv : std::vector<std::vector<double>>{{0.5}, {0.5, 0.25}, {0.3, 0.3, 0.3}}) {
    const SimplexPoint x = make_simplex_point(xv);
    for (int n = 2; n <= 6; ++n) {
      const auto exact = oracle::decrement_distribution(xv, n);
      const double r = collision_probability(x, n);
      o.require(std::fabs((1.0 - exact.at(0)) - r) <= 1e-12, "enumerated P(D>0) differs from collision_probability");
      std::map<int, int> hist;
      for (int i = 0; i < samples; ++i) {
        ++hist[sample_coloring(x, n, {99, static_cast<std::uint32_t>(n), static_cast<std::uint64_t>(i)}).decrement];
      }
      for (const auto& [d, c] : hist) o.require(exact.count(d) == 1, "impossible decrement sampled");
      for (const auto& [d, p] : exact) {
        const double f = hist[d] / static_cast<double>(samples);
        const double se = std::sqrt(std::max(0.0, p * (1.0 - p)) / samples);
        o.require(std::fabs(f - p) <= 4.0 * se + 1e-12,
                  "n=" + std::to_string(n) + " d=" + std::to_string(d) + ": " + fmt(f) + " vs " + fmt(p));
      }
      const double f = 1.0 - hist[0] / static_cast<double>(samples);
      o.require(std::fabs(f - r) <= 4.0 * std::sqrt(r * (1.0 - r) / samples) + 1e-12, "sampled P(D>0) off");
    }
  }
  return o;
}

Outcome sandwich() {
  Outcome o;
  const XiMeasure m = XiMeasure::finite_atomic({{1.0, make_simplex_point({0.5, 0.25})}});
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    try {
      const CoupledTriple t = simulate_sandwich(m, 0.3, 200, 1.0, seed);
      std::vector<double> times = {0.0};
      for (const auto* tr : {&t.base, &t.reduction, &t.joining}) times.insert(times.end(), tr->times.begin(), tr->times.end());
      for (double s : times) {
        o.require(t.joining.count_at(s) <= t.base.count_at(s) && t.base.count_at(s) <= t.reduction.count_at(s),
                  "violation at seed " + std::to_string(seed) + " t=" + fmt(s));
      }
    } catch (const Error& e) {
      o.require(false, e.what());
    }
  }
  return o;
}

Outcome reduction_law() {
  Outcome o;
  const XiMeasure m = XiMeasure::finite_atomic({{1.0, make_simplex_point({0.5, 0.25})}});
  const XiMeasure reduced = reduce_measure(m, 0.3);
  std::vector<double> coupled, direct;
  for (std::uint64_t r = 0; r < 1000; ++r) {
    coupled.push_back(simulate_reduction_coupling(m, 0.3, 100, 0.1, derive_seed(8, 1, r)).derived.count_at(0.1));
    direct.push_back(simulate_block_count(reduced, 100, 0.1, default_epsilon(reduced), derive_seed(8, 2, r)).count_at(0.1));
  }
  const KsResult ks = ks_two_sample(coupled, direct);
  o.require(ks.p_value >= 1e-3, "KS rejects: D=" + fmt(ks.statistic) + " p=" + fmt(ks.p_value));
  o.detail = o.pass ? "D=" + fmt(ks.statistic) + " p=" + fmt(ks.p_value) : o.detail;
  return o;
}

Outcome dyadic_suite() {
  Outcome o;
  const XiMeasure inv = XiMeasure::dyadic(DyadicRule::InverseSquare, 40);
  const XiMeasure full = XiMeasure::dyadic(DyadicRule::Full, 40);
  for (double q : {1.0, 10.0, 100.0}) {
    const double a = psi(inv, q), b = psi(full, q);
    o.require(std::fabs(a - b) <= 1e-10 * std::max(1.0, std::fabs(a)), "psi differs at q=" + fmt(q));
  }
  const RegularityVerdict ri = regularity_integral(inv, 40);
  const auto& si = ri.partial_sums;
  o.require(ri.classification == RegularityClass::Regular, "inverse_square regularity not Regular");
  double direct = 0.0;
  for (int n = 1; n <= 40; ++n) direct += static_cast<double>(dyadic_count(DyadicRule::InverseSquare, n)) * std::ldexp(1.0, -n);
  o.require(!si.empty() && std::fabs(si.back() - direct) <= 1e-12 * direct, "inverse_square partial sum off");
  o.require(ri.decay_exponent > 1.0, "inverse_square increments decay exponent " + fmt(ri.decay_exponent));
  const RegularityVerdict rf = regularity_integral(full, 40);
  const auto& sf = rf.partial_sums;
  o.require(rf.classification == RegularityClass::NonRegularDiverging, "full regularity not NonRegularDiverging");
  if (sf.size() >= 3) {
    const double last = sf.back() - sf[sf.size() - 2];
    const double prev = sf[sf.size() - 2] - sf[sf.size() - 3];
    o.require(last / prev > 0.9, "full increments ratio " + fmt(last / prev));
  } else {
    o.require(false, "too few partial sums");
  }
  o.require(classify_cdi(inv).classification == CdiClass::DoesNotComeDown, "inverse_square not DoesNotComeDown");
  const CdiVerdict vf = classify_cdi(full);
  o.require(vf.classification == CdiClass::Inconclusive && !vf.note.empty(), "full not Inconclusive with note");
  return o;
}

Outcome bound_suite() {
  Outcome o;
  const int cases = 1000;
  const std::vector<int> bgrid = {16, 32, 64, 128, 256, 1024, 4096, 65536};
  for (int i = 0; i < cases; ++i) {
    const double b = bgrid[static_cast<std::size_t>(unif_int(0, static_cast<int>(bgrid.size()) - 1))];
    const double x = log_unif(1e-6, 0.999);
    const double e = std::exp(-b * x), p = std::exp(b * std::log1p(-x));
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * e;
    o.require(e - p >= -slack && e - p <= b * x * x + slack, "easy bound fails b=" + fmt(b) + " x=" + fmt(x));
  }
  for (int i = 0; i < cases; ++i) {
    const SimplexPoint x = make_simplex_point(random_coords());
    const int n = unif_int(2, 60);
    o.require(collision_probability(x, n) <= choose2(n) * x.s2() * (1.0 + 1e-12), "R_x(n) bound fails");
  }
  for (int i = 0; i < cases; ++i) {
    const auto xv = random_coords();
    double s1 = 0.0;
    for (double v : xv) s1 += v;
    const double q = log_unif(1e-3, 1e6);
    const double mid = phi_exp(q * s1);
    const double lo = s1 * s1 * std::min(q * q, q) / 10.0, hi = s1 * s1 * q * q / 2.0;
    o.require(lo <= mid && mid <= hi * (1.0 + 1e-12), "sandwich on psi integrand fails q=" + fmt(q));
  }
  for (int i = 0; i < cases; ++i) {
    const XiMeasure m = random_atomic_probability();
    const int b = unif_int(2, 2000);
    o.require(std::fabs(gamma_rate(m, b) - psi(m, b)) <= b, "|gamma_b - psi(b)| > b at b=" + std::to_string(b));
  }
  // Ten random probability Lambda measures with a Beta part, one hundred times each.
  for (int i = 0; i < 10; ++i) {
    std::vector<LambdaAtom> atoms;
    for (int k = unif_int(0, 2); k > 0; --k) atoms.push_back({unif(0.05, 0.5), unif(0.01, 1.0)});
    const XiMeasure m = XiMeasure::lambda(atoms, BetaComponent{unif(0.1, 0.9), unif(0.5, 3.0), 1.0}).normalized();
    const SpeedTable table = build_speed_table(m);
    for (int j = 0; j < cases / 10; ++j) {
      const double t = log_unif(1e-3, 1.0);
      const double v = v_of(table, t).value;
      o.require(v >= 2.0 / t * (1.0 - 1e-9), "v(t) < 2/t for " + m.describe() + " at t=" + fmt(t));
    }
  }
  return o;
}

std::string run_config_bytes(json c, int workers) {
  c["workers"] = workers;
  const ExperimentConfig cfg = config_from_json(c);
  std::ostringstream csv;
  std::string js;
  switch (cfg.experiment) {
    case ExperimentKind::VerifySpeed: {
      const RatioReport r = run_verify_speed(cfg);
      write_ratio_csv(csv, r);
      for (const auto& [n0, nulls] : r.null_event_counts) {
        (void)nulls;
        write_plot_csv(csv, r, n0);
      }
      js = dump_json(to_json(r));
      break;
    }
    case ExperimentKind::CdiScan: {
      const CdiScanReport r = run_cdi_scan(cfg);
      write_cdi_csv(csv, r);
      js = dump_json(to_json(r));
      break;
    }
    case ExperimentKind::CouplingCheck: {
      const CouplingReport r = run_coupling_check(cfg);
      write_coupling_csv(csv, r);
      js = dump_json(to_json(r));
      break;
    }
  }
  return csv.str() + js;
}

Outcome determinism() {
  Outcome o;
  const std::vector<json> configs = {
      {{"experiment", "verify_speed"},
       {"measure", {{"type", "lambda"}, {"beta", {{"a", 0.5}, {"b", 1.5}, {"w", 1.0}}}}},
       {"n0_list", {300, 1000}},
       {"time_grid", {0.01, 0.05}},
       {"replicates", 64},
       {"master_seed", 5}},
      {{"experiment", "verify_speed"},
       {"measure", {{"type", "finite_atomic"}, {"atoms", {{{"w", 1.0}, {"x", {0.5, 0.25}}}}}}},
       {"override_non_cdi", true},
       {"n0_list", {500}},
       {"time_grid", {0.1, 1.0}},
       {"replicates", 64},
       {"master_seed", 6}},
      {{"experiment", "coupling_check"},
       {"measure", {{"type", "finite_atomic"}, {"atoms", {{{"w", 1.0}, {"x", {0.5, 0.25}}}}}}},
       {"n0_list", {100}},
       {"replicates", 100},
       {"master_seed", 7}},
      {{"experiment", "cdi_scan"},
       {"measures", {{{"type", "kingman"}, {"a", 1.0}}, {{"type", "dyadic"}, {"f", "full"}, {"levels", 40}}}}}};
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const std::string ref = run_config_bytes(configs[i], 1);
    o.require(run_config_bytes(configs[i], 1) == ref, "config " + std::to_string(i) + ": repeat differs (1 worker)");
    o.require(run_config_bytes(configs[i], 8) == ref, "config " + std::to_string(i) + ": 8 workers differ");
    o.require(run_config_bytes(configs[i], 8) == ref, "config " + std::to_string(i) + ": repeat differs (8 workers)");
  }
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "scaling identity", 1.0, scaling_identity},
      {2, "gamma two-way equivalence", 10.0, gamma_equivalence},
      {3, "psi analytic properties", 5.0, psi_properties},
      {4, "Kingman speed exact", 5.0, kingman_speed},
      {5, "small-time ratio reproduction", 600.0, small_time_ratio},
      {6, "coloring oracle", 120.0, coloring_oracle},
      {7, "coupling sandwich", 120.0, sandwich},
      {8, "reduction law", 300.0, reduction_law},
      {9, "dyadic family", 10.0, dyadic_suite},
      {10, "bound suite", 30.0, bound_suite},
      {11, "determinism", 120.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_seconds) {
      o.pass = false;
      o.detail += (o.detail.empty() ? "" : "; ") + std::string("runtime over budget ") + fmt(c.budget_seconds) + " s";
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %2d %-32s %9.3f s%s%s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                o.detail.empty() ? "" : "  ", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
