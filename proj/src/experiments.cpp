#include "xicoal/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "xicoal/couplings.hpp"
#include "xicoal/error.hpp"
#include "xicoal/rng.hpp"
#include "xicoal/simulate.hpp"
#include "xicoal/speed.hpp"
#include "xicoal/stats.hpp"

namespace xicoal {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::ValidationError, msg); }

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

// Runs fn(i) for i in [0, count) on `workers` threads. Each index is
// processed exactly once; the first exception is rethrown after joining.
void parallel_for(int workers, std::size_t count, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(workers, static_cast<int>(count));
  for (int w = 0; w < n; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    invalid(std::string("config field '") + key + "': " + e.what());
  }
}

XiMeasure measure_entry(const json& e, const std::filesystem::path& base) {
  if (e.is_string()) {
    std::filesystem::path p = e.get<std::string>();
    if (p.is_relative()) p = base / p;
    return load_measure_file(p.string());
  }
  return measure_from_json(e);
}

ExperimentConfig config_from_json_at(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw Error(ErrorKind::ParseError, "experiment config must be a JSON object");
  ExperimentConfig c;
  const std::string kind = get_or<std::string>(j, "experiment", "verify_speed");
  if (kind == "verify_speed") {
    c.experiment = ExperimentKind::VerifySpeed;
  } else if (kind == "cdi_scan") {
    c.experiment = ExperimentKind::CdiScan;
  } else if (kind == "coupling_check") {
    c.experiment = ExperimentKind::CouplingCheck;
  } else {
    invalid("unknown experiment '" + kind + "'");
  }
  if (j.contains("measure")) c.measures.push_back(measure_entry(j.at("measure"), base));
  if (j.contains("measure_file")) c.measures.push_back(measure_entry(j.at("measure_file"), base));
  if (j.contains("measures")) {
    if (!j.at("measures").is_array()) invalid("'measures' must be an array");
    for (const auto& e : j.at("measures")) c.measures.push_back(measure_entry(e, base));
  }
  c.n0_list = get_or<std::vector<int>>(j, "n0_list", {});
  c.time_grid = get_or<std::vector<double>>(j, "time_grid", {});
  c.replicates = get_or<int>(j, "replicates", 1);
  c.alpha = get_or<double>(j, "alpha", 0.25);
  c.master_seed = get_or<std::uint64_t>(j, "master_seed", 0);
  c.workers = get_or<int>(j, "workers", 1);
  c.override_non_cdi = get_or<bool>(j, "override_non_cdi", false);
  if (j.contains("epsilon") && !j.at("epsilon").is_null()) c.epsilon = get_or<double>(j, "epsilon", 0.0);
  c.b_max = get_or<int>(j, "b_max", 1000);
  c.q_max = get_or<double>(j, "q_max", 1e8);
  c.delta = get_or<double>(j, "delta", 0.3);
  c.horizon = get_or<double>(j, "horizon", 1.0);
  c.ks_time = get_or<double>(j, "ks_time", 0.1);
  c.levels_list = get_or<std::vector<int>>(j, "levels_list", {});
  if (j.contains("output")) {
    const json& o = j.at("output");
    if (o.is_string()) {
      c.output_path = o.get<std::string>();
    } else {
      c.output_path = get_or<std::string>(o, "path", "");
      const std::string f = get_or<std::string>(o, "format", "csv");
      if (f == "csv") {
        c.output_format = OutputFormat::Csv;
      } else if (f == "json") {
        c.output_format = OutputFormat::Json;
      } else {
        invalid("output format must be csv or json");
      }
    }
  }

  if (c.replicates < 1) invalid("replicates must be >= 1");
  if (c.workers < 1) invalid("workers must be >= 1");
  if (!(c.alpha > 0.0 && c.alpha < 0.5)) invalid("alpha must lie in (0, 0.5)");
  for (std::size_t i = 0; i < c.time_grid.size(); ++i) {
    if (!(c.time_grid[i] > 0.0) || !std::isfinite(c.time_grid[i])) invalid("time_grid entries must be positive");
    if (i > 0 && !(c.time_grid[i] > c.time_grid[i - 1])) invalid("time_grid must be increasing");
  }
  for (int n : c.n0_list) {
    if (n < 2) invalid("n0_list entries must be >= 2");
  }
  if (c.experiment != ExperimentKind::CdiScan) {
    if (c.measures.size() != 1) invalid("experiment needs exactly one measure");
    if (c.n0_list.empty()) invalid("n0_list must not be empty");
  }
  if (c.experiment == ExperimentKind::VerifySpeed && c.time_grid.empty()) invalid("time_grid must not be empty");
  if (c.experiment == ExperimentKind::CouplingCheck) {
    if (!(c.delta >= 0.0 && c.delta < 1.0)) invalid("delta must lie in [0, 1)");
    if (!(c.horizon > 0.0)) invalid("horizon must be > 0");
    if (!(c.ks_time > 0.0)) invalid("ks_time must be > 0");
    for (int l : c.levels_list) {
      if (l < 1 || l > kMaxDyadicLevels) invalid("levels_list entries must lie in [1, 62]");
    }
  }
  if (c.epsilon && !(*c.epsilon >= 0.0)) invalid("epsilon must be >= 0");
  return c;
}

struct ReplicateResult {
  std::vector<double> ratios;
  std::vector<char> band_violation;
  std::uint64_t null_events = 0;
};

// sup_{t' <= t} |log(N(t') / v^n(t'))| at each grid time, taken over piece
// endpoints of the piecewise-constant path (v^n is monotone).
std::vector<double> band_sup(const Trajectory& tr, const FiniteSpeed& vn, const std::vector<double>& grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  auto dev = [&](int c, double s) { return std::fabs(std::log(static_cast<double>(c)) - std::log(vn(s).value)); };
  double sup = 0.0;
  std::size_t k = 0;  // piece k starts at times[k-1] (0 for k = 0) with counts[k-1] (n0)
  const std::size_t pieces = tr.times.size() + 1;
  for (double t : grid) {
    double cur = sup;
    while (k < pieces) {
      const double start = (k == 0) ? 0.0 : tr.times[k - 1];
      if (start > t) break;
      const int c = (k == 0) ? tr.initial_n : tr.counts[k - 1];
      const double end = (k < tr.times.size()) ? tr.times[k] : std::numeric_limits<double>::infinity();
      if (end <= t) {
        sup = std::max({sup, dev(c, start), dev(c, end)});
        cur = sup;
        ++k;
      } else {
        cur = std::max({sup, dev(c, start), dev(c, t)});
        break;
      }
    }
    out.push_back(cur);
  }
  return out;
}

json verdict_json(const CdiVerdict& v) {
  json j;
  j["classification"] = to_string(v.classification);
  j["heuristic"] = v.heuristic;
  j["note"] = v.note;
  j["psi_log_slope"] = v.psi_log_slope;
  j["gamma_log_slope"] = v.gamma_log_slope;
  json sums = json::array();
  for (const auto& [b, s] : v.gamma_partial_sums) sums.push_back({{"b", b}, {"sum", s}});
  j["gamma_partial_sums"] = sums;
  return j;
}

void dump_rec(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        dump_rec(it.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        dump_rec(j[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float: {
      const double x = j.get<double>();
      out += std::isfinite(x) ? format_double(x) : "null";
      break;
    }
    default:
      out += j.dump();
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
  f << content;
  f.close();
  if (!f) throw Error(ErrorKind::IoError, "failed writing " + path);
}

std::string nullable_csv(double x) { return std::isfinite(x) ? format_double(x) : "nan"; }

}  // namespace

bool RatioCell::operator==(const RatioCell& o) const {
  return n0 == o.n0 && same(t, o.t) && same(v_n, o.v_n) && same(v, o.v) && same(mean, o.mean) &&
         same(standard_error, o.standard_error) && same(q05, o.q05) && same(q50, o.q50) && same(q95, o.q95) &&
         same(band_violation_fraction, o.band_violation_fraction);
}

const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::VerifySpeed: return "verify_speed";
    case ExperimentKind::CdiScan: return "cdi_scan";
    case ExperimentKind::CouplingCheck: return "coupling_check";
  }
  return "?";
}

ExperimentConfig config_from_json(const nlohmann::json& j) { return config_from_json_at(j, "."); }

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::IoError, "cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, "config parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  const auto base = std::filesystem::path(path).parent_path();
  return config_from_json_at(j, base.empty() ? std::filesystem::path(".") : base);
}

RatioReport run_verify_speed(const ExperimentConfig& config) {
  if (config.measures.size() != 1) invalid("verify_speed needs exactly one measure");
  if (config.replicates < 1) invalid("replicates must be >= 1");
  if (config.time_grid.empty()) invalid("time_grid must not be empty");
  const auto t0 = std::chrono::steady_clock::now();
  const XiMeasure& m = config.measures.front();
  if (!config.override_non_cdi) {
    const CdiVerdict verdict = classify_cdi(m);
    if (verdict.classification != CdiClass::ComesDown) {
      throw Error(ErrorKind::NonCdiMeasure, "measure not classified as coming down from infinity (" +
                                                std::string(to_string(verdict.classification)) +
                                                "); set override_non_cdi to explore it anyway");
    }
  }
  std::optional<SpeedTable> vtable;
  try {
    SpeedTable st = build_speed_table(m);
    if (st.tail_valid) vtable = std::move(st);
  } catch (const Error&) {
  }

  RatioReport report;
  report.measure = m.describe();
  report.alpha = config.alpha;
  report.master_seed = config.master_seed;
  report.replicates = config.replicates;
  const double eps = config.epsilon.value_or(default_epsilon(m));
  const auto& grid = config.time_grid;

  for (std::size_t ci = 0; ci < config.n0_list.size(); ++ci) {
    const int n0 = config.n0_list[ci];
    const FiniteSpeed vn(m, n0);
    std::vector<double> vn_grid;
    for (double t : grid) vn_grid.push_back(vn(t).value);
    std::optional<LambdaChainTable> chain;
    if (const auto* l = m.as<LambdaOnUnit>()) chain.emplace(*l, n0);
    const double horizon = grid.back();

    std::vector<ReplicateResult> results(static_cast<std::size_t>(config.replicates));
    parallel_for(config.workers, results.size(), [&](std::size_t r) {
      const std::uint64_t seed = derive_seed(config.master_seed, ci, r);
      const Trajectory tr = chain ? simulate_lambda_chain(*chain, n0, horizon, seed)
                                  : simulate_block_count(m, n0, horizon, eps, seed);
      ReplicateResult res;
      res.null_events = tr.null_events;
      const std::vector<double> sups = band_sup(tr, vn, grid);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        res.ratios.push_back(static_cast<double>(tr.count_at(grid[g])) / vn_grid[g]);
        res.band_violation.push_back(sups[g] > 2.0 * std::pow(grid[g], config.alpha) ? 1 : 0);
      }
      results[r] = std::move(res);
    });

    std::uint64_t nulls = 0;
    for (const auto& res : results) nulls += res.null_events;
    report.null_event_counts.emplace_back(n0, nulls);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      std::vector<double> ratios;
      double violations = 0.0;
      for (const auto& res : results) {
        ratios.push_back(res.ratios[g]);
        violations += res.band_violation[g];
      }
      RatioCell cell;
      cell.n0 = n0;
      cell.t = grid[g];
      cell.v_n = vn_grid[g];
      cell.v = std::numeric_limits<double>::quiet_NaN();
      if (vtable) {
        try {
          cell.v = v_of(*vtable, grid[g]).value;
        } catch (const Error&) {
        }
      }
      const MeanSe ms = mean_and_se(ratios);
      cell.mean = ms.mean;
      cell.standard_error = ms.standard_error;
      cell.q05 = quantile(ratios, 0.05);
      cell.q50 = quantile(ratios, 0.5);
      cell.q95 = quantile(ratios, 0.95);
      cell.band_violation_fraction = violations / static_cast<double>(results.size());
      report.cells.push_back(cell);
    }
  }
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

CdiScanReport run_cdi_scan(const ExperimentConfig& config) {
  CdiScanReport report;
  std::vector<CdiScanEntry> entries(config.measures.size());
  parallel_for(config.workers, entries.size(), [&](std::size_t i) {
    const XiMeasure& m = config.measures[i];
    CdiScanEntry e;
    e.measure = m.describe();
    e.cdi = classify_cdi(m, config.b_max, config.q_max);
    int budget = 64;
    if (const auto* d = m.as<DyadicFamily>()) budget = d->levels;
    e.regularity = regularity_integral(m, budget);
    for (double q = 10.0; q <= config.q_max * (1.0 + 1e-12); q *= 10.0) {
      e.psi_slope_curve.emplace_back(q, psi_log_slope(m, q));
    }
    entries[i] = std::move(e);
  });
  report.entries = std::move(entries);
  return report;
}

CouplingReport run_coupling_check(const ExperimentConfig& config) {
  if (config.measures.size() != 1) invalid("coupling_check needs exactly one measure");
  const XiMeasure& m = config.measures.front();
  CouplingReport rep;
  rep.measure = m.describe();
  rep.n0 = config.n0_list.empty() ? 100 : config.n0_list.front();
  rep.replicates = config.replicates;
  rep.delta = config.delta;
  rep.horizon = config.horizon;
  rep.ks_time = config.ks_time;
  const std::size_t reps = static_cast<std::size_t>(config.replicates);
  const std::optional<double> eps = config.epsilon;

  // Sandwich joining <= base <= reduction, checked internally at every
  // event and again here on the merged event times.
  std::vector<std::string> failures(reps);
  parallel_for(config.workers, reps, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(config.master_seed, 0, r);
    try {
      const CoupledTriple tri = simulate_sandwich(m, config.delta, rep.n0, config.horizon, seed, eps);
      std::vector<double> times = tri.base.times;
      times.insert(times.end(), tri.reduction.times.begin(), tri.reduction.times.end());
      times.insert(times.end(), tri.joining.times.begin(), tri.joining.times.end());
      times.push_back(0.0);
      for (double t : times) {
        const int b = tri.base.count_at(t);
        if (tri.joining.count_at(t) > b || b > tri.reduction.count_at(t)) {
          failures[r] = "sandwich violated at t=" + format_double(t) + " (seed " + std::to_string(seed) + ")";
          return;
        }
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::CouplingViolation) throw;
      failures[r] = e.what();
    }
  });
  for (std::size_t r = 0; r < reps; ++r) {
    if (failures[r].empty()) continue;
    ++rep.sandwich_violations;
    rep.violating_seeds.push_back(derive_seed(config.master_seed, 0, r));
    if (rep.violation_message.empty()) rep.violation_message = failures[r];
  }

  // Law of the coupled reduction against a direct simulation of Xi_delta.
  const XiMeasure reduced = reduce_measure(m, config.delta);
  const double eps_reduced = default_epsilon(reduced);
  std::vector<double> coupled(reps), direct(reps), base(reps);
  parallel_for(config.workers, reps, [&](std::size_t r) {
    const CoupledPair p =
        simulate_reduction_coupling(m, config.delta, rep.n0, config.ks_time, derive_seed(config.master_seed, 1, r), eps);
    coupled[r] = p.derived.count_at(config.ks_time);
    base[r] = p.base.count_at(config.ks_time);
    const Trajectory d =
        simulate_block_count(reduced, rep.n0, config.ks_time, eps_reduced, derive_seed(config.master_seed, 2, r));
    direct[r] = d.count_at(config.ks_time);
  });
  const KsResult ks = ks_two_sample(coupled, direct);
  rep.ks_statistic = ks.statistic;
  rep.ks_p_value = ks.p_value;
  rep.base_ks_statistic = ks_two_sample(coupled, base).statistic;

  // Joining collapse P(joining count = 1 at the horizon).
  std::vector<XiMeasure> scan;
  std::vector<int> levels;
  const auto* d = m.as<DyadicFamily>();
  if (d && !config.levels_list.empty()) {
    for (int l : config.levels_list) {
      scan.push_back(XiMeasure::dyadic(d->rule, l, d->scale));
      levels.push_back(l);
    }
  } else {
    scan.push_back(m);
    levels.push_back(d ? d->levels : 0);
  }
  for (std::size_t s = 0; s < scan.size(); ++s) {
    std::vector<char> collapsed(reps, 0);
    parallel_for(config.workers, reps, [&](std::size_t r) {
      const CoupledPair p = simulate_joining_coupling(scan[s], rep.n0, config.horizon,
                                                      derive_seed(config.master_seed, 3 + s, r));
      collapsed[r] = p.derived.count_at(config.horizon) == 1 ? 1 : 0;
    });
    double c = 0.0;
    for (char x : collapsed) c += x;
    rep.collapse.push_back({levels[s], c / static_cast<double>(reps)});
  }
  rep.pass = rep.sandwich_violations == 0 && rep.ks_p_value >= 1e-3;
  return rep;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string dump_json(const nlohmann::json& j) {
  std::string out;
  dump_rec(j, out);
  out += '\n';
  return out;
}

nlohmann::json to_json(const RatioReport& r) {
  json j;
  j["measure"] = r.measure;
  j["alpha"] = r.alpha;
  j["master_seed"] = r.master_seed;
  j["replicates"] = r.replicates;
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"n0", c.n0},
                     {"t", c.t},
                     {"v_n", c.v_n},
                     {"v", c.v},
                     {"mean", c.mean},
                     {"standard_error", c.standard_error},
                     {"q05", c.q05},
                     {"q50", c.q50},
                     {"q95", c.q95},
                     {"band_violation_fraction", c.band_violation_fraction}});
  }
  j["cells"] = cells;
  json nulls = json::array();
  for (const auto& [n0, count] : r.null_event_counts) nulls.push_back({{"n0", n0}, {"null_events", count}});
  j["null_event_counts"] = nulls;
  return j;
}

RatioReport ratio_report_from_json(const nlohmann::json& j) {
  auto num = [](const json& v) { return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>(); };
  try {
    RatioReport r;
    r.measure = j.at("measure").get<std::string>();
    r.alpha = num(j.at("alpha"));
    r.master_seed = j.at("master_seed").get<std::uint64_t>();
    r.replicates = j.at("replicates").get<int>();
    for (const auto& c : j.at("cells")) {
      RatioCell cell;
      cell.n0 = c.at("n0").get<int>();
      cell.t = num(c.at("t"));
      cell.v_n = num(c.at("v_n"));
      cell.v = num(c.at("v"));
      cell.mean = num(c.at("mean"));
      cell.standard_error = num(c.at("standard_error"));
      cell.q05 = num(c.at("q05"));
      cell.q50 = num(c.at("q50"));
      cell.q95 = num(c.at("q95"));
      cell.band_violation_fraction = num(c.at("band_violation_fraction"));
      r.cells.push_back(cell);
    }
    for (const auto& n : j.at("null_event_counts")) {
      r.null_event_counts.emplace_back(n.at("n0").get<int>(), n.at("null_events").get<std::uint64_t>());
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed ratio report: ") + e.what());
  }
}

nlohmann::json to_json(const CdiScanReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    json j;
    j["measure"] = e.measure;
    j["cdi"] = verdict_json(e.cdi);
    j["regularity"] = {{"classification", to_string(e.regularity.classification)},
                       {"heuristic", e.regularity.heuristic},
                       {"decay_exponent", e.regularity.decay_exponent},
                       {"partial_sums", e.regularity.partial_sums}};
    json curve = json::array();
    for (const auto& [q, s] : e.psi_slope_curve) curve.push_back({{"q", q}, {"slope", s}});
    j["psi_slope_curve"] = curve;
    entries.push_back(j);
  }
  return json{{"entries", entries}};
}

nlohmann::json to_json(const CouplingReport& r) {
  json collapse = json::array();
  for (const auto& c : r.collapse) collapse.push_back({{"levels", c.levels}, {"collapse_fraction", c.collapse_fraction}});
  return json{{"measure", r.measure},
              {"n0", r.n0},
              {"replicates", r.replicates},
              {"delta", r.delta},
              {"horizon", r.horizon},
              {"ks_time", r.ks_time},
              {"sandwich_violations", r.sandwich_violations},
              {"violating_seeds", r.violating_seeds},
              {"violation_message", r.violation_message},
              {"ks_statistic", r.ks_statistic},
              {"ks_p_value", r.ks_p_value},
              {"base_ks_statistic", r.base_ks_statistic},
              {"joining_collapse", collapse},
              {"result", r.pass ? "PASS" : "FAIL"}};
}

void write_ratio_csv(std::ostream& os, const RatioReport& r) {
  os << "n0,t,v_n,v,mean,standard_error,q05,q50,q95,band_violation_fraction\n";
  for (const auto& c : r.cells) {
    os << c.n0 << ',' << nullable_csv(c.t) << ',' << nullable_csv(c.v_n) << ',' << nullable_csv(c.v) << ','
       << nullable_csv(c.mean) << ',' << nullable_csv(c.standard_error) << ',' << nullable_csv(c.q05) << ','
       << nullable_csv(c.q50) << ',' << nullable_csv(c.q95) << ',' << nullable_csv(c.band_violation_fraction)
       << '\n';
  }
}

void write_plot_csv(std::ostream& os, const RatioReport& r, int n0) {
  os << "t,mean,q05,q95\n";
  for (const auto& c : r.cells) {
    if (c.n0 != n0) continue;
    os << nullable_csv(c.t) << ',' << nullable_csv(c.mean) << ',' << nullable_csv(c.q05) << ','
       << nullable_csv(c.q95) << '\n';
  }
}

void write_cdi_csv(std::ostream& os, const CdiScanReport& r) {
  os << "measure,classification,heuristic,psi_log_slope,gamma_log_slope,gamma_partial_sum,regularity,"
        "regularity_partial_sum,note\n";
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    return q + "\"";
  };
  for (const auto& e : r.entries) {
    const double gsum = e.cdi.gamma_partial_sums.empty() ? 0.0 : e.cdi.gamma_partial_sums.back().second;
    const double rsum = e.regularity.partial_sums.empty() ? 0.0 : e.regularity.partial_sums.back();
    os << quote(e.measure) << ',' << to_string(e.cdi.classification) << ',' << (e.cdi.heuristic ? "true" : "false")
       << ',' << nullable_csv(e.cdi.psi_log_slope) << ',' << nullable_csv(e.cdi.gamma_log_slope) << ','
       << nullable_csv(gsum) << ',' << to_string(e.regularity.classification) << ',' << nullable_csv(rsum) << ','
       << quote(e.cdi.note) << '\n';
  }
}

void write_coupling_csv(std::ostream& os, const CouplingReport& r) {
  os << "n0,replicates,delta,horizon,sandwich_violations,ks_time,ks_statistic,ks_p_value,base_ks_statistic,result\n";
  os << r.n0 << ',' << r.replicates << ',' << nullable_csv(r.delta) << ',' << nullable_csv(r.horizon) << ','
     << r.sandwich_violations << ',' << nullable_csv(r.ks_time) << ',' << nullable_csv(r.ks_statistic) << ','
     << nullable_csv(r.ks_p_value) << ',' << nullable_csv(r.base_ks_statistic) << ',' << (r.pass ? "PASS" : "FAIL") << '\n';
  os << "\nlevels,collapse_fraction\n";
  for (const auto& c : r.collapse) os << c.levels << ',' << nullable_csv(c.collapse_fraction) << '\n';
}

std::vector<std::string> emit_outputs(const RatioReport& r, OutputFormat f, const std::string& path) {
  std::vector<std::string> written;
  std::ostringstream main;
  std::string main_path;
  if (f == OutputFormat::Json) {
    main << dump_json(to_json(r));
    main_path = path + ".json";
  } else {
    write_ratio_csv(main, r);
    main_path = path + ".csv";
  }
  write_file(main_path, main.str());
  written.push_back(main_path);
  for (const auto& [n0, nulls] : r.null_event_counts) {
    (void)nulls;
    std::ostringstream plot;
    write_plot_csv(plot, r, n0);
    const std::string p = path + "_plot_n0_" + std::to_string(n0) + ".csv";
    write_file(p, plot.str());
    written.push_back(p);
  }
  return written;
}

std::vector<std::string> emit_outputs(const CdiScanReport& r, OutputFormat f, const std::string& path) {
  std::ostringstream os;
  std::string p;
  if (f == OutputFormat::Json) {
    os << dump_json(to_json(r));
    p = path + ".json";
  } else {
    write_cdi_csv(os, r);
    p = path + ".csv";
  }
  write_file(p, os.str());
  return {p};
}

std::vector<std::string> emit_outputs(const CouplingReport& r, OutputFormat f, const std::string& path) {
  std::ostringstream os;
  std::string p;
  if (f == OutputFormat::Json) {
    os << dump_json(to_json(r));
    p = path + ".json";
  } else {
    write_coupling_csv(os, r);
    p = path + ".csv";
  }
  write_file(p, os.str());
  return {p};
}

}  // namespace xicoal
