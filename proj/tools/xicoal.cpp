#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xicoal/couplings.hpp"
#include "xicoal/error.hpp"
#include "xicoal/experiments.hpp"
#include "xicoal/measure.hpp"
#include "xicoal/rates.hpp"
#include "xicoal/simulate.hpp"
#include "xicoal/speed.hpp"

using namespace xicoal;

namespace {

// "LO:HI:N" -> N log-spaced points from LO to HI inclusive.
std::vector<double> parse_grid(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3) throw Error(ErrorKind::ValidationError, "grid must be LO:HI:N");
  double lo, hi;
  long n;
  try {
    lo = std::stod(parts[0]);
    hi = std::stod(parts[1]);
    n = std::stol(parts[2]);
  } catch (const std::exception&) {
    throw Error(ErrorKind::ValidationError, "grid must be LO:HI:N with numeric fields");
  }
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw Error(ErrorKind::ValidationError, "grid needs 0 < LO <= HI and N >= 1");
  std::vector<double> g;
  for (long i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    g.push_back(i == n - 1 ? hi : lo * std::pow(hi / lo, f));
  }
  return g;
}

std::string f17(double x) { return format_double(x); }

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::IoError, "cannot open " + path);
  f << text;
  if (!f) throw Error(ErrorKind::IoError, "failed writing " + path);
}

void report_paths(const std::vector<std::string>& paths) {
  for (const auto& p : paths) std::cerr << "wrote " << p << "\n";
}

int run_config(const std::string& path, std::optional<int> workers, const std::string& output,
               std::optional<ExperimentKind> expect) {
  ExperimentConfig cfg = load_config_file(path);
  if (workers) cfg.workers = *workers;
  if (!output.empty()) cfg.output_path = output;
  if (expect && cfg.experiment != *expect) {
    throw Error(ErrorKind::ValidationError, std::string("config experiment is ") + to_string(cfg.experiment));
  }
  switch (cfg.experiment) {
    case ExperimentKind::VerifySpeed: {
      const RatioReport r = run_verify_speed(cfg);
      if (cfg.output_path.empty()) {
        if (cfg.output_format == OutputFormat::Json) {
          std::cout << dump_json(to_json(r));
        } else {
          write_ratio_csv(std::cout, r);
        }
      } else {
        report_paths(emit_outputs(r, cfg.output_format, cfg.output_path));
      }
      std::cerr << "runtime_seconds " << r.runtime_seconds << "\n";
      return 0;
    }
    case ExperimentKind::CdiScan: {
      const CdiScanReport r = run_cdi_scan(cfg);
      if (cfg.output_path.empty()) {
        if (cfg.output_format == OutputFormat::Json) {
          std::cout << dump_json(to_json(r));
        } else {
          write_cdi_csv(std::cout, r);
        }
      } else {
        report_paths(emit_outputs(r, cfg.output_format, cfg.output_path));
      }
      return 0;
    }
    case ExperimentKind::CouplingCheck: {
      const CouplingReport r = run_coupling_check(cfg);
      if (cfg.output_path.empty()) {
        if (cfg.output_format == OutputFormat::Json) {
          std::cout << dump_json(to_json(r));
        } else {
          write_coupling_csv(std::cout, r);
        }
      } else {
        report_paths(emit_outputs(r, cfg.output_format, cfg.output_path));
      }
      if (r.sandwich_violations > 0) {
        std::cerr << "FAIL: " << r.violation_message << "\n";
        return exit_code(ErrorKind::CouplingViolation);
      }
      return 0;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Xi-coalescent speed functionals, classification, simulation and couplings"};
  app.require_subcommand(1);

  std::string measure_file, grid, output, kind, config;
  std::vector<std::string> measure_files;
  double q = -1.0, t = -1.0, horizon = 0.0, epsilon = -1.0;
  int b = 2, n = 0, n0 = 0;
  std::uint64_t seed = 0;
  bool oracle = false, partition = false;
  std::optional<int> workers;

  auto* psi_cmd = app.add_subcommand("psi", "evaluate psi");
  psi_cmd->add_option("--measure", measure_file, "measure file")->required();
  auto* q_opt = psi_cmd->add_option("--q", q, "point q >= 0");
  auto* qg_opt = psi_cmd->add_option("--grid", grid, "QMIN:QMAX:N log grid");
  q_opt->excludes(qg_opt);

  auto* gamma_cmd = app.add_subcommand("gamma", "evaluate gamma_b");
  gamma_cmd->add_option("--measure", measure_file, "measure file")->required();
  gamma_cmd->add_option("--b", b, "block count >= 2")->required();
  gamma_cmd->add_flag("--oracle", oracle, "also evaluate by merger-pattern enumeration");

  auto* speed_cmd = app.add_subcommand("speed", "candidate speed v(t) or finite-start speed v^n(s)");
  speed_cmd->add_option("--measure", measure_file, "measure file")->required();
  auto* t_opt = speed_cmd->add_option("--t", t, "time t > 0");
  auto* tg_opt = speed_cmd->add_option("--grid", grid, "TMIN:TMAX:N log grid");
  t_opt->excludes(tg_opt);
  speed_cmd->add_option("--n", n, "evaluate v^n instead of v");

  auto* cdi_cmd = app.add_subcommand("cdi", "classify coming down from infinity");
  cdi_cmd->add_option("--measure", measure_files, "measure files")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "simulate the block-counting process");
  sim_cmd->add_option("--measure", measure_file, "measure file")->required();
  sim_cmd->add_option("--n0", n0, "initial block count")->required();
  sim_cmd->add_option("--horizon", horizon, "time horizon")->required();
  sim_cmd->add_option("--epsilon", epsilon, "truncation threshold on S2");
  sim_cmd->add_option("--seed", seed, "64-bit seed")->required();
  sim_cmd->add_flag("--partition", partition, "emit the partition-valued path");
  sim_cmd->add_option("--output", output, "output file");

  auto* couple_cmd = app.add_subcommand("couple", "simulate a coupled pair");
  couple_cmd->add_option("--measure", measure_file, "measure file")->required();
  couple_cmd->add_option("--kind", kind, "reduction:DELTA or joining")->required();
  couple_cmd->add_option("--n0", n0, "initial block count")->required();
  couple_cmd->add_option("--horizon", horizon, "time horizon")->required();
  couple_cmd->add_option("--seed", seed, "64-bit seed")->required();
  couple_cmd->add_option("--grid", grid, "TMIN:TMAX:N sampling grid (default: event times)");
  couple_cmd->add_option("--output", output, "output file");

  auto* verify_cmd = app.add_subcommand("verify-speed", "ensemble check of N(t)/v^n(t)");
  verify_cmd->add_option("--config", config, "experiment config")->required();
  verify_cmd->add_option("--workers", workers, "worker threads");
  verify_cmd->add_option("--output", output, "output path prefix");

  auto* run_cmd = app.add_subcommand("run", "run any configured experiment");
  run_cmd->add_option("--config", config, "experiment config")->required();
  run_cmd->add_option("--workers", workers, "worker threads");
  run_cmd->add_option("--output", output, "output path prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    std::ostringstream out;
    if (*psi_cmd) {
      const XiMeasure m = load_measure_file(measure_file);
      std::vector<double> qs;
      if (!grid.empty()) {
        qs = parse_grid(grid);
      } else if (q >= 0.0) {
        qs = {q};
      } else {
        throw Error(ErrorKind::ValidationError, "psi needs --q or --grid");
      }
      out << "q,psi,error\n";
      for (double x : qs) {
        const auto v = psi_with_error(m, x);
        out << f17(x) << ',' << f17(v.value) << ',' << f17(v.error) << '\n';
      }
    } else if (*gamma_cmd) {
      const XiMeasure m = load_measure_file(measure_file);
      const auto g = gamma_rate_with_error(m, b);
      out << (oracle ? "b,gamma,error,gamma_via_mergers\n" : "b,gamma,error\n");
      out << b << ',' << f17(g.value) << ',' << f17(g.error);
      if (oracle) out << ',' << f17(gamma_via_mergers(m, b));
      out << '\n';
    } else if (*speed_cmd) {
      const XiMeasure m = load_measure_file(measure_file);
      std::vector<double> ts;
      if (!grid.empty()) {
        ts = parse_grid(grid);
      } else if (t > 0.0) {
        ts = {t};
      } else {
        throw Error(ErrorKind::ValidationError, "speed needs --t > 0 or --grid");
      }
      if (n > 0) {
        const FiniteSpeed fs(m, n);
        out << "s,v_n,clamped\n";
        for (double s : ts) {
          const auto r = fs(s);
          out << f17(s) << ',' << f17(r.value) << ',' << (r.clamped ? "true" : "false") << '\n';
        }
      } else {
        const SpeedTable table = build_speed_table(m, 1.0, 1e7, 700, true);
        out << "t,v,error_bound,status\n";
        for (double x : ts) {
          const auto r = v_of(table, x);
          out << f17(x) << ',' << f17(r.value) << ',' << f17(r.error_bound) << ',' << to_string(r.status) << '\n';
        }
      }
    } else if (*cdi_cmd) {
      ExperimentConfig cfg;
      cfg.experiment = ExperimentKind::CdiScan;
      for (const auto& f : measure_files) cfg.measures.push_back(load_measure_file(f));
      write_cdi_csv(out, run_cdi_scan(cfg));
    } else if (*sim_cmd) {
      const XiMeasure m = load_measure_file(measure_file);
      const double eps = epsilon >= 0.0 ? epsilon : default_epsilon(m);
      if (partition) {
        const auto path = simulate_partition(m, n0, horizon, eps, seed);
        out << "t,n,blocks\n";
        for (const auto& [time, st] : path) {
          out << f17(time) << ',' << st.blocks.size() << ",\"";
          for (std::size_t i = 0; i < st.blocks.size(); ++i) {
            if (i) out << ' ';
            out << '{';
            for (std::size_t k = 0; k < st.blocks[i].size(); ++k) out << (k ? "," : "") << st.blocks[i][k];
            out << '}';
          }
          out << "\"\n";
        }
      } else {
        const Trajectory tr = simulate_block_count(m, n0, horizon, eps, seed);
        write_trajectory_csv(out, tr);
        std::cerr << "null_events " << tr.null_events << "\n";
      }
    } else if (*couple_cmd) {
      const XiMeasure m = load_measure_file(measure_file);
      CoupledPair pair;
      if (kind == "joining") {
        pair = simulate_joining_coupling(m, n0, horizon, seed);
      } else if (kind.rfind("reduction:", 0) == 0) {
        double delta;
        try {
          delta = std::stod(kind.substr(10));
        } catch (const std::exception&) {
          throw Error(ErrorKind::ValidationError, "reduction needs a numeric delta");
        }
        pair = simulate_reduction_coupling(m, delta, n0, horizon, seed);
      } else {
        throw Error(ErrorKind::ValidationError, "--kind must be reduction:DELTA or joining");
      }
      std::vector<double> ts;
      if (!grid.empty()) {
        ts = parse_grid(grid);
      } else {
        ts = pair.base.times;
        ts.insert(ts.end(), pair.derived.times.begin(), pair.derived.times.end());
        ts.push_back(0.0);
        std::sort(ts.begin(), ts.end());
        ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
      }
      write_paired_csv(out, pair, ts);
    } else if (*verify_cmd) {
      return run_config(config, workers, output, ExperimentKind::VerifySpeed);
    } else if (*run_cmd) {
      return run_config(config, workers, output, std::nullopt);
    }
    emit(out.str(), output);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
