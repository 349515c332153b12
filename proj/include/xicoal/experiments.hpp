#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "xicoal/measure.hpp"
#include "xicoal/rates.hpp"

namespace xicoal {

enum class ExperimentKind { VerifySpeed, CdiScan, CouplingCheck };
const char* to_string(ExperimentKind k);

enum class OutputFormat { Csv, Json };

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::VerifySpeed;
  std::vector<XiMeasure> measures;  // exactly one except for CdiScan
  std::vector<int> n0_list;
  std::vector<double> time_grid;
  int replicates = 1;
  double alpha = 0.25;
  std::uint64_t master_seed = 0;
  int workers = 1;
  bool override_non_cdi = false;
  std::optional<double> epsilon;
  // CdiScan
  int b_max = 1000;
  double q_max = 1e8;
  // CouplingCheck
  double delta = 0.3;
  double horizon = 1.0;
  double ks_time = 0.1;
  std::vector<int> levels_list;  // joining collapse scan for dyadic families
  // Output
  std::string output_path;
  OutputFormat output_format = OutputFormat::Csv;
};

// Validates all invariants; throws ValidationError/ParseError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

struct RatioCell {
  int n0 = 0;
  double t = 0.0;
  double v_n = 0.0;
  double v = 0.0;  // NaN when the candidate speed is unavailable
  double mean = 0.0;
  double standard_error = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
  double band_violation_fraction = 0.0;
  // NaN compares equal to NaN.
  bool operator==(const RatioCell& o) const;
};

struct RatioReport {
  std::string measure;
  double alpha = 0.0;
  std::uint64_t master_seed = 0;
  int replicates = 0;
  std::vector<RatioCell> cells;
  std::vector<std::pair<int, std::uint64_t>> null_event_counts;  // (n0, total)
  double runtime_seconds = 0.0;  // not part of emitted reports

  // Equality over emitted fields.
  bool operator==(const RatioReport& o) const {
    return measure == o.measure && alpha == o.alpha && master_seed == o.master_seed &&
           replicates == o.replicates && cells == o.cells && null_event_counts == o.null_event_counts;
  }
};

RatioReport run_verify_speed(const ExperimentConfig& config);

struct CdiScanEntry {
  std::string measure;
  CdiVerdict cdi;
  RegularityVerdict regularity;
  std::vector<std::pair<double, double>> psi_slope_curve;  // (q, d log psi / d log q)
};

struct CdiScanReport {
  std::vector<CdiScanEntry> entries;
};

CdiScanReport run_cdi_scan(const ExperimentConfig& config);

struct CollapseStat {
  int levels = 0;
  double collapse_fraction = 0.0;  // P(joining count = 1 at horizon)
};

struct CouplingReport {
  std::string measure;
  int n0 = 0;
  int replicates = 0;
  double delta = 0.0;
  double horizon = 0.0;
  double ks_time = 0.0;
  std::uint64_t sandwich_violations = 0;
  std::vector<std::uint64_t> violating_seeds;
  std::string violation_message;
  double ks_statistic = 0.0;  // coupled reduction vs independent direct simulation of Xi_delta
  double ks_p_value = 1.0;
  double base_ks_statistic = 0.0;  // coupled reduction vs its own base path; 0 when delta = 0
  std::vector<CollapseStat> collapse;
  bool pass = false;
};

CouplingReport run_coupling_check(const ExperimentConfig& config);

nlohmann::json to_json(const RatioReport& r);
RatioReport ratio_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CdiScanReport& r);
nlohmann::json to_json(const CouplingReport& r);

void write_ratio_csv(std::ostream& os, const RatioReport& r);
void write_plot_csv(std::ostream& os, const RatioReport& r, int n0);
void write_cdi_csv(std::ostream& os, const CdiScanReport& r);
void write_coupling_csv(std::ostream& os, const CouplingReport& r);

// JSON text with every float printed with 17 significant digits and
// non-finite floats as null.
std::string dump_json(const nlohmann::json& j);
std::string format_double(double x);

// Writes <path>.csv or <path>.json; ratio reports also get one
// <path>_plot_n0_<n0>.csv per n0. Returns the written paths. Throws IoError.
std::vector<std::string> emit_outputs(const RatioReport& r, OutputFormat f, const std::string& path);
std::vector<std::string> emit_outputs(const CdiScanReport& r, OutputFormat f, const std::string& path);
std::vector<std::string> emit_outputs(const CouplingReport& r, OutputFormat f, const std::string& path);

}  // namespace xicoal
