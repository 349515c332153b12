#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "xicoal/error.hpp"
#include "xicoal/experiments.hpp"

using namespace xicoal;
using nlohmann::json;

namespace {

ErrorKind kind_of(const json& j) {
  try {
    config_from_json(j);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::IoError;
}

json kingman_config() {
  return json{{"experiment", "verify_speed"},
              {"measure", {{"type", "kingman"}, {"a", 1.0}}},
              {"n0_list", {1000}},
              {"time_grid", {0.01, 0.02, 0.05}},
              {"replicates", 40},
              {"master_seed", 12345}};
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir() {
  auto p = std::filesystem::temp_directory_path() / "xicoal_test_experiments";
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = kingman_config();
  CHECK_NOTHROW(config_from_json(c));
  c["replicates"] = 0;
  CHECK(kind_of(c) == ErrorKind::ValidationError);
  c = kingman_config();
  c["alpha"] = 0.5;
  CHECK(kind_of(c) == ErrorKind::ValidationError);
  c["alpha"] = 0.0;
  CHECK(kind_of(c) == ErrorKind::ValidationError);
  c = kingman_config();
  c["time_grid"] = {0.02, 0.01};
  CHECK(kind_of(c) == ErrorKind::ValidationError);
  c["time_grid"] = {-0.01, 0.01};
  CHECK(kind_of(c) == ErrorKind::ValidationError);
  c = kingman_config();
  c["experiment"] = "nonsense";
  CHECK(kind_of(c) == ErrorKind::ValidationError);
  c = kingman_config();
  c.erase("measure");
  CHECK(kind_of(c) == ErrorKind::ValidationError);
  c = kingman_config();
  c["replicates"] = "many";
  CHECK(kind_of(c) == ErrorKind::ValidationError);
  CHECK(kind_of(json::array()) == ErrorKind::ParseError);
  CHECK_THROWS_AS(load_config_file("/nonexistent/config.json"), Error);

  const auto dir = scratch_dir();
  std::ofstream(dir / "m.json") << R"({"type":"kingman","a":2})";
  std::ofstream(dir / "c.json") << R"({"experiment":"cdi_scan","measures":["m.json"]})";
  const auto loaded = load_config_file((dir / "c.json").string());
  REQUIRE(loaded.measures.size() == 1);
  CHECK(loaded.measures[0] == XiMeasure::kingman(2.0));
  std::ofstream(dir / "bad.json") << "{";
  try {
    load_config_file((dir / "bad.json").string());
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
  }
}

TEST_CASE("kingman speed verification") {
  const auto cfg = config_from_json(kingman_config());
  const auto r = run_verify_speed(cfg);
  REQUIRE(r.cells.size() == 3);
  for (const auto& c : r.cells) {
    CHECK(c.v_n == doctest::Approx(1000.0 / (1.0 + 500.0 * c.t)).epsilon(1e-9));
    CHECK(c.v == doctest::Approx(2.0 / c.t).epsilon(1e-3));
    CHECK(c.q05 <= c.q50);
    CHECK(c.q50 <= c.q95);
    CHECK(c.band_violation_fraction >= 0.0);
    CHECK(c.band_violation_fraction <= 1.0);
    CHECK(std::fabs(c.mean - 1.0) <= std::max(0.05, 4.0 * c.standard_error));
  }
  REQUIRE(r.null_event_counts.size() == 1);
  CHECK(r.null_event_counts[0].second == 0);
}

TEST_CASE("non-CDI measures need the override") {
  auto c = kingman_config();
  c["measure"] = {{"type", "finite_atomic"}, {"atoms", {{{"w", 1.0}, {"x", {0.5}}}}}};
  c["n0_list"] = {50};
  c["replicates"] = 5;
  try {
    run_verify_speed(config_from_json(c));
    FAIL("expected NonCdiMeasure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonCdiMeasure);
  }
  c["override_non_cdi"] = true;
  const auto r = run_verify_speed(config_from_json(c));
  for (const auto& cell : r.cells) CHECK(std::isnan(cell.v));
  // JSON round trip keeps the missing speed.
  const auto back = ratio_report_from_json(json::parse(dump_json(to_json(r))));
  CHECK(back == r);
}

TEST_CASE("reports are identical across worker counts") {
  auto c = kingman_config();
  c["n0_list"] = {200, 500};
  for (int w : {1, 8}) {
    c["workers"] = w;
    const auto a = run_verify_speed(config_from_json(c));
    c["workers"] = 1;
    const auto b = run_verify_speed(config_from_json(c));
    CHECK(a == b);
    CHECK(dump_json(to_json(a)) == dump_json(to_json(b)));
    std::ostringstream sa, sb;
    write_ratio_csv(sa, a);
    write_ratio_csv(sb, b);
    CHECK(sa.str() == sb.str());
  }
  auto cc = json{{"experiment", "coupling_check"},
                 {"measure", {{"type", "finite_atomic"}, {"atoms", {{{"w", 1.0}, {"x", {0.5, 0.25}}}}}}},
                 {"n0_list", {60}},
                 {"replicates", 50},
                 {"master_seed", 3}};
  cc["workers"] = 1;
  const auto one = dump_json(to_json(run_coupling_check(config_from_json(cc))));
  cc["workers"] = 8;
  CHECK(dump_json(to_json(run_coupling_check(config_from_json(cc)))) == one);
}

TEST_CASE("json round trip and csv shape") {
  const auto r = run_verify_speed(config_from_json(kingman_config()));
  const auto back = ratio_report_from_json(json::parse(dump_json(to_json(r))));
  CHECK(back == r);
  RatioReport one = r;
  one.cells.resize(1);
  std::ostringstream os;
  write_ratio_csv(os, one);
  const std::string s = os.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 2);
  std::ostringstream plot;
  write_plot_csv(plot, r, 1000);
  const std::string ps = plot.str();
  CHECK(ps.rfind("t,mean,q05,q95\n", 0) == 0);
  CHECK(std::count(ps.begin(), ps.end(), '\n') == 4);
}

TEST_CASE("emitted files are byte stable") {
  const auto r = run_verify_speed(config_from_json(kingman_config()));
  const auto dir = scratch_dir();
  for (auto f : {OutputFormat::Csv, OutputFormat::Json}) {
    const auto first = emit_outputs(r, f, (dir / "a").string());
    const auto second = emit_outputs(r, f, (dir / "b").string());
    REQUIRE(first.size() == 2);
    REQUIRE(second.size() == 2);
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(slurp(first[i]) == slurp(second[i]));
  }
  try {
    emit_outputs(r, OutputFormat::Csv, "/nonexistent/dir/out");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IoError);
  }
}

TEST_CASE("floats use 17 significant digits") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(dump_json(json{{"x", 0.1}, {"y", std::nan("")}}) == std::string(R"({"x":0.10000000000000001,"y":null})") + "\n");
}

TEST_CASE("cdi scan") {
  const json c = {{"experiment", "cdi_scan"},
                  {"measures",
                   {{{"type", "kingman"}, {"a", 1.0}},
                    {{"type", "finite_atomic"}, {"atoms", {{{"w", 1.0}, {"x", {0.5}}}}}},
                    {{"type", "dyadic"}, {"f", "inverse_square"}, {"levels", 40}},
                    {{"type", "lambda"}, {"beta", {{"a", 0.5}, {"b", 1.5}, {"w", 1.0}}}},
                    {{"type", "dyadic"}, {"f", "full"}, {"levels", 40}}}}};
  const auto r = run_cdi_scan(config_from_json(c));
  REQUIRE(r.entries.size() == 5);
  CHECK(r.entries[0].cdi.classification == CdiClass::ComesDown);
  CHECK(r.entries[1].cdi.classification == CdiClass::DoesNotComeDown);
  CHECK(r.entries[2].cdi.classification == CdiClass::DoesNotComeDown);
  CHECK(r.entries[3].cdi.classification == CdiClass::ComesDown);
  CHECK(r.entries[4].cdi.classification == CdiClass::Inconclusive);
  CHECK_FALSE(r.entries[4].cdi.note.empty());
  CHECK_FALSE(r.entries[0].psi_slope_curve.empty());
  const auto empty = run_cdi_scan(config_from_json(json{{"experiment", "cdi_scan"}, {"measures", json::array()}}));
  CHECK(empty.entries.empty());
  std::ostringstream os;
  write_cdi_csv(os, empty);
  const std::string cs = os.str();
  CHECK(std::count(cs.begin(), cs.end(), '\n') == 1);
}

TEST_CASE("coupling check") {
  json c = {{"experiment", "coupling_check"},
            {"measure", {{"type", "finite_atomic"}, {"atoms", {{{"w", 1.0}, {"x", {0.5, 0.25}}}}}}},
            {"n0_list", {100}},
            {"replicates", 100},
            {"master_seed", 1}};
  auto r = run_coupling_check(config_from_json(c));
  CHECK(r.sandwich_violations == 0);
  CHECK(r.pass);
  CHECK(r.base_ks_statistic > 0.0);
  c["delta"] = 0.0;
  r = run_coupling_check(config_from_json(c));
  CHECK(r.base_ks_statistic == 0.0);
  CHECK(r.ks_p_value >= 1e-3);
  CHECK(r.pass);

  json d = {{"experiment", "coupling_check"},
            {"measure", {{"type", "dyadic"}, {"f", "full"}, {"levels", 12}}},
            {"n0_list", {2}},
            {"replicates", 2000},
            {"horizon", 0.01},
            {"ks_time", 0.01},
            {"levels_list", {4, 16, 62}},
            {"master_seed", 2}};
  const auto dr = run_coupling_check(config_from_json(d));
  REQUIRE(dr.collapse.size() == 3);
  CHECK(dr.collapse[0].collapse_fraction < dr.collapse[1].collapse_fraction);
  CHECK(dr.collapse[1].collapse_fraction < dr.collapse[2].collapse_fraction);
  CHECK(dr.sandwich_violations == 0);
  std::ostringstream os;
  write_coupling_csv(os, dr);
  CHECK(os.str().find("62,") != std::string::npos);
}

TEST_CASE("band violations shrink with the time scale") {
  json c = {{"experiment", "verify_speed"},
            {"measure", {{"type", "kingman"}, {"a", 1.0}}},
            {"n0_list", {10000}},
            {"time_grid", {0.01, 0.02, 0.04}},
            {"alpha", 0.25},
            {"replicates", 200},
            {"master_seed", 99}};
  const auto r = run_verify_speed(config_from_json(c));
  REQUIRE(r.cells.size() == 3);
  auto se = [&](double p) { return std::sqrt(std::max(0.0, p * (1 - p)) / 200.0); };
  for (std::size_t i = 0; i + 1 < r.cells.size(); ++i) {
    const double a = r.cells[i].band_violation_fraction, b = r.cells[i + 1].band_violation_fraction;
    CHECK(a <= b + 4.0 * std::hypot(se(a), se(b)) + 1e-12);
  }
}

TEST_CASE("ratio band contains one at large n0") {
  const json kingman = {{"type", "kingman"}, {"a", 1.0}};
  const json beta = {{"type", "lambda"}, {"beta", {{"a", 0.5}, {"b", 1.5}, {"w", 1.0}}}};
  for (const auto& m : {kingman, beta}) {
    json c = {{"experiment", "verify_speed"},
              {"measure", m},
              {"n0_list", {10000}},
              {"time_grid", {0.005, 0.01}},
              {"replicates", 100},
              {"master_seed", 7}};
    const auto r = run_verify_speed(config_from_json(c));
    CAPTURE(r.measure);
    CHECK(r.cells[0].q05 <= 1.0);
    CHECK(r.cells[0].q95 >= 1.0);
  }
}
