#pragma once

#include <vector>

#include "xicoal/measure.hpp"

namespace xicoal {

// Cumulative integrals of 1/psi over a logarithmic grid q_0 < ... < q_K:
// upper[i] = int_{q_i}^{q_K} dq / psi(q). Inside a cell psi is modelled as
// a power law through the two node values, rescaled so that the cell total
// matches the quadrature increment exactly.
class InverseIntegralTable {
 public:
  InverseIntegralTable() = default;
  InverseIntegralTable(const XiMeasure& m, double q_lo, double q_hi, int cells, double rel_tol);

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& psi_nodes() const { return psi_; }
  const std::vector<double>& increments() const { return inc_; }
  const std::vector<double>& upper() const { return upper_; }
  double lo() const { return grid_.front(); }
  double hi() const { return grid_.back(); }
  double total() const { return upper_.front(); }

  // int_q^{q_K} dq/psi for q in [q_0, q_K].
  double integral_from(double q) const;
  // q in [q_0, q_K] with integral_from(q) = target, target in [0, total()].
  double invert(double target) const;
  // Accumulated quadrature error of cells at or above q, plus the model
  // error of the cell containing q.
  double error_from(double q) const;

 private:
  std::size_t cell_of(double q) const;
  std::vector<double> grid_;
  std::vector<double> psi_;
  std::vector<double> inc_;
  std::vector<double> upper_;
  std::vector<double> quad_err_;
  std::vector<double> model_err_;
};

struct SpeedTable {
  XiMeasure measure;
  InverseIntegralTable table;
  double psi_slope = 0.0;      // d log psi / d log q at q_max
  double tail_estimate = 0.0;  // approx int_{q_max}^inf dq/psi
  double tail_error = 0.0;
  bool tail_valid = false;

  const std::vector<double>& grid() const { return table.grid(); }
  const std::vector<double>& u_increments() const { return table.increments(); }
  // u(q) = int_q^inf dq/psi for q on the grid range; requires tail_valid.
  double u(double q) const;
};

inline constexpr double kTailSlopeThreshold = 1.05;

// Throws NonCdiMeasure when require_cdi is set and the fitted slope at
// q_max is <= 1.05.
SpeedTable build_speed_table(const XiMeasure& m, double q_min = 1.0, double q_max = 1e7,
                             int cells = 700, bool require_cdi = false);

enum class SpeedStatus { Ok, AboveGrid, BelowGrid };
const char* to_string(SpeedStatus s);

struct SpeedEval {
  double value = 0.0;
  double error_bound = 0.0;
  SpeedStatus status = SpeedStatus::Ok;
};

// Candidate speed v(t) = inf{s : u(s) < t}. AboveGrid values are power-law
// extrapolations beyond q_max; BelowGrid values are clamped at q_min.
// Throws InfiniteCandidateSpeed when the table's tail is invalid.
SpeedEval v_of(const SpeedTable& table, double t);

// log v(t) - log v(z) + int_z^t psi(v(r))/v(r) dr, inner integral by quadrature.
double integral_equation_residual(const SpeedTable& table, double z, double t);

struct FiniteSpeedEval {
  double value = 0.0;
  bool clamped = false;  // hit q = 1 (BelowDomain)
};

// v^n(s) solving int_{v^n(s)}^n dq/psi = s by bisection on the lower limit,
// with a fresh quadrature at every step.
FiniteSpeedEval v_n(const XiMeasure& m, int n, double s);

// Tabulated v^n for repeated evaluation along trajectories.
class FiniteSpeed {
 public:
  FiniteSpeed(const XiMeasure& m, int n, int cells_per_decade = 100);
  int n() const { return n_; }
  // int_1^n dq/psi: times beyond this clamp at one block.
  double horizon() const { return table_.total(); }
  FiniteSpeedEval operator()(double s) const;
  const InverseIntegralTable& table() const { return table_; }

 private:
  int n_;
  InverseIntegralTable table_;
};

// psi of the delta-reduction: psi((1 - delta) q).
double psi_reduction(const XiMeasure& m, double delta, double q);

// Explicit driving measure of the delta-reduction: points scaled by
// (1 - delta), weights by (1 - delta)^2.
XiMeasure reduce_measure(const XiMeasure& m, double delta);

// Lambda measure of the color-joining: one atom at S1 with weight
// w S1^2 / S2 per Xi-atom. Throws NonRegular when the regularity integral
// diverges (the joining is then the trivial one-block process).
XiMeasure joining_lambda(const XiMeasure& m);

}  // namespace xicoal
