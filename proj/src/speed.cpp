#include "xicoal/speed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xicoal/error.hpp"
#include "xicoal/quadrature.hpp"
#include "xicoal/rates.hpp"

namespace xicoal {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::ValidationError, msg); }

// int_{ea}^{eb} dq/psi(q) integrated in y = log q.
QuadratureResult inverse_psi_integral(const XiMeasure& m, double ya, double yb, double rel_tol,
                                      int panels = 16) {
  QuadratureOptions opts;
  opts.initial_panels = panels;
  opts.abs_tol = 0.0;
  opts.rel_tol = rel_tol;
  auto f = [&m](double y) {
    const double q = std::exp(y);
    return q / psi(m, q);
  };
  QuadratureResult r = adaptive_simpson(f, ya, yb, opts);
  if (!r.converged && !(r.error <= rel_tol * std::fabs(r.value))) {
    throw Error(ErrorKind::QuadratureFailure, "integral of 1/psi did not converge");
  }
  return r;
}

// Fraction of a power-law cell [a, a e^L] lying above a e^y:
// (e^{cL} - e^{cy}) / (e^{cL} - 1) with c = 1 - p.
double upper_fraction(double c, double y, double L) {
  if (std::fabs(c * L) < 1e-12) return (L - y) / L;
  return (std::expm1(c * L) - std::expm1(c * y)) / std::expm1(c * L);
}

// y in [0, L] with upper_fraction(c, y, L) = phi.
double solve_upper_fraction(double c, double phi, double L) {
  double y;
  if (std::fabs(c * L) < 1e-12) {
    y = L * (1.0 - phi);
  } else {
    y = std::log1p(std::expm1(c * L) * (1.0 - phi)) / c;
  }
  return std::clamp(y, 0.0, L);
}

}  // namespace

InverseIntegralTable::InverseIntegralTable(const XiMeasure& m, double q_lo, double q_hi, int cells,
                                           double rel_tol) {
  if (!(q_lo > 0.0) || !(q_hi > q_lo) || !std::isfinite(q_hi)) invalid("speed grid needs 0 < q_min < q_max");
  if (cells < 1) invalid("speed grid needs at least one cell");
  const double ylo = std::log(q_lo);
  const double yhi = std::log(q_hi);
  const std::size_t K = static_cast<std::size_t>(cells);
  grid_.resize(K + 1);
  psi_.resize(K + 1);
  for (std::size_t i = 0; i <= K; ++i) {
    const double y = ylo + (yhi - ylo) * static_cast<double>(i) / static_cast<double>(K);
    grid_[i] = (i == 0) ? q_lo : (i == K ? q_hi : std::exp(y));
    psi_[i] = psi(m, grid_[i]);
    if (!(psi_[i] > 0.0) || !std::isfinite(psi_[i])) {
      throw Error(ErrorKind::Overflow, "psi is not positive and finite on the speed grid");
    }
  }
  inc_.resize(K);
  quad_err_.resize(K);
  model_err_.resize(K);
  for (std::size_t i = 0; i < K; ++i) {
    const double ya = std::log(grid_[i]);
    const double yb = std::log(grid_[i + 1]);
    const QuadratureResult r = inverse_psi_integral(m, ya, yb, rel_tol, 2);
    if (!(r.value > 0.0)) throw Error(ErrorKind::QuadratureFailure, "non-positive u increment");
    inc_[i] = r.value;
    quad_err_[i] = std::max(r.error, std::numeric_limits<double>::epsilon() * r.value);
    const double L = yb - ya;
    const double p = std::log(psi_[i + 1] / psi_[i]) / L;
    const double c = 1.0 - p;
    const double model = (std::fabs(c * L) < 1e-12) ? grid_[i] / psi_[i] * L
                                                     : grid_[i] / psi_[i] * std::expm1(c * L) / c;
    model_err_[i] = std::fabs(model - r.value);
  }
  upper_.assign(K + 1, 0.0);
  // Neumaier-compensated suffix sums.
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = K; i-- > 0;) {
    const double x = inc_[i];
    const double t = sum + x;
    comp += (std::fabs(sum) >= std::fabs(x)) ? (sum - t) + x : (x - t) + sum;
    sum = t;
    upper_[i] = sum + comp;
  }
}

std::size_t InverseIntegralTable::cell_of(double q) const {
  const std::size_t K = inc_.size();
  if (q <= grid_.front()) return 0;
  if (q >= grid_.back()) return K - 1;
  auto it = std::upper_bound(grid_.begin(), grid_.end(), q);
  const std::size_t idx = static_cast<std::size_t>(it - grid_.begin());
  return std::min(idx - 1, K - 1);
}

double InverseIntegralTable::integral_from(double q) const {
  if (q <= grid_.front()) return upper_.front();
  if (q >= grid_.back()) return 0.0;
  const std::size_t i = cell_of(q);
  const double L = std::log(grid_[i + 1] / grid_[i]);
  const double y = std::log(q / grid_[i]);
  const double p = std::log(psi_[i + 1] / psi_[i]) / L;
  return upper_[i + 1] + inc_[i] * upper_fraction(1.0 - p, y, L);
}

double InverseIntegralTable::invert(double target) const {
  if (target <= 0.0) return grid_.back();
  if (target >= upper_.front()) return grid_.front();
  // upper_ is strictly decreasing; find i with upper_[i] >= target > upper_[i+1].
  std::size_t lo = 0, hi = upper_.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (upper_[mid] >= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const std::size_t i = lo;
  const double L = std::log(grid_[i + 1] / grid_[i]);
  const double p = std::log(psi_[i + 1] / psi_[i]) / L;
  const double phi = std::clamp((target - upper_[i + 1]) / inc_[i], 0.0, 1.0);
  if (phi >= 1.0) return grid_[i];
  if (phi <= 0.0) return grid_[i + 1];
  const double y = solve_upper_fraction(1.0 - p, phi, L);
  return std::clamp(grid_[i] * std::exp(y), grid_[i], grid_[i + 1]);
}

double InverseIntegralTable::error_from(double q) const {
  const std::size_t i = cell_of(q);
  double e = model_err_[i];
  for (std::size_t j = i; j < quad_err_.size(); ++j) e += quad_err_[j];
  return e;
}

double SpeedTable::u(double q) const {
  if (!tail_valid) throw Error(ErrorKind::InfiniteCandidateSpeed, "u is infinite: tail of 1/psi diverges");
  if (q >= table.hi()) {
    const double p = psi_slope;
    return tail_estimate * std::pow(q / table.hi(), 1.0 - p);
  }
  return tail_estimate + table.integral_from(q);
}

SpeedTable build_speed_table(const XiMeasure& m, double q_min, double q_max, int cells, bool require_cdi) {
  if (cells < 100) invalid("speed table needs at least 100 cells");
  SpeedTable out{m, InverseIntegralTable(m, q_min, q_max, cells, 1e-9)};
  out.psi_slope = psi_log_slope(m, q_max);
  out.tail_valid = out.psi_slope > kTailSlopeThreshold;
  if (out.tail_valid) {
    out.tail_estimate = q_max / ((out.psi_slope - 1.0) * psi(m, q_max));
    // Disagreement with the slope one decade lower measures the drift of p.
    const double q_alt = q_max / 10.0;
    const double p_alt = psi_log_slope(m, q_alt);
    if (p_alt > 1.0) {
      const double alt = q_max / ((p_alt - 1.0) * psi(m, q_max));
      out.tail_error = std::fabs(alt - out.tail_estimate);
    } else {
      out.tail_error = out.tail_estimate;
    }
  } else if (require_cdi) {
    throw Error(ErrorKind::NonCdiMeasure,
                "fitted psi slope " + std::to_string(out.psi_slope) +
                    " at q_max is <= 1.05: candidate speed reported infinite");
  }
  return out;
}

const char* to_string(SpeedStatus s) {
  switch (s) {
    case SpeedStatus::Ok: return "ok";
    case SpeedStatus::AboveGrid: return "above_grid";
    case SpeedStatus::BelowGrid: return "below_grid";
  }
  return "?";
}

SpeedEval v_of(const SpeedTable& table, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) invalid("v(t) needs t > 0");
  if (!table.tail_valid) {
    throw Error(ErrorKind::InfiniteCandidateSpeed, "candidate speed is infinite for " + table.measure.describe());
  }
  SpeedEval out;
  const double tail = table.tail_estimate;
  const double qmax = table.table.hi();
  const double p = table.psi_slope;
  if (t < tail) {
    out.status = SpeedStatus::AboveGrid;
    out.value = qmax * std::pow(t / tail, 1.0 / (1.0 - p));
    // du = tail_error at fixed relative shape.
    out.error_bound = out.value * table.tail_error / ((p - 1.0) * t);
    return out;
  }
  const double target = t - tail;
  if (target >= table.table.total()) {
    out.status = SpeedStatus::BelowGrid;
    out.value = table.table.lo();
    out.error_bound = 0.0;
    return out;
  }
  out.value = table.table.invert(target);
  const double du = table.table.error_from(out.value) + table.tail_error;
  out.error_bound = psi(table.measure, out.value) * du;
  return out;
}

double integral_equation_residual(const SpeedTable& table, double z, double t) {
  if (!(z > 0.0) || !(t > z)) invalid("integral equation residual needs 0 < z < t");
  const SpeedEval vz = v_of(table, z);
  const SpeedEval vt = v_of(table, t);
  QuadratureOptions opts;
  opts.abs_tol = 0.0;
  opts.rel_tol = 1e-10;
  auto f = [&table](double y) {
    const double r = std::exp(y);
    const double v = v_of(table, r).value;
    return psi(table.measure, v) / v * r;
  };
  const double inner = integrate(f, std::log(z), std::log(t), opts);
  return std::log(vt.value) - std::log(vz.value) + inner;
}

FiniteSpeedEval v_n(const XiMeasure& m, int n, double s) {
  if (n < 2) invalid("v_n needs n >= 2");
  if (!(s >= 0.0) || !std::isfinite(s)) invalid("v_n needs s >= 0");
  const double nd = static_cast<double>(n);
  if (s == 0.0) return {nd, false};
  constexpr double kRel = 1e-12;
  // Bracket in y = log q: G(lo) >= s >= G(hi), G(q) = int_q^n dq/psi.
  double ylo = 0.0, yhi = std::log(nd);
  double ghi = 0.0;
  const double g1 = inverse_psi_integral(m, ylo, yhi, kRel).value;
  if (g1 <= s) return {1.0, true};
  while (yhi - ylo > 1e-13 * std::max(1.0, yhi)) {
    const double ymid = 0.5 * (ylo + yhi);
    const double gmid = ghi + inverse_psi_integral(m, ymid, yhi, kRel, 2).value;
    if (gmid >= s) {
      ylo = ymid;
    } else {
      yhi = ymid;
      ghi = gmid;
    }
  }
  return {std::exp(0.5 * (ylo + yhi)), false};
}

FiniteSpeed::FiniteSpeed(const XiMeasure& m, int n, int cells_per_decade) : n_(n) {
  if (n < 2) invalid("finite speed needs n >= 2");
  if (cells_per_decade < 1) invalid("cells per decade must be positive");
  const double decades = std::log10(static_cast<double>(n));
  const int cells = std::max(16, static_cast<int>(std::ceil(decades * cells_per_decade)));
  table_ = InverseIntegralTable(m, 1.0, static_cast<double>(n), cells, 1e-10);
}

FiniteSpeedEval FiniteSpeed::operator()(double s) const {
  if (!(s >= 0.0)) invalid("v_n needs s >= 0");
  if (s == 0.0) return {static_cast<double>(n_), false};
  if (s >= table_.total()) return {1.0, true};
  return {table_.invert(s), false};
}

double psi_reduction(const XiMeasure& m, double delta, double q) {
  if (!(delta >= 0.0 && delta < 1.0)) invalid("delta must lie in [0, 1)");
  return psi(m, (1.0 - delta) * q);
}

XiMeasure reduce_measure(const XiMeasure& m, double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) invalid("delta must lie in [0, 1)");
  const double keep = 1.0 - delta;
  const double wf = keep * keep;
  if (const auto* f = m.as<FiniteAtomic>()) {
    std::vector<WeightedPoint> atoms;
    atoms.reserve(f->atoms.size());
    for (const auto& a : f->atoms) atoms.push_back({a.weight * wf, a.point.scaled(keep)});
    return XiMeasure::finite_atomic(std::move(atoms));
  }
  if (const auto* k = m.as<Kingman>()) return XiMeasure::kingman(k->a * wf);
  if (const auto* l = m.as<LambdaOnUnit>()) {
    if (l->beta) throw Error(ErrorKind::UnsupportedMeasure, "reduction of a Beta density is not representable");
    std::vector<LambdaAtom> atoms;
    for (const auto& a : l->atoms) atoms.push_back({a.weight * wf, a.x * keep});
    return XiMeasure::lambda(std::move(atoms));
  }
  const auto* d = m.as<DyadicFamily>();
  constexpr std::uint64_t kMaxExplicitCoords = 1u << 20;
  std::uint64_t total = 0;
  for (int n = 1; n <= d->levels; ++n) total += dyadic_count(d->rule, n);
  if (total > kMaxExplicitCoords) {
    throw Error(ErrorKind::UnsupportedMeasure, "dyadic family too deep for an explicit reduced measure");
  }
  std::vector<WeightedPoint> atoms;
  for (int n = 1; n <= d->levels; ++n) {
    const std::vector<double> coords(dyadic_count(d->rule, n), keep * std::ldexp(1.0, -n));
    atoms.push_back({d->scale * std::ldexp(1.0, -n) * wf, make_simplex_point(coords)});
  }
  return XiMeasure::finite_atomic(std::move(atoms));
}

XiMeasure joining_lambda(const XiMeasure& m) {
  if (m.as<LambdaOnUnit>() || m.as<Kingman>()) return m;
  if (const auto* f = m.as<FiniteAtomic>()) {
    std::vector<LambdaAtom> atoms;
    for (const auto& a : f->atoms) {
      const double s1 = a.point.s1();
      atoms.push_back({a.weight * s1 * s1 / a.point.s2(), s1});
    }
    return XiMeasure::lambda(std::move(atoms));
  }
  const auto* d = m.as<DyadicFamily>();
  const RegularityVerdict reg = regularity_integral(m, d->levels);
  if (reg.classification == RegularityClass::NonRegularDiverging) {
    throw Error(ErrorKind::NonRegular,
                "regularity integral diverges: the color-joining is the trivial one-block process");
  }
  std::vector<LambdaAtom> atoms;
  for (int n = 1; n <= d->levels; ++n) {
    const double s1 = static_cast<double>(dyadic_count(d->rule, n)) * std::ldexp(1.0, -n);
    atoms.push_back({d->scale * s1, s1});
  }
  return XiMeasure::lambda(std::move(atoms));
}

}  // namespace xicoal
