#include "xicoal/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "xicoal/error.hpp"

namespace xicoal {
namespace {

struct Simpson {
  const std::function<double(double)>& f;
  int max_depth;
  long evals = 0;
  bool converged = true;
  double err = 0.0;

  double eval(double x) {
    ++evals;
    return f(x);
  }

  double refine(double a, double b, double fa, double fm, double fb,
                double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = eval(lm);
    const double frm = eval(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::fabs(delta) <= 15.0 * tol) {
      err += std::fabs(delta) / 15.0;
      return left + right + delta / 15.0;
    }
    if (depth >= max_depth || m <= a || m >= b) {
      converged = false;
      err += std::fabs(delta) / 15.0;
      return left + right + delta / 15.0;
    }
    return refine(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           refine(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }
};

}  // namespace

QuadratureResult adaptive_simpson(const std::function<double(double)>& f,
                                  double a, double b,
                                  const QuadratureOptions& opts) {
  QuadratureResult out;
  if (a == b) return out;
  const int kPanels = std::max(1, opts.initial_panels);
  const double h = (b - a) / kPanels;
  Simpson s{f, opts.max_depth};
  std::vector<double> xs(2 * kPanels + 1), fs(2 * kPanels + 1), wholes(kPanels);
  for (int i = 0; i <= 2 * kPanels; ++i) {
    xs[i] = (i == 2 * kPanels) ? b : a + 0.5 * h * i;
    fs[i] = s.eval(xs[i]);
  }
  double coarse = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double w = xs[2 * p + 2] - xs[2 * p];
    wholes[p] = w / 6.0 * (fs[2 * p] + 4.0 * fs[2 * p + 1] + fs[2 * p + 2]);
    coarse += wholes[p];
  }
  const double tol = std::max(opts.abs_tol, opts.rel_tol * std::fabs(coarse));
  double total = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    total += s.refine(xs[2 * p], xs[2 * p + 2], fs[2 * p], fs[2 * p + 1],
                      fs[2 * p + 2], wholes[p], tol / kPanels, 1);
  }
  out.value = total;
  out.error = s.err;
  out.evaluations = s.evals;
  out.converged = s.converged && std::isfinite(total);
  return out;
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureOptions& opts) {
  const auto r = adaptive_simpson(f, a, b, opts);
  if (!r.converged) {
    // Accept results whose accumulated error estimate still meets tolerance.
    const double tol = std::max(opts.abs_tol, opts.rel_tol * std::fabs(r.value));
    if (!std::isfinite(r.value) || r.error > tol) {
      std::ostringstream msg;
      msg << "adaptive quadrature on [" << a << ", " << b
          << "] did not converge (error estimate " << r.error << ")";
      throw Error(ErrorKind::QuadratureFailure, msg.str());
    }
  }
  return r.value;
}

}  // namespace xicoal
