#pragma once

#include <functional>

namespace xicoal {

struct QuadratureOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_depth = 60;
  // Fixed coarse panels; their sum sets the absolute target.
  int initial_panels = 16;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
  long evaluations = 0;
};

// Interval-halving adaptive Simpson with Richardson correction.
QuadratureResult adaptive_simpson(const std::function<double(double)>& f,
                                  double a, double b,
                                  const QuadratureOptions& opts = {});

// Same, but throws Error(QuadratureFailure) when tolerance is not met.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureOptions& opts = {});

}  // namespace xicoal
