#pragma once

#include <vector>

namespace xicoal {

// Linear-interpolation sample quantile (Hyndman-Fan type 7); p in [0, 1].
double quantile(std::vector<double> values, double p);

struct MeanSe {
  double mean = 0.0;
  double standard_error = 0.0;
};
MeanSe mean_and_se(const std::vector<double>& values);

struct KsResult {
  double statistic = 0.0;  // sup |F1 - F2|
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
// distribution and Stephens' small-sample correction.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// Q_KS(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)
double kolmogorov_survival(double lambda);

}  // namespace xicoal
