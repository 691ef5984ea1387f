#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace lobimpact {

struct KsResult {
  double statistic = 0.0;  // sup |F_n - F|
  double p_value = 1.0;
  std::size_t n = 0;
};

// Survival function of the Kolmogorov distribution, P(K > x).
double kolmogorov_survival(double x);
// Asymptotic p-value with Stephens' small-sample correction.
double ks_p_value(double statistic, std::size_t n);
KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);
KsResult ks_test_unit_exponential(std::vector<double> sample);

// Linear-interpolation quantile (type 7) of an ascending sample.
double quantile_sorted(const std::vector<double>& sorted, double p);
double mean(const std::vector<double>& xs);
// Unbiased sample standard deviation.
double sample_sd(const std::vector<double>& xs);
// One-sided p-value of H0: mean <= 0 against mean > 0 (Student t).
double one_sided_t_test_p(const std::vector<double>& xs);

}  // namespace lobimpact
