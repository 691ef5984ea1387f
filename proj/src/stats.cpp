#include "lobimpact/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lobimpact {

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  constexpr double pi = std::numbers::pi;
  if (x < 1.18) {
    // Jacobi-transformed series converges fast for small x.
    const double y = std::exp(-pi * pi / (8.0 * x * x));
    double sum = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double term = std::pow(y, (2.0 * k - 1.0) * (2.0 * k - 1.0));
      sum += term;
      if (term < 1e-300) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / x * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_p_value(double statistic, std::size_t n) {
  if (n == 0) throw std::invalid_argument("KS test needs a non-empty sample");
  const double rn = std::sqrt(static_cast<double>(n));
  return kolmogorov_survival((rn + 0.12 + 0.11 / rn) * statistic);
}

KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw std::invalid_argument("KS test needs a non-empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return {d, ks_p_value(d, sample.size()), sample.size()};
}

KsResult ks_test_unit_exponential(std::vector<double> sample) {
  return ks_test(std::move(sample), [](double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); });
}

double quantile_sorted(const std::vector<double>& s, double p) {
  if (s.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level outside [0,1]");
  const double h = (s.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - lo) * (s[hi] - s[lo]);
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean of an empty sample");
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / xs.size();
}

double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / (xs.size() - 1));
}

double one_sided_t_test_p(const std::vector<double>& xs) {
  if (xs.size() < 2) throw std::invalid_argument("t test needs at least two observations");
  const double sd = sample_sd(xs);
  const double m = mean(xs);
  if (sd == 0.0) return m > 0.0 ? 0.0 : 1.0;
  const double t = m / (sd / std::sqrt(static_cast<double>(xs.size())));
  boost::math::students_t dist(static_cast<double>(xs.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, t));
}

}  // namespace lobimpact
