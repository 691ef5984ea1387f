#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <stdexcept>

#include "lobimpact/calibration.hpp"

namespace lobimpact {

namespace {

constexpr double kFloor = 1e-9;
constexpr double kAlphaCap = 1e8;  // beyond this the MLE is taken to diverge
constexpr int kStallWindow = 50;

double digamma(double x) { return boost::math::digamma(x); }
double trigamma(double x) { return boost::math::trigamma(x); }

double max_rel_change(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    m = std::max(m, std::abs(a[k] - b[k]) / std::max(1.0, std::abs(b[k])));
  return m;
}

// One Newton step on the Dirichlet log-likelihood, exploiting the diagonal-plus-constant Hessian.
std::vector<double> newton_step(const std::vector<double>& alpha, const std::vector<double>& logp) {
  const std::size_t d = alpha.size();
  double sum = 0.0;
  for (double a : alpha) sum += a;
  const double ps = digamma(sum);
  const double z = trigamma(sum);
  std::vector<double> g(d), q(d);
  double num = 0.0, den = 1.0 / z;
  for (std::size_t k = 0; k < d; ++k) {
    g[k] = ps - digamma(alpha[k]) + logp[k];
    q[k] = -trigamma(alpha[k]);
    num += g[k] / q[k];
    den += 1.0 / q[k];
  }
  const double b = num / den;
  std::vector<double> step(d);
  for (std::size_t k = 0; k < d; ++k) step[k] = (g[k] - b) / q[k];
  std::vector<double> next(d);
  double scale = 1.0;
  for (int tries = 0; tries < 60; ++tries) {
    bool ok = true;
    for (std::size_t k = 0; k < d; ++k) {
      next[k] = alpha[k] - scale * step[k];
      if (!(next[k] > 0.0)) ok = false;
    }
    if (ok) return next;
    scale *= 0.5;
  }
  return alpha;
}

}  // namespace

double inverse_digamma(double y) {
  constexpr double euler = 0.57721566490153286;
  double x = (y >= -2.22) ? std::exp(y) + 0.5 : -1.0 / (y + euler);
  for (int i = 0; i < 8; ++i) x -= (digamma(x) - y) / trigamma(x);
  return x;
}

DirichletFitResult fit_dirichlet(const std::vector<std::vector<double>>& samples, double tolerance,
                                 int max_iterations) {
  if (samples.empty()) throw std::invalid_argument("Dirichlet fit needs samples");
  const std::size_t d = samples.front().size();
  if (d < 2) throw std::invalid_argument("Dirichlet samples need at least two components");
  DirichletFitResult res;
  if (samples.size() < d + 1) {
    res.gamma.assign(d, 1.0);
    res.insufficient = true;
    return res;
  }
  const double N = static_cast<double>(samples.size());
  std::vector<double> logp(d, 0.0), m(d, 0.0), m2(d, 0.0);
  for (const auto& s : samples) {
    if (s.size() != d) throw std::invalid_argument("Dirichlet samples differ in dimension");
    double total = 0.0;
    for (double v : s) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("negative volume sample");
      total += std::max(v, kFloor);
    }
    for (std::size_t k = 0; k < d; ++k) {
      if (s[k] < kFloor) res.floored = true;
      const double p = std::max(s[k], kFloor) / total;
      logp[k] += std::log(p);
      m[k] += p;
      m2[k] += p * p;
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    logp[k] /= N;
    m[k] /= N;
    m2[k] /= N;
  }
  // Moment-matching start from the first component's mean and variance.
  const double var = m2[0] - m[0] * m[0];
  double precision = (var > 0.0) ? m[0] * (1.0 - m[0]) / var - 1.0 : 1.0;
  if (!(precision > 0.0) || !std::isfinite(precision)) precision = 1.0;
  precision = std::min(precision, kAlphaCap);
  std::vector<double> alpha(d);
  for (std::size_t k = 0; k < d; ++k) alpha[k] = std::max(precision * m[k], 1e-6);

  double best_change = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  bool newton = false;
  for (int it = 0; it < max_iterations; ++it) {
    std::vector<double> next(d);
    if (!newton) {
      double sum = 0.0;
      for (double a : alpha) sum += a;
      const double ps = digamma(sum);
      for (std::size_t k = 0; k < d; ++k) next[k] = inverse_digamma(ps + logp[k]);
    } else {
      next = newton_step(alpha, logp);
    }
    const double change = max_rel_change(next, alpha);
    alpha = next;
    res.iterations = it + 1;
    double sum = 0.0;
    for (double a : alpha) sum += a;
    if (!std::isfinite(sum) || sum > kAlphaCap) break;
    if (change < tolerance) {
      res.converged = true;
      break;
    }
    if (change < 0.999 * best_change) {
      best_change = change;
      since_improvement = 0;
    } else if (++since_improvement >= kStallWindow && !newton) {
      newton = true;
      res.used_newton = true;
      since_improvement = 0;
    }
  }
  res.gamma = alpha;
  return res;
}

DirichletStateFit fit_dirichlet_by_state(
    const std::vector<std::vector<std::vector<double>>>& samples_by_state, int n, int K) {
  if (static_cast<int>(samples_by_state.size()) != num_states(K))
    throw std::invalid_argument("need one sample set per state");
  DirichletStateFit out{DirichletParams::uniform(n, K), {}};
  for (int x = 0; x < num_states(K); ++x) {
    const auto& samples = samples_by_state[x];
    DirichletFitResult r;
    if (samples.size() < static_cast<std::size_t>(2 * n + 1)) {
      r.gamma.assign(2 * n, 1.0);
      r.insufficient = true;
    } else {
      r = fit_dirichlet(samples);
      for (double& g : r.gamma) g = std::clamp(g, 1e-9, 1e8);
    }
    out.params.gamma[x] = r.gamma;
    out.states.push_back(std::move(r));
  }
  out.params.validate();
  return out;
}

}  // namespace lobimpact
