#include "lobimpact/soe_kernel.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <stdexcept>

namespace lobimpact {

PowerLawSoe::PowerLawSoe(double horizon, double h, double eps, double s_max)
    : h_(h), horizon_(horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("kernel horizon must be positive and finite");
  if (!(h > 0.0) || !(eps > 0.0) || !(s_max > 0.0))
    throw std::invalid_argument("invalid kernel grid parameters");
  const double x_max = horizon + 1.0;
  const int k_min = static_cast<int>(std::ceil(std::log(eps / x_max) / h));
  const int k_max = static_cast<int>(std::ceil(std::log(s_max) / h));
  u_.push_back(k_min * h);  // anchor of the merged constant node
  rates_.push_back(0.0);
  for (int k = k_min; k <= k_max; ++k) {
    u_.push_back(k * h);
    rates_.push_back(std::exp(k * h));
  }
}

void PowerLawSoe::weights(double beta, double* out) const {
  const double lg = std::lgamma(beta);
  const double u0 = u_[0];
  out[0] = h_ * std::exp(beta * (u0 - h_) - lg) / (-std::expm1(-beta * h_));
  for (std::size_t k = 1; k < u_.size(); ++k)
    out[k] = h_ * std::exp(beta * u_[k] - lg - rates_[k]);
}

std::vector<double> PowerLawSoe::weights(double beta) const {
  std::vector<double> w(rates_.size());
  weights(beta, w.data());
  return w;
}

void PowerLawSoe::log_weight_derivatives(double beta, double* out) const {
  const double psi = boost::math::digamma(beta);
  const double q = std::exp(-beta * h_);
  out[0] = (u_[0] - h_) - psi - h_ * q / (1.0 - q);
  for (std::size_t k = 1; k < u_.size(); ++k) out[k] = u_[k] - psi;
}

void PowerLawSoe::decay_factors(double dt, double* out) const {
  out[0] = 1.0;
  for (std::size_t k = 1; k < rates_.size(); ++k) out[k] = std::exp(-rates_[k] * dt);
}

double PowerLawSoe::evaluate(double beta, double d) const {
  auto w = weights(beta);
  double sum = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) sum += w[k] * std::exp(-rates_[k] * d);
  return sum;
}

}  // namespace lobimpact
