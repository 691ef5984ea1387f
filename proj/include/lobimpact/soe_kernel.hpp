#pragma once

#include <vector>

namespace lobimpact {

// Sum-of-exponentials representation of the power-law kernel (d+1)^(-beta).
//
// (d+1)^(-beta) = Gamma(beta)^-1 * int_R exp(beta*u - e^u (d+1)) du is discretised with the
// trapezoid rule on the fixed grid u_k = k*h. The rates s_k = e^u_k do not depend on beta, so
// running sums of exp(-s_k (t - T_n)) can be shared by every kernel with any exponent. Nodes
// whose decay over the horizon stays below eps are merged into one constant node (rate 0).
// With the default grid the relative error is below 1e-12 for 1 < beta <= 20 and d <= horizon.
class PowerLawSoe {
 public:
  explicit PowerLawSoe(double horizon, double h = 0.15, double eps = 1e-8, double s_max = 100.0);

  int size() const { return static_cast<int>(rates_.size()); }
  const std::vector<double>& rates() const { return rates_; }
  double horizon() const { return horizon_; }

  // w_k(beta) with (d+1)^(-beta) ~= sum_k w_k exp(-s_k d).
  void weights(double beta, double* out) const;
  std::vector<double> weights(double beta) const;
  // d log w_k / d beta.
  void log_weight_derivatives(double beta, double* out) const;
  // exp(-s_k dt) for every node.
  void decay_factors(double dt, double* out) const;
  // Direct evaluation of the approximation, for testing.
  double evaluate(double beta, double d) const;

 private:
  double h_;
  double horizon_;
  std::vector<double> u_;      // grid abscissae (u_[0] unused for the constant node)
  std::vector<double> rates_;  // rates_[0] == 0
};

}  // namespace lobimpact
