#pragma once

#include <memory>
#include <vector>

#include "lobimpact/hawkes.hpp"
#include "lobimpact/soe_kernel.hpp"

namespace lobimpact::detail {

// Log-likelihood of one target type with its gradient, for repeated evaluation on a fixed
// history. Kernel parameters are grouped by source (type, state): group g = src * d_S + x.
class LikelihoodEngine {
 public:
  LikelihoodEngine(const History& history, double horizon, int d_E, int d_S, bool use_soe,
                   std::size_t cache_budget_bytes = std::size_t{1} << 30);

  int groups() const { return groups_; }
  long count(int target) const;
  double horizon() const { return horizon_; }

  // alpha and beta point at `groups()` entries for this target. Gradient outputs may be null.
  // Returns -inf and sets *zero_index when an observed event has zero intensity.
  double evaluate(int target, double nu, const double* alpha, const double* beta, double* g_nu,
                  double* g_alpha, double* g_beta, long* zero_index) const;

 private:
  double evaluate_exact(int target, double nu, const double* alpha, const double* beta,
                        double* g_nu, double* g_alpha, double* g_beta, long* zero_index) const;
  double evaluate_soe(int target, double nu, const double* alpha, const double* beta,
                      double* g_nu, double* g_alpha, double* g_beta, long* zero_index) const;
  void decay_row(std::size_t n, double* out) const;  // exp(-s_k (t_n - t_{n-1}))

  int d_S_;
  int groups_;
  double horizon_;
  bool use_soe_;
  std::vector<double> times_;
  std::vector<int> types_;
  std::vector<int> group_;
  std::unique_ptr<PowerLawSoe> basis_;
  int nodes_ = 0;
  std::vector<double> decay_cache_;  // [(n - 1) * nodes + k], empty if over budget
};

}  // namespace lobimpact::detail
