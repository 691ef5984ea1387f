#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lobimpact/hawkes.hpp"
#include "lobimpact/lob_model.hpp"
#include "lobimpact/stats.hpp"

namespace lobimpact {

struct TransitionEstimate {
  TransitionMatrices phi;
  std::vector<std::vector<long>> row_counts;  // [e][x'] number of transitions observed
  std::vector<std::vector<char>> fallback;    // [e][x'] row defaulted to the identity
};

// Empirical transition frequencies per event type; unvisited rows default to the identity.
TransitionEstimate estimate_transitions(const History& history, int d_E, int d_S);

// Gradient with the same layout as HawkesParams.
struct ParamGradient {
  std::vector<double> nu;
  std::vector<double> alpha;
  std::vector<double> beta;
};

enum class LikelihoodMethod { automatic, exact, soe };

struct LikelihoodResult {
  double value = 0.0;
  ParamGradient gradient;    // filled only for the requested target types
  long zero_intensity_event = -1;  // index of an event with zero intensity, if any
  std::string diagnostic;
};

// Intensity part of the log-likelihood on [0, horizon] for one target type:
// sum over type-e events of log lambda_e(T_n) minus Lambda_e(horizon).
LikelihoodResult log_likelihood_target(const HawkesParams& params, const History& history,
                                       double horizon, int target, bool with_gradient,
                                       LikelihoodMethod method = LikelihoodMethod::automatic);
// Sum over market types 1..d_E.
LikelihoodResult log_likelihood(const HawkesParams& params, const History& history,
                                double horizon, bool with_gradient = false,
                                LikelihoodMethod method = LikelihoodMethod::automatic);

struct OptimizerConfig {
  int max_iterations = 5000;
  double gradient_tolerance = 1e-6;  // infinity norm of the per-event objective gradient
  double armijo_c = 1e-4;
  int restarts = 4;
  int memory = 10;                   // L-BFGS history length
  double initial_alpha = 0.1;
  double initial_beta = 2.0;
  double beta_max = 20.0;
  std::uint64_t seed = 20240101;
  LikelihoodMethod method = LikelihoodMethod::automatic;
  bool record_trace = false;  // keep the per-event log-likelihood after every accepted step
};

struct TargetFitReport {
  int target = 0;
  double log_likelihood = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool degenerate = false;  // no events of this type
  double gradient_norm = 0.0;
  std::vector<double> restart_log_likelihoods;
  std::vector<std::vector<double>> traces;  // per restart, when record_trace is set
};

struct HawkesFit {
  HawkesParams params;
  std::vector<TargetFitReport> reports;  // one per market type, in type order
  bool converged() const;
};

// Maximum-likelihood fit of (nu, alpha, beta), one target type at a time.
TargetFitReport fit_target(const History& history, double horizon, int target,
                           const OptimizerConfig& config, HawkesParams& params);
HawkesFit fit_hawkes(const History& history, double horizon, int d_E, int d_S,
                     const OptimizerConfig& config = {});
// Same as fit_hawkes with an explicit order of the per-type fits.
HawkesFit fit_hawkes_in_order(const History& history, double horizon, int d_E, int d_S,
                              const OptimizerConfig& config, const std::vector<int>& order);

struct DirichletFitResult {
  std::vector<double> gamma;
  bool converged = false;
  bool floored = false;       // some components were floored at 1e-9
  bool insufficient = false;  // too few samples; all-ones fallback
  int iterations = 0;
  bool used_newton = false;
};

// Dirichlet MLE by the digamma fixed point with a Newton fallback.
DirichletFitResult fit_dirichlet(const std::vector<std::vector<double>>& samples,
                                 double tolerance = 1e-8, int max_iterations = 100000);

struct DirichletStateFit {
  DirichletParams params;
  std::vector<DirichletFitResult> states;
};

// samples_by_state[x] holds the normalised interleaved volume vectors observed in state x.
DirichletStateFit fit_dirichlet_by_state(
    const std::vector<std::vector<std::vector<double>>>& samples_by_state, int n, int K);

double inverse_digamma(double y);

struct ResidualSeries {
  int event_type = 0;
  std::vector<double> residuals;  // Lambda_e(T_j) - Lambda_e(T_{j-1}), with T_0 = 0
  bool ks_skipped = false;        // fewer than 10 events
  KsResult ks;
  std::vector<std::pair<double, double>> qq;  // (empirical, theoretical) quantiles
};

// Time-changed inter-arrival times per market type plus KS tests against Exp(1).
std::vector<ResidualSeries> residual_diagnostics(const HawkesParams& params,
                                                 const History& history, double horizon,
                                                 LikelihoodMethod method = LikelihoodMethod::automatic);

struct CalibrationReport {
  HawkesFit hawkes;
  TransitionEstimate transitions;
  DirichletStateFit dirichlet;
  std::vector<ResidualSeries> residuals;
};

}  // namespace lobimpact
