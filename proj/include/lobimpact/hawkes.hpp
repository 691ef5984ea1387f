#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "lobimpact/lob_model.hpp"
#include "lobimpact/soe_kernel.hpp"

namespace lobimpact {

// Event type codes. Code 0 is reserved for the liquidator; market types are 1..d_E.
inline constexpr int kLiquidator = 0;
inline constexpr int kSellMarket = 1;
inline constexpr int kBuyMarket = 2;
inline constexpr int kDeflationary = 3;
inline constexpr int kInflationary = 4;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EventRecord {
  double time = 0.0;
  int type = 1;
  int state = 0;  // flat index of the state right after the event
};

struct History {
  int initial_state = 0;  // X(0)
  std::vector<EventRecord> events;

  void validate(int d_E, int d_S) const;
  // State in force just before time t, i.e. after the last event with time < t.
  int state_before(double t) const;
};

// Power-law kernel parameters alpha[e'][x'][e], beta[e'][x'][e]. All tensors carry the
// liquidator slot 0 so that event codes index them directly; it stays zero for a pure market.
struct HawkesParams {
  int d_E = 4;
  int d_S = 9;
  std::vector<double> nu;     // d_E + 1 entries
  std::vector<double> alpha;  // (d_E + 1) * d_S * (d_E + 1)
  std::vector<double> beta;

  HawkesParams() = default;
  HawkesParams(int d_E, int d_S);

  int types() const { return d_E + 1; }
  std::size_t index(int src, int x, int tgt) const {
    return (static_cast<std::size_t>(src) * d_S + x) * types() + tgt;
  }
  double& a(int src, int x, int tgt) { return alpha[index(src, x, tgt)]; }
  double a(int src, int x, int tgt) const { return alpha[index(src, x, tgt)]; }
  double& b(int src, int x, int tgt) { return beta[index(src, x, tgt)]; }
  double b(int src, int x, int tgt) const { return beta[index(src, x, tgt)]; }
  // L1 norm alpha / (beta - 1) of kappa_{src,tgt}(., x).
  double norm(int src, int x, int tgt) const { return a(src, x, tgt) / (b(src, x, tgt) - 1.0); }
  void validate() const;
};

// phi[e][x'][x] for e = 0..d_E; phi[0] is the liquidator's matrix.
struct TransitionMatrices {
  int d_E = 4;
  int d_S = 9;
  std::vector<double> phi;

  TransitionMatrices() = default;
  TransitionMatrices(int d_E, int d_S);  // identity for every type
  std::size_t index(int e, int from, int to) const {
    return (static_cast<std::size_t>(e) * d_S + from) * d_S + to;
  }
  double& operator()(int e, int from, int to) { return phi[index(e, from, to)]; }
  double operator()(int e, int from, int to) const { return phi[index(e, from, to)]; }
  void validate(double tol = 1e-12) const;
  // Largest violation of: sell orders never move the price up, buy orders never down.
  double sign_constraint_violation(int K) const;
};

// Liquidation schedule parameters.
struct LiquidationConfig {
  double Q0 = 10.0;
  double nu0 = 0.03;
  double a = 0.0;
  double c = 0.075;
  double t0 = 0.0;
  void validate() const;
};

// kappa_{e',0} = a * kappa_{e',1}, kappa_{0,e} = kappa_{1,e}, nu_0 set.
HawkesParams with_liquidator(const HawkesParams& market, double nu0, double a);

// Exact evaluations by direct summation over the history.
double intensity_at(const HawkesParams& params, const History& history, double t, int target);
double hybrid_intensity_at(const HawkesParams& params, const TransitionMatrices& phi,
                           const History& history, double t, int target, int to_state);
// Lambda_e(t1) - Lambda_e(t0) for e = 0..d_E.
std::vector<double> compensator_increment(const HawkesParams& params, const History& history,
                                          double t0, double t1);
// Lambda_e(t) for e = 0..d_E.
std::vector<double> compensator(const HawkesParams& params, const History& history, double t);

// Heuristic stationarity diagnostic: spectral radius of max_{x'} ||kappa_{e',e}(., x')||_1
// over market types.
double spectral_radius_heuristic(const HawkesParams& params);

// Running kernel sums on the sum-of-exponentials grid. Tracks, for every target type, the
// excitation sum_n alpha w_k exp(-s_k (t - T_n)) node by node.
class SoeIntensityTracker {
 public:
  SoeIntensityTracker(const HawkesParams& params, const PowerLawSoe& basis);

  // Moves the clock forward by dt. If integrals is non-null it receives, per target type,
  // the integral of the excitation over the step.
  void advance(double dt, double* integrals = nullptr);
  void add_event(int type, int state);
  double excitation(int target) const;
  double intensity(int target) const { return params_.nu[target] + excitation(target); }
  void reset();

 private:
  const HawkesParams& params_;
  const PowerLawSoe& basis_;
  int nodes_;
  std::vector<char> active_;      // per target type: any nonzero kernel
  std::vector<double> table_;     // alpha * w_k(beta), [(src, x, tgt), k]
  std::vector<double> sums_;      // [tgt, k]
  std::vector<double> decay_;     // scratch
  std::vector<double> gain_;      // scratch
};

History simulate(const HawkesParams& params, const TransitionMatrices& phi, int initial_state,
                 double horizon, std::uint64_t seed);

struct LiquidatorFill {
  double time = 0.0;
  double size = 0.0;  // normalised child order size q_M
  int state_before = 0;
  int state_after = 0;
  double inventory_after = 0.0;
};

struct LiquidationRun {
  HawkesParams params;  // augmented with the liquidator slot
  History history;      // all events including the liquidator's (type 0)
  std::vector<LiquidatorFill> fills;
  double t0 = 0.0;
  double tau = std::numeric_limits<double>::quiet_NaN();
  double end_time = 0.0;
  bool complete = false;
};

struct LiquidationOptions {
  double horizon = 1e6;          // hard stop of the simulation
  double transient_factor = 2.0;  // keep simulating for transient_factor * (tau - t0) after tau
  int max_attempts = 10000;       // rejection budget of the conditional volume sampler
};

LiquidationRun simulate_with_liquidator(const HawkesParams& market,
                                        const TransitionMatrices& phi,
                                        const LiquidationConfig& liquidation,
                                        const DirichletParams& gamma, int initial_state,
                                        std::uint64_t seed, const LiquidationOptions& options = {});

}  // namespace lobimpact
