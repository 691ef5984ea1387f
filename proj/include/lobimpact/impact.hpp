#pragma once

#include <cstdint>
#include <vector>

#include "lobimpact/hawkes.hpp"
#include "lobimpact/model_io.hpp"

namespace lobimpact {

// Price-move partition of the state space: x1 = +1 inflationary, x1 = -1 deflationary.
inline bool is_inflationary(int state, int K) { return StateVariable::from_index(state, K).x1 > 0; }
inline bool is_deflationary(int state, int K) { return StateVariable::from_index(state, K).x1 < 0; }

struct Phi0Estimate {
  int d_S = 0;
  std::vector<double> phi;        // [from * d_S + to]
  std::vector<long> row_counts;   // fills observed from each state
  std::vector<char> fallback;     // row never visited at a fill

  double operator()(int from, int to) const { return phi[static_cast<std::size_t>(from) * d_S + to]; }
};

// Empirical transitions over the liquidator's fills. Unvisited rows (x1, x2) put unit mass on
// (0, x2): no price move, so they add nothing to either side of the state partition.
Phi0Estimate estimate_phi0(const std::vector<LiquidatorFill>& fills, int K);
// Copy of the market transitions with slot 0 replaced by phi0.
TransitionMatrices with_phi0(const TransitionMatrices& market, const Phi0Estimate& phi0);

// Everything needed to evaluate the impact intensities along one path. params is augmented
// with the liquidator, phi carries phi0 in slot 0, and the liquidator is active on [t0, tau).
struct ImpactContext {
  const HawkesParams& params;
  const TransitionMatrices& phi;
  const History& history;
  int K = 3;
  double t0 = 0.0;
  double tau = 0.0;
};

// lambda_0(t) including the activity window.
double liquidator_intensity(const ImpactContext& ctx, double t);
double dir_intensity(const ImpactContext& ctx, double t);
double indir_intensity(const ImpactContext& ctx, double t);

struct IdentityCheck {
  double max_discrepancy = 0.0;
  double worst_time = 0.0;
};

// Compares lambda^- - lambda^+ by direct hybrid-intensity summation with Dir + Indir.
IdentityCheck impact_identity_check(const ImpactContext& ctx, const std::vector<double>& times);

enum class ProfileMethod { exact, soe };

struct ImpactProfile {
  std::vector<double> breakpoints;  // t0, then event and grid times up to the end
  std::vector<double> profile;      // integral of Dir + Indir from t0
  std::vector<double> dir;          // right limits at the breakpoints
  std::vector<double> indir;
  double t0 = 0.0;
  double tau = 0.0;
  double end = 0.0;
  double score = 0.0;    // max profile / (tau - t0)
  bool truncated = false;  // end < tau
  bool complete = false;   // liquidation finished before the end

  // Linear interpolation between breakpoints; exact at breakpoints.
  double at(double t) const;
};

struct ProfileOptions {
  ProfileMethod method = ProfileMethod::soe;
  std::vector<double> extra_times;  // evaluated exactly in addition to the event times
};

// Piecewise closed-form integral of Dir + Indir on [t0, end].
ImpactProfile impact_profile(const ImpactContext& ctx, double end, bool complete,
                             const ProfileOptions& options = {});
// Convenience wrapper for a simulated run; estimates phi0 from the run's fills.
ImpactProfile impact_profile(const LiquidationRun& run, const TransitionMatrices& market_phi, int K,
                             const ProfileOptions& options = {});

struct SymmetryReport {
  bool pass = false;
  double max_violation = 0.0;
};

// sigma_E permutes 1..d_E (entry 0 ignored); sigma_S maps each inflationary state to a
// deflationary one (other entries ignored).
SymmetryReport check_price_symmetry(const HawkesParams& params, const TransitionMatrices& phi,
                                    const std::vector<int>& sigma_E,
                                    const std::vector<int>& sigma_S, int K, double tol = 1e-12);
std::vector<int> canonical_event_map(int d_E);
std::vector<int> canonical_state_map(int K);  // (x1, x2) -> (-x1, -x2)
// Averages a model with its sigma-image; sigma_E must be an involution.
void symmetrise(HawkesParams& params, TransitionMatrices& phi, const std::vector<int>& sigma_E,
                const std::vector<int>& sigma_S, int K);

struct MonteCarloOptions {
  int paths = 100;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // explicit per-path seeds; overrides seed when non-empty
  int grid_points = 201;
  int initial_state = -1;  // -1: the centre state (0, 0)
  LiquidationOptions liquidation;
  ProfileMethod method = ProfileMethod::soe;
  int threads = 0;  // 0: hardware concurrency
  bool keep_paths = false;  // return every run and its profile
};

struct PathSummary {
  std::uint64_t seed = 0;
  double tau = 0.0;
  double score = 0.0;
  bool complete = false;
  long events = 0;
  long fills = 0;
};

struct MonteCarloResult {
  std::vector<double> grid;
  std::vector<double> median, q25, q75, mean_profile;
  std::vector<PathSummary> paths;
  double score_mean = 0.0;
  double score_sd = 0.0;
  std::vector<double> profile_at_tau;  // per path
  std::vector<LiquidationRun> runs;      // when keep_paths is set
  std::vector<ImpactProfile> profiles;   // when keep_paths is set
};

std::uint64_t path_seed(std::uint64_t base, int path);

// Runs independent liquidation paths. The profile of each path is evaluated on a common grid
// over [t0, max end]; past its own end a path holds its final value.
MonteCarloResult monte_carlo_profiles(const Model& model, const LiquidationConfig& liquidation,
                                      const MonteCarloOptions& options);

struct StressRow {
  double shock = 0.0;
  double score_mean = 0.0;
  double score_sd = 0.0;
  double relative_change = 0.0;  // versus the unshocked mean
};

// Scales nu, alpha and beta of the market by (1 + shock).
HawkesParams shock_params(const HawkesParams& params, double shock);
// Monte Carlo score statistics for every shock, with common seeds across shocks.
std::vector<StressRow> stress_test(const Model& model, const LiquidationConfig& liquidation,
                                   const std::vector<double>& shocks,
                                   const MonteCarloOptions& options);

}  // namespace lobimpact
