#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "lobimpact/impact.hpp"
#include "oracles.hpp"

using namespace lobimpact;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

int state(int x1, int x2, int K = 3) { return StateVariable{x1, x2, K}.index(); }

LiquidationRun liquidation_run(const Model& m, const LiquidationConfig& cfg, std::uint64_t seed,
                               double horizon = 2000.0) {
  LiquidationOptions opt;
  opt.horizon = horizon;
  return simulate_with_liquidator(m.params, m.phi, cfg, m.gamma, state(0, 0, m.K), seed, opt);
}

LiquidationConfig active_config() {
  LiquidationConfig cfg;
  cfg.Q0 = 2.0;
  cfg.nu0 = 0.4;
  cfg.a = 0.3;
  cfg.c = 0.5;
  cfg.t0 = 5.0;
  return cfg;
}

// Without price symmetry, so that the indirect term does not cancel between buys and sells.
Model asymmetric_model(std::mt19937_64& rng) {
  Model m;
  m.params = fixtures::random_params(rng, 4, 9, 0.15);
  m.phi = fixtures::random_phi(rng, 3);
  m.gamma = DirichletParams::uniform(2, 3);
  return m;
}

}  // namespace

TEST(Phi0, FrequenciesOverFills) {
  std::vector<LiquidatorFill> fills = {{1.0, 0.1, state(0, -1), state(-1, 0), 0.9},
                                       {2.0, 0.1, state(0, -1), state(0, -1), 0.8},
                                       {3.0, 0.1, state(0, -1), state(-1, 0), 0.7},
                                       {4.0, 0.1, state(-1, 0), state(0, 0), 0.6}};
  const auto phi0 = estimate_phi0(fills, 3);
  EXPECT_DOUBLE_EQ(phi0(state(0, -1), state(-1, 0)), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(phi0(state(0, -1), state(0, -1)), 1.0 / 3.0);
  EXPECT_EQ(phi0(state(-1, 0), state(0, 0)), 1.0);
  EXPECT_EQ(phi0.row_counts[state(0, -1)], 3);
  EXPECT_FALSE(phi0.fallback[state(0, -1)]);
  EXPECT_TRUE(phi0.fallback[state(1, 1)]);
  EXPECT_EQ(phi0(state(1, 1), state(0, 1)), 1.0);
  for (int from = 0; from < 9; ++from) {
    double total = 0.0;
    for (int to = 0; to < 9; ++to) total += phi0(from, to);
    EXPECT_EQ(total, 1.0);
  }
}

TEST(Phi0, TinyFillsLeaveNoDeflationaryMass) {
  std::vector<LiquidatorFill> fills;
  for (int i = 0; i < 9; ++i) fills.push_back({1.0 + i, 0.001, i, state(0, StateVariable::from_index(i, 3).x2), 1.0});
  const auto phi0 = estimate_phi0(fills, 3);
  for (int from = 0; from < 9; ++from)
    for (int to = 0; to < 9; ++to)
      if (is_deflationary(to, 3)) EXPECT_EQ(phi0(from, to), 0.0);
}

TEST(Phi0, NoFillsIsAnError) {
  try {
    estimate_phi0({}, 3);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "no liquidator activity");
  }
}

TEST(Phi0, HalfDepthOrdersWalkFromNegativeImbalance) {
  Model m;
  m.params = HawkesParams(4, 9);
  for (int e = 1; e <= 4; ++e) m.params.nu[e] = 0.2;
  m.phi = TransitionMatrices(4, 9);
  m.gamma = DirichletParams::uniform(2, 3);
  for (auto& g : m.gamma.gamma) g = {4.0, 0.05, 4.0, 8.0};
  LiquidationConfig cfg;
  cfg.Q0 = 100.0;
  cfg.nu0 = 0.5;
  cfg.c = 0.5;
  LiquidationOptions opt;
  opt.horizon = 400.0;
  const auto run = simulate_with_liquidator(m.params, m.phi, cfg, m.gamma, state(0, -1), 3, opt);
  const auto phi0 = estimate_phi0(run.fills, 3);
  // Pool the rows with negative imbalance, weighted by their fill counts.
  double walks = 0.0;
  long fills = 0;
  for (int x1 = -1; x1 <= 1; ++x1) {
    const int from = state(x1, -1);
    for (int to = 0; to < 9; ++to)
      if (is_deflationary(to, 3)) walks += phi0(from, to) * phi0.row_counts[from];
    fills += phi0.row_counts[from];
  }
  ASSERT_GT(fills, 50);
  EXPECT_GT(walks / fills, 0.98);
}

// One-state history where only the liquidator's base rate is active.
TEST(Dir, BaseRateTimesDeflationaryWeight) {
  HawkesParams p = with_liquidator(HawkesParams(4, 9), 0.03, 0.0);
  TransitionMatrices phi(4, 9);
  for (int x1 = -1; x1 <= 1; ++x1) {
    const int from = state(x1, -1);
    for (int to = 0; to < 9; ++to) phi(kLiquidator, from, to) = 0.0;
    phi(kLiquidator, from, state(-1, -1)) = 0.364823;
    phi(kLiquidator, from, state(0, -1)) = 0.635177;
  }
  History h;
  h.initial_state = state(0, -1);
  const ImpactContext ctx{p, phi, h, 3, 0.0, kNaN};
  EXPECT_NEAR(dir_intensity(ctx, 10.0), 0.0109447, 5e-8);
  EXPECT_DOUBLE_EQ(dir_intensity(ctx, 10.0), 0.364823 * 0.03);
  const ImpactContext stopped{p, phi, h, 3, 0.0, 5.0};
  EXPECT_EQ(dir_intensity(stopped, 5.0), 0.0);
  EXPECT_EQ(dir_intensity(stopped, 6.0), 0.0);
  EXPECT_GT(dir_intensity(stopped, 4.0), 0.0);
}

TEST(Dir, ZeroWithoutDeflationaryColumns) {
  HawkesParams p = with_liquidator(HawkesParams(4, 9), 0.5, 0.2);
  TransitionMatrices phi(4, 9);
  for (int from = 0; from < 9; ++from) {
    for (int to = 0; to < 9; ++to) phi(kLiquidator, from, to) = 0.0;
    phi(kLiquidator, from, state(0, StateVariable::from_index(from, 3).x2)) = 1.0;
  }
  History h;
  h.initial_state = state(-1, 0);
  h.events = {{1.0, 0, state(0, 0)}, {2.0, 3, state(-1, 1)}};
  const ImpactContext ctx{p, phi, h, 3, 0.0, kNaN};
  for (double t : {0.5, 1.5, 2.5, 10.0}) EXPECT_EQ(dir_intensity(ctx, t), 0.0);
}

TEST(Indir, SingleFillSingleKernel) {
  HawkesParams p(4, 9);
  const int x = state(-1, -1);
  p.a(kLiquidator, x, 1) = 0.7;
  p.b(kLiquidator, x, 1) = 2.3;
  TransitionMatrices phi(4, 9);
  for (int from = 0; from < 9; ++from) {
    for (int to = 0; to < 9; ++to) phi(1, from, to) = 0.0;
    phi(1, from, state(-1, 0)) = 0.476657;
    phi(1, from, state(0, 0)) = 0.523343;
  }
  History h;
  h.initial_state = state(0, 0);
  h.events = {{3.0, 0, x}};
  const ImpactContext ctx{p, phi, h, 3, 0.0, 3.0};
  for (double t : {3.5, 4.0, 10.0, 100.0})
    EXPECT_NEAR(indir_intensity(ctx, t), 0.476657 * 0.7 * std::pow(t - 3.0 + 1.0, -2.3), 1e-15);
  EXPECT_EQ(indir_intensity(ctx, 3.0), 0.0);  // left limit excludes the fill itself
}

TEST(Indir, NoFillsGivesZero) {
  std::mt19937_64 rng(3);
  const Model m = fixtures::symmetric_model(rng);
  const HawkesParams p = with_liquidator(m.params, 0.1, 0.2);
  const History h = simulate(m.params, m.phi, state(0, 0), 100.0, 4);
  const ImpactContext ctx{p, m.phi, h, 3, 0.0, kNaN};
  for (double t = 0.0; t < 100.0; t += 7.3) EXPECT_EQ(indir_intensity(ctx, t), 0.0);
}

TEST(Identity, HoldsOnSymmetrisedParameters) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    const Model m = fixtures::symmetric_model(rng);
    ASSERT_TRUE(check_price_symmetry(m.params, m.phi, canonical_event_map(4),
                                     canonical_state_map(3), 3).pass);
    const auto run = liquidation_run(m, active_config(), 40 + trial);
    ASSERT_FALSE(run.fills.empty());
    const auto phi = with_phi0(m.phi, estimate_phi0(run.fills, 3));
    const ImpactContext ctx{run.params, phi, run.history, 3, run.t0,
                            run.complete ? run.tau : kNaN};
    std::vector<double> times;
    std::uniform_real_distribution<double> u(0.0, run.end_time);
    for (int i = 0; i < 1000; ++i) times.push_back(u(rng));
    const auto check = impact_identity_check(ctx, times);
    EXPECT_LT(check.max_discrepancy, 1e-9) << "trial " << trial << " at " << check.worst_time;
    double largest_dir = 0.0;
    for (double t : times) largest_dir = std::max(largest_dir, dir_intensity(ctx, t));
    EXPECT_GT(largest_dir, 0.01) << "trial " << trial;
  }
}

TEST(Identity, BothSidesVanishWithoutLiquidator) {
  std::mt19937_64 rng(12);
  const Model m = fixtures::symmetric_model(rng);
  const HawkesParams p = with_liquidator(m.params, 0.0, 0.0);
  const History h = simulate(m.params, m.phi, state(0, 0), 200.0, 9);
  const ImpactContext ctx{p, m.phi, h, 3, 0.0, kNaN};
  std::vector<double> times;
  for (double t = 0.0; t < 200.0; t += 0.37) times.push_back(t);
  EXPECT_LT(impact_identity_check(ctx, times).max_discrepancy, 1e-12);
}

TEST(Identity, BrokenSymmetryIsReported) {
  std::mt19937_64 rng(13);
  Model m = fixtures::symmetric_model(rng);
  m.params.nu[1] += 0.05;
  const auto run = liquidation_run(m, active_config(), 7);
  const auto phi = with_phi0(m.phi, estimate_phi0(run.fills, 3));
  const ImpactContext ctx{run.params, phi, run.history, 3, run.t0, run.complete ? run.tau : kNaN};
  std::vector<double> times;
  for (double t = 0.0; t < run.end_time; t += 0.5) times.push_back(t);
  EXPECT_GT(impact_identity_check(ctx, times).max_discrepancy, 1e-3);
}

TEST(Profile, MatchesQuadrature) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 2; ++trial) {
    const Model m = asymmetric_model(rng);
    const auto run = liquidation_run(m, active_config(), 60 + trial);
    ASSERT_FALSE(run.fills.empty());
    const auto phi = with_phi0(m.phi, estimate_phi0(run.fills, 3));
    const ImpactContext ctx{run.params, phi, run.history, 3, run.t0, run.complete ? run.tau : kNaN};
    for (auto method : {ProfileMethod::exact, ProfileMethod::soe}) {
      ProfileOptions opt;
      opt.method = method;
      const auto prof = impact_profile(ctx, run.end_time, run.complete, opt);
      const auto& bp = prof.breakpoints;
      double q = 0.0, scale = 0.0;
      for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        auto f = [&](double t) { return dir_intensity(ctx, t) + indir_intensity(ctx, t); };
        q += oracle::integrate(f, bp[i], bp[i + 1]);
        scale += oracle::integrate([&](double t) { return std::abs(f(t)); }, bp[i], bp[i + 1]);
        ASSERT_LE(std::abs(prof.profile[i + 1] - q), 1e-8 * scale)
            << "trial " << trial << " at " << bp[i + 1];
      }
      EXPECT_GT(scale, 1e-3);
    }
  }
}

TEST(Profile, StartsAtZeroAndIsContinuous) {
  std::mt19937_64 rng(22);
  const Model m = asymmetric_model(rng);
  const auto run = liquidation_run(m, active_config(), 5);
  const auto phi = with_phi0(m.phi, estimate_phi0(run.fills, 3));
  const ImpactContext ctx{run.params, phi, run.history, 3, run.t0, run.complete ? run.tau : kNaN};
  ProfileOptions opt;
  opt.method = ProfileMethod::exact;
  const auto full = impact_profile(ctx, run.end_time, run.complete, opt);
  EXPECT_EQ(full.profile.front(), 0.0);
  EXPECT_EQ(full.breakpoints.front(), run.t0);
  // Integrating up to a breakpoint from the left agrees with the value carried past it.
  for (std::size_t i = 1; i < full.breakpoints.size(); i += full.breakpoints.size() / 15 + 1) {
    const double t = full.breakpoints[i];
    const auto upto = impact_profile(ctx, t, false, opt);
    EXPECT_NEAR(upto.profile.back(), full.profile[i], 1e-12) << t;
  }
}

TEST(Profile, DirNonNegativeAndZeroAfterTermination) {
  std::mt19937_64 rng(23);
  const Model m = asymmetric_model(rng);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto run = liquidation_run(m, active_config(), seed);
    ASSERT_TRUE(run.complete);
    const auto prof = impact_profile(run, m.phi, 3);
    for (std::size_t i = 0; i < prof.breakpoints.size(); ++i) {
      EXPECT_GE(prof.dir[i], 0.0);
      if (prof.breakpoints[i] >= run.tau) EXPECT_EQ(prof.dir[i], 0.0);
    }
    EXPECT_DOUBLE_EQ(prof.score,
                     *std::max_element(prof.profile.begin(), prof.profile.end()) /
                         (run.tau - run.t0));
  }
}

TEST(Profile, ScoreInvariantUnderTimeTranslation) {
  std::mt19937_64 rng(24);
  const Model m = asymmetric_model(rng);
  const auto run = liquidation_run(m, active_config(), 17);
  const auto phi = with_phi0(m.phi, estimate_phi0(run.fills, 3));
  ProfileOptions opt;
  opt.method = ProfileMethod::exact;
  const ImpactContext ctx{run.params, phi, run.history, 3, run.t0, run.tau};
  const double base = impact_profile(ctx, run.end_time, true, opt).score;
  const double shift = 1024.0;
  History moved = run.history;
  for (auto& ev : moved.events) ev.time += shift;
  const ImpactContext later{run.params, phi, moved, 3, run.t0 + shift, run.tau + shift};
  EXPECT_NEAR(impact_profile(later, run.end_time + shift, true, opt).score, base, 1e-9 * std::abs(base));
}

TEST(Profile, NoLiquidatorGivesZeroProfile) {
  std::mt19937_64 rng(25);
  const Model m = fixtures::symmetric_model(rng);
  LiquidationConfig cfg;
  cfg.nu0 = 0.0;
  cfg.a = 0.0;
  const auto run = liquidation_run(m, cfg, 3, 300.0);
  EXPECT_TRUE(run.fills.empty());
  const auto prof = impact_profile(run, m.phi, 3);
  for (double v : prof.profile) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(prof.score, 0.0);
}

TEST(Symmetry, SymmetrisedParametersPass) {
  std::mt19937_64 rng(31);
  const Model m = fixtures::symmetric_model(rng);
  const auto r = check_price_symmetry(m.params, m.phi, canonical_event_map(4), canonical_state_map(3), 3);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.max_violation, 0.0);
}

TEST(Symmetry, CalibratedBaseRatesAreAsymmetric) {
  std::mt19937_64 rng(32);
  Model m = fixtures::symmetric_model(rng);
  m.params.nu = {0.0, 0.040201, 0.050182, 0.000735, 0.000608};
  const auto r = check_price_symmetry(m.params, m.phi, canonical_event_map(4), canonical_state_map(3), 3);
  EXPECT_FALSE(r.pass);
  EXPECT_NEAR(r.max_violation, 0.050182 - 0.040201, 1e-15);
}

TEST(Symmetry, InvalidMapsAreRejected) {
  std::mt19937_64 rng(33);
  const Model m = fixtures::symmetric_model(rng);
  auto bad_states = canonical_state_map(3);
  bad_states[state(1, 0)] = state(0, 0);
  EXPECT_THROW(check_price_symmetry(m.params, m.phi, canonical_event_map(4), bad_states, 3),
               std::invalid_argument);
  EXPECT_THROW(check_price_symmetry(m.params, m.phi, {0, 1, 1, 3, 4}, canonical_state_map(3), 3),
               std::invalid_argument);
}

TEST(MonteCarlo, IdenticalSeedsGiveCoincidentCurves) {
  std::mt19937_64 rng(41);
  const Model m = fixtures::symmetric_model(rng);
  MonteCarloOptions opt;
  opt.seeds = {9, 9, 9, 9};
  opt.grid_points = 50;
  opt.liquidation.horizon = 2000.0;
  const auto r = monte_carlo_profiles(m, active_config(), opt);
  for (std::size_t g = 0; g < r.grid.size(); ++g) {
    EXPECT_EQ(r.median[g], r.q25[g]);
    EXPECT_EQ(r.median[g], r.q75[g]);
    EXPECT_EQ(r.median[g], r.mean_profile[g]);
  }
  EXPECT_EQ(r.score_sd, 0.0);
}

TEST(MonteCarlo, DeterministicAcrossThreadCounts) {
  std::mt19937_64 rng(42);
  const Model m = fixtures::symmetric_model(rng);
  MonteCarloOptions opt;
  opt.paths = 6;
  opt.seed = 77;
  opt.liquidation.horizon = 2000.0;
  opt.threads = 1;
  const auto a = monte_carlo_profiles(m, active_config(), opt);
  opt.threads = 3;
  const auto b = monte_carlo_profiles(m, active_config(), opt);
  EXPECT_EQ(a.median, b.median);
  EXPECT_EQ(a.score_mean, b.score_mean);
}

TEST(MonteCarlo, NoLiquidatorBaselineIsZero) {
  std::mt19937_64 rng(43);
  const Model m = fixtures::symmetric_model(rng);
  LiquidationConfig cfg;
  cfg.nu0 = 0.0;
  cfg.a = 0.0;
  MonteCarloOptions opt;
  opt.paths = 4;
  opt.liquidation.horizon = 200.0;
  const auto r = monte_carlo_profiles(m, cfg, opt);
  for (std::size_t g = 0; g < r.grid.size(); ++g) {
    EXPECT_EQ(r.median[g], 0.0);
    EXPECT_EQ(r.q25[g], 0.0);
    EXPECT_EQ(r.q75[g], 0.0);
  }
  EXPECT_EQ(r.score_mean, 0.0);
}

TEST(Stress, ShockScalesParametersAndReportsFiniteChanges) {
  std::mt19937_64 rng(44);
  const Model m = fixtures::symmetric_model(rng);
  const HawkesParams up = shock_params(m.params, 0.05);
  EXPECT_DOUBLE_EQ(up.nu[1], 1.05 * m.params.nu[1]);
  EXPECT_DOUBLE_EQ(up.a(2, 3, 4), 1.05 * m.params.a(2, 3, 4));
  EXPECT_DOUBLE_EQ(up.b(2, 3, 4), 1.05 * m.params.b(2, 3, 4));
  MonteCarloOptions opt;
  opt.paths = 4;
  opt.liquidation.horizon = 2000.0;
  const auto rows = stress_test(m, active_config(), {-0.05, 0.0, 0.05}, opt);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].relative_change, 0.0);
  for (const auto& r : rows) {
    EXPECT_TRUE(std::isfinite(r.relative_change));
    EXPECT_TRUE(std::isfinite(r.score_sd));
  }
}
