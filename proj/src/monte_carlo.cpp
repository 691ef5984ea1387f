#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "lobimpact/impact.hpp"
#include "lobimpact/stats.hpp"

namespace lobimpact {

std::uint64_t path_seed(std::uint64_t base, int path) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(path) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

struct PathResult {
  PathSummary summary;
  std::vector<double> breakpoints;
  std::vector<double> profile;
  double end = 0.0;
  double at_tau = 0.0;
  LiquidationRun run;
  ImpactProfile full;
};

PathResult run_path(const Model& model, const LiquidationConfig& liq,
                    const MonteCarloOptions& opt, std::uint64_t seed, int initial_state) {
  LiquidationRun run = simulate_with_liquidator(model.params, model.phi, liq, model.gamma,
                                                initial_state, seed, opt.liquidation);
  ProfileOptions popt;
  popt.method = opt.method;
  ImpactProfile prof = impact_profile(run, model.phi, model.K, popt);
  PathResult r;
  r.summary = {seed, run.tau, prof.score, run.complete,
               static_cast<long>(run.history.events.size()), static_cast<long>(run.fills.size())};
  r.at_tau = std::isnan(run.tau) ? prof.profile.back() : prof.at(run.tau);
  r.end = prof.end;
  if (opt.keep_paths) {
    r.breakpoints = prof.breakpoints;
    r.profile = prof.profile;
    r.run = std::move(run);
    r.full = std::move(prof);
  } else {
    r.breakpoints = std::move(prof.breakpoints);
    r.profile = std::move(prof.profile);
  }
  return r;
}

// Profile value at t, holding the final value past the end of the path.
double value_at(const PathResult& p, double t) {
  const auto& bp = p.breakpoints;
  if (t <= bp.front()) return p.profile.front();
  if (t >= bp.back()) return p.profile.back();
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(bp.begin(), bp.end(), t) - bp.begin());
  return p.profile[i - 1] +
         (t - bp[i - 1]) / (bp[i] - bp[i - 1]) * (p.profile[i] - p.profile[i - 1]);
}

}  // namespace

MonteCarloResult monte_carlo_profiles(const Model& model, const LiquidationConfig& liquidation,
                                      const MonteCarloOptions& options) {
  model.validate();
  liquidation.validate();
  const int paths = options.seeds.empty() ? options.paths : static_cast<int>(options.seeds.size());
  if (paths < 2) throw std::invalid_argument("Monte Carlo needs at least two paths");
  if (options.grid_points < 2) throw std::invalid_argument("grid needs at least two points");
  const int initial =
      options.initial_state >= 0 ? options.initial_state : StateVariable{0, 0, model.K}.index();

  std::vector<PathResult> results(paths);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < paths; i = next++) {
      try {
        const std::uint64_t seed =
            options.seeds.empty() ? path_seed(options.seed, i) : options.seeds[i];
        results[i] = run_path(model, liquidation, options, seed, initial);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  int threads = options.threads > 0 ? options.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, paths);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  MonteCarloResult out;
  double last = liquidation.t0;
  for (const auto& r : results) last = std::max(last, r.end);
  const int G = options.grid_points;
  for (int g = 0; g < G; ++g)
    out.grid.push_back(liquidation.t0 + (last - liquidation.t0) * g / (G - 1));
  out.median.resize(G);
  out.q25.resize(G);
  out.q75.resize(G);
  out.mean_profile.resize(G);
  std::vector<double> column(paths);
  for (int g = 0; g < G; ++g) {
    for (int i = 0; i < paths; ++i) column[i] = value_at(results[i], out.grid[g]);
    out.mean_profile[g] = mean(column);
    std::sort(column.begin(), column.end());
    out.median[g] = quantile_sorted(column, 0.5);
    out.q25[g] = quantile_sorted(column, 0.25);
    out.q75[g] = quantile_sorted(column, 0.75);
  }
  std::vector<double> scores;
  for (const auto& r : results) {
    out.paths.push_back(r.summary);
    scores.push_back(r.summary.score);
    out.profile_at_tau.push_back(r.at_tau);
  }
  if (options.keep_paths)
    for (auto& r : results) {
      out.runs.push_back(std::move(r.run));
      out.profiles.push_back(std::move(r.full));
    }
  out.score_mean = mean(scores);
  out.score_sd = sample_sd(scores);
  return out;
}

HawkesParams shock_params(const HawkesParams& params, double shock) {
  if (!(shock > -1.0)) throw std::invalid_argument("shock must exceed -100%");
  HawkesParams out = params;
  const double f = 1.0 + shock;
  for (double& v : out.nu) v *= f;
  for (double& v : out.alpha) v *= f;
  for (double& v : out.beta) v *= f;
  for (double v : out.beta)
    if (!(v > 1.0)) throw std::invalid_argument("shock pushes a kernel exponent to 1 or below");
  return out;
}

std::vector<StressRow> stress_test(const Model& model, const LiquidationConfig& liquidation,
                                   const std::vector<double>& shocks,
                                   const MonteCarloOptions& options) {
  const MonteCarloResult base = monte_carlo_profiles(model, liquidation, options);
  std::vector<StressRow> rows;
  for (double s : shocks) {
    StressRow row;
    row.shock = s;
    if (s == 0.0) {
      row.score_mean = base.score_mean;
      row.score_sd = base.score_sd;
    } else {
      Model shocked = model;
      shocked.params = shock_params(model.params, s);
      const MonteCarloResult r = monte_carlo_profiles(shocked, liquidation, options);
      row.score_mean = r.score_mean;
      row.score_sd = r.score_sd;
    }
    row.relative_change =
        base.score_mean != 0.0 ? (row.score_mean - base.score_mean) / base.score_mean : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace lobimpact
