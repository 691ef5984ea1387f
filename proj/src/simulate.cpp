#include <cmath>
#include <random>

#include "lobimpact/hawkes.hpp"

namespace lobimpact {

namespace {

constexpr std::size_t kMaxEvents = 50'000'000;

int draw_next_state(const TransitionMatrices& phi, int type, int from, double u) {
  double acc = 0.0;
  int last_positive = from;
  for (int to = 0; to < phi.d_S; ++to) {
    const double p = phi(type, from, to);
    if (p <= 0.0) continue;
    acc += p;
    last_positive = to;
    if (u < acc) return to;
  }
  return last_positive;  // rounding slack of a row summing to 1 - ulp
}

int draw_type(const std::vector<double>& lambda, double total, double u) {
  const double target = u * total;
  double acc = 0.0;
  int last_positive = 0;
  for (int e = 0; e < static_cast<int>(lambda.size()); ++e) {
    if (lambda[e] <= 0.0) continue;
    acc += lambda[e];
    last_positive = e;
    if (target < acc) return e;
  }
  return last_positive;
}

void check_inputs(const HawkesParams& params, const TransitionMatrices& phi, int initial_state) {
  params.validate();
  phi.validate(1e-9);
  if (phi.d_E != params.d_E || phi.d_S != params.d_S)
    throw std::invalid_argument("transition matrices do not match the Hawkes parameters");
  if (initial_state < 0 || initial_state >= params.d_S)
    throw std::invalid_argument("initial state out of range");
}

}  // namespace

History simulate(const HawkesParams& params, const TransitionMatrices& phi, int initial_state,
                 double horizon, std::uint64_t seed) {
  check_inputs(params, phi, initial_state);
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("horizon must be positive and finite");
  PowerLawSoe basis(horizon);
  SoeIntensityTracker tracker(params, basis);
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> exponential(1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  History history;
  history.initial_state = initial_state;
  const int T = params.types();
  std::vector<double> lambda(T);
  auto total_intensity = [&] {
    double total = 0.0;
    for (int e = 0; e < T; ++e) {
      lambda[e] = tracker.intensity(e);
      total += lambda[e];
    }
    return total;
  };

  double t = 0.0;
  int state = initial_state;
  double bound = total_intensity();
  while (bound > 0.0) {
    if (!std::isfinite(bound)) throw ModelError("non-finite intensity at t=" + std::to_string(t));
    const double u = exponential(rng) / bound;
    if (t + u > horizon) break;
    if (!(t + u > t)) continue;
    tracker.advance(u);
    t += u;
    const double total = total_intensity();
    if (uniform(rng) * bound > total) {
      bound = total;
      continue;
    }
    const int type = draw_type(lambda, total, uniform(rng));
    state = draw_next_state(phi, type, state, uniform(rng));
    history.events.push_back({t, type, state});
    if (history.events.size() > kMaxEvents)
      throw ModelError("event count exceeded " + std::to_string(kMaxEvents) +
                       "; the parameters look explosive");
    tracker.add_event(type, state);
    bound = total_intensity();
  }
  return history;
}

LiquidationRun simulate_with_liquidator(const HawkesParams& market,
                                        const TransitionMatrices& phi,
                                        const LiquidationConfig& liquidation,
                                        const DirichletParams& gamma, int initial_state,
                                        std::uint64_t seed, const LiquidationOptions& options) {
  liquidation.validate();
  gamma.validate();
  if (3 * gamma.K != market.d_S)
    throw std::invalid_argument("Dirichlet parameters do not match the number of states");
  if (!(options.horizon > liquidation.t0) || !std::isfinite(options.horizon))
    throw std::invalid_argument("horizon must be finite and exceed the start time");
  if (!(options.transient_factor >= 0.0))
    throw std::invalid_argument("transient factor must be >= 0");

  LiquidationRun run;
  run.params = with_liquidator(market, liquidation.nu0, liquidation.a);
  run.t0 = liquidation.t0;
  const HawkesParams& params = run.params;
  check_inputs(params, phi, initial_state);

  PowerLawSoe basis(options.horizon);
  SoeIntensityTracker tracker(params, basis);
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> exponential(1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  run.history.initial_state = initial_state;
  const int T = params.types();
  std::vector<double> lambda(T);
  bool active = liquidation.t0 <= 0.0;  // liquidator intensity switched on
  auto total_intensity = [&] {
    double total = 0.0;
    for (int e = 0; e < T; ++e) {
      lambda[e] = (e == kLiquidator && !active) ? 0.0 : tracker.intensity(e);
      total += lambda[e];
    }
    return total;
  };

  double t = 0.0;
  double end = options.horizon;
  double executed = 0.0;
  bool started = active;
  int state = initial_state;
  double bound = total_intensity();
  while (true) {
    if (!std::isfinite(bound)) throw ModelError("non-finite intensity at t=" + std::to_string(t));
    const double u = bound > 0.0 ? exponential(rng) / bound : std::numeric_limits<double>::infinity();
    if (!started && t + u >= liquidation.t0) {
      // The liquidator switches on at t0; restart the proposal from there.
      tracker.advance(liquidation.t0 - t);
      t = liquidation.t0;
      started = active = true;
      bound = total_intensity();
      continue;
    }
    if (t + u > end) break;
    if (!(t + u > t)) continue;
    tracker.advance(u);
    t += u;
    const double total = total_intensity();
    if (uniform(rng) * bound > total) {
      bound = total;
      continue;
    }
    const int type = draw_type(lambda, total, uniform(rng));
    if (type == kLiquidator) {
      const auto before = StateVariable::from_index(state, gamma.K);
      const auto outcome = apply_market_order(before, gamma, liquidation.c, Side::sell, rng,
                                              options.max_attempts);
      const int next = outcome.state.index();
      executed += outcome.order_size;
      run.fills.push_back({t, outcome.order_size, state, next,
                           std::max(0.0, liquidation.Q0 - executed)});
      state = next;
      if (executed >= liquidation.Q0) {
        run.tau = t;
        run.complete = true;
        active = false;
        end = std::min(options.horizon,
                       t + options.transient_factor * (t - liquidation.t0));
      }
    } else {
      state = draw_next_state(phi, type, state, uniform(rng));
    }
    run.history.events.push_back({t, type, state});
    if (run.history.events.size() > kMaxEvents)
      throw ModelError("event count exceeded " + std::to_string(kMaxEvents) +
                       "; the parameters look explosive");
    tracker.add_event(type, state);
    bound = total_intensity();
  }
  run.end_time = end;
  return run;
}

}  // namespace lobimpact
