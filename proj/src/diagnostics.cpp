#include <algorithm>
#include <cmath>

#include "lobimpact/calibration.hpp"

namespace lobimpact {

namespace {

constexpr std::size_t kMinKsEvents = 10;

// Lambda_e(T_n) for every event n inside the horizon, for all types at once.
std::vector<std::vector<double>> compensators_at_events(const HawkesParams& params,
                                                        const History& history, double horizon,
                                                        bool use_soe) {
  const int T = params.types();
  std::vector<std::vector<double>> out;
  if (!use_soe) {
    for (const auto& ev : history.events) {
      if (ev.time > horizon) break;
      out.push_back(compensator(params, history, ev.time));
    }
    return out;
  }
  PowerLawSoe basis(horizon);
  SoeIntensityTracker tracker(params, basis);
  std::vector<double> lambda(T, 0.0), step(T);
  double now = 0.0;
  for (const auto& ev : history.events) {
    if (ev.time > horizon) break;
    const double dt = ev.time - now;
    tracker.advance(dt, step.data());
    for (int e = 0; e < T; ++e) lambda[e] += params.nu[e] * dt + step[e];
    out.push_back(lambda);
    tracker.add_event(ev.type, ev.state);
    now = ev.time;
  }
  return out;
}

}  // namespace

std::vector<ResidualSeries> residual_diagnostics(const HawkesParams& params,
                                                 const History& history, double horizon,
                                                 LikelihoodMethod method) {
  params.validate();
  history.validate(params.d_E, params.d_S);
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  const bool soe = method == LikelihoodMethod::soe ||
                   (method == LikelihoodMethod::automatic && history.events.size() > 2000);
  const auto lambda = compensators_at_events(params, history, horizon, soe);
  std::vector<ResidualSeries> out;
  for (int e = 1; e <= params.d_E; ++e) {
    ResidualSeries rs;
    rs.event_type = e;
    double prev = 0.0;
    for (std::size_t n = 0; n < lambda.size(); ++n) {
      if (history.events[n].type != e) continue;
      rs.residuals.push_back(lambda[n][e] - prev);
      prev = lambda[n][e];
    }
    const std::size_t m = rs.residuals.size();
    if (m < kMinKsEvents) {
      rs.ks_skipped = true;
    } else {
      rs.ks = ks_test_unit_exponential(rs.residuals);
    }
    std::vector<double> sorted = rs.residuals;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < m; ++i) {
      const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
      rs.qq.emplace_back(sorted[i], -std::log1p(-p));
    }
    out.push_back(std::move(rs));
  }
  return out;
}

}  // namespace lobimpact
