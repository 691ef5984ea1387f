#include "lobimpact/impact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lobimpact {

namespace {

double active_tau(double tau) { return std::isnan(tau) ? std::numeric_limits<double>::infinity() : tau; }

// State in force on (t, next event): after every event with time <= t.
int state_after(const History& h, double t) {
  auto it = std::upper_bound(h.events.begin(), h.events.end(), t,
                             [](double v, const EventRecord& e) { return v < e.time; });
  return it == h.events.begin() ? h.initial_state : std::prev(it)->state;
}

// (sum over deflationary - sum over inflationary) of phi_e(from, .).
double price_weight(const TransitionMatrices& phi, int e, int from, int K) {
  double w = 0.0;
  for (int to = 0; to < phi.d_S; ++to) {
    const int x1 = StateVariable::from_index(to, K).x1;
    if (x1 < 0) w += phi(e, from, to);
    else if (x1 > 0) w -= phi(e, from, to);
  }
  return w;
}

double deflationary_weight(const TransitionMatrices& phi, int e, int from, int K) {
  double w = 0.0;
  for (int to = 0; to < phi.d_S; ++to)
    if (StateVariable::from_index(to, K).x1 < 0) w += phi(e, from, to);
  return w;
}

// Kernel sums at t over events with time < t (inclusive = false) or <= t (inclusive = true).
double liquidator_excitation(const ImpactContext& ctx, double t, bool inclusive) {
  double sum = 0.0;
  for (const auto& ev : ctx.history.events) {
    if (ev.time > t || (!inclusive && ev.time == t)) break;
    const double a = ctx.params.a(ev.type, ev.state, kLiquidator);
    if (a != 0.0) sum += a * std::pow(t - ev.time + 1.0, -ctx.params.b(ev.type, ev.state, kLiquidator));
  }
  return sum;
}

double fill_response(const ImpactContext& ctx, double t, int e, bool inclusive) {
  double sum = 0.0;
  for (const auto& ev : ctx.history.events) {
    if (ev.time > t || (!inclusive && ev.time == t)) break;
    if (ev.type != kLiquidator) continue;
    const double a = ctx.params.a(kLiquidator, ev.state, e);
    if (a != 0.0) sum += a * std::pow(t - ev.time + 1.0, -ctx.params.b(kLiquidator, ev.state, e));
  }
  return sum;
}

double dir_value(const ImpactContext& ctx, double t, bool inclusive) {
  if (t < ctx.t0 || t >= active_tau(ctx.tau)) return 0.0;
  const int x = inclusive ? state_after(ctx.history, t) : ctx.history.state_before(t);
  const double w = deflationary_weight(ctx.phi, kLiquidator, x, ctx.K);
  if (w == 0.0) return 0.0;
  return w * (ctx.params.nu[kLiquidator] + liquidator_excitation(ctx, t, inclusive));
}

double indir_value(const ImpactContext& ctx, double t, bool inclusive) {
  const int x = inclusive ? state_after(ctx.history, t) : ctx.history.state_before(t);
  double sum = 0.0;
  for (int e = 1; e <= ctx.params.d_E; ++e) {
    const double w = price_weight(ctx.phi, e, x, ctx.K);
    if (w != 0.0) sum += w * fill_response(ctx, t, e, inclusive);
  }
  return sum;
}

// Integral over [a, b] of sum_n alpha (t - T_n + 1)^(-beta) for one event.
double kernel_integral(double alpha, double beta, double a, double b, double s) {
  return alpha / (beta - 1.0) *
         (std::pow(a - s + 1.0, 1.0 - beta) - std::pow(b - s + 1.0, 1.0 - beta));
}

void check_context(const ImpactContext& ctx) {
  if (ctx.params.d_E != ctx.phi.d_E || ctx.params.d_S != ctx.phi.d_S)
    throw std::invalid_argument("parameter and transition shapes differ");
  if (num_states(ctx.K) != ctx.params.d_S) throw std::invalid_argument("d_S must equal 3K");
}

HawkesParams keep_targets(const HawkesParams& p, bool liquidator_target) {
  HawkesParams out = p;
  for (int src = 0; src < p.types(); ++src)
    for (int x = 0; x < p.d_S; ++x)
      for (int tgt = 0; tgt < p.types(); ++tgt)
        if ((tgt == kLiquidator) != liquidator_target) out.a(src, x, tgt) = 0.0;
  return out;
}

}  // namespace

Phi0Estimate estimate_phi0(const std::vector<LiquidatorFill>& fills, int K) {
  if (fills.empty()) throw std::invalid_argument("no liquidator activity");
  const int d_S = num_states(K);
  Phi0Estimate out{d_S, std::vector<double>(static_cast<std::size_t>(d_S) * d_S, 0.0),
                   std::vector<long>(d_S, 0), std::vector<char>(d_S, 0)};
  std::vector<long> counts(static_cast<std::size_t>(d_S) * d_S, 0);
  for (const auto& f : fills) {
    if (f.state_before < 0 || f.state_before >= d_S || f.state_after < 0 || f.state_after >= d_S)
      throw std::invalid_argument("fill state out of range");
    ++counts[static_cast<std::size_t>(f.state_before) * d_S + f.state_after];
    ++out.row_counts[f.state_before];
  }
  for (int from = 0; from < d_S; ++from) {
    double* row = &out.phi[static_cast<std::size_t>(from) * d_S];
    const long total = out.row_counts[from];
    if (total == 0) {
      out.fallback[from] = 1;
      const StateVariable s = StateVariable::from_index(from, K);
      row[StateVariable{0, s.x2, K}.index()] = 1.0;
      continue;
    }
    const long* c = &counts[static_cast<std::size_t>(from) * d_S];
    int last = 0;
    for (int to = 0; to < d_S; ++to)
      if (c[to] > 0) last = to;
    double partial = 0.0;
    for (int to = 0; to < last; ++to) {
      row[to] = static_cast<double>(c[to]) / static_cast<double>(total);
      partial += row[to];
    }
    row[last] = 1.0 - partial;
  }
  return out;
}

TransitionMatrices with_phi0(const TransitionMatrices& market, const Phi0Estimate& phi0) {
  if (phi0.d_S != market.d_S) throw std::invalid_argument("phi0 shape does not match");
  TransitionMatrices out = market;
  for (int from = 0; from < market.d_S; ++from)
    for (int to = 0; to < market.d_S; ++to) out(kLiquidator, from, to) = phi0(from, to);
  return out;
}

double liquidator_intensity(const ImpactContext& ctx, double t) {
  if (t < ctx.t0 || t >= active_tau(ctx.tau)) return 0.0;
  return ctx.params.nu[kLiquidator] + liquidator_excitation(ctx, t, false);
}

double dir_intensity(const ImpactContext& ctx, double t) {
  check_context(ctx);
  return dir_value(ctx, t, false);
}

double indir_intensity(const ImpactContext& ctx, double t) {
  check_context(ctx);
  return indir_value(ctx, t, false);
}

IdentityCheck impact_identity_check(const ImpactContext& ctx, const std::vector<double>& times) {
  check_context(ctx);
  IdentityCheck out;
  for (double t : times) {
    const int x = ctx.history.state_before(t);
    double direct = liquidator_intensity(ctx, t) * price_weight(ctx.phi, kLiquidator, x, ctx.K);
    for (int e = 1; e <= ctx.params.d_E; ++e) {
      const double w = price_weight(ctx.phi, e, x, ctx.K);
      if (w != 0.0) direct += w * intensity_at(ctx.params, ctx.history, t, e);
    }
    const double gap = std::abs(direct - (dir_intensity(ctx, t) + indir_intensity(ctx, t)));
    if (gap > out.max_discrepancy) {
      out.max_discrepancy = gap;
      out.worst_time = t;
    }
  }
  return out;
}

double ImpactProfile::at(double t) const {
  if (breakpoints.empty() || t <= breakpoints.front()) return profile.empty() ? 0.0 : profile.front();
  if (t >= breakpoints.back()) return profile.back();
  const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - breakpoints.begin());
  const double a = breakpoints[i - 1], b = breakpoints[i];
  return profile[i - 1] + (t - a) / (b - a) * (profile[i] - profile[i - 1]);
}

ImpactProfile impact_profile(const ImpactContext& ctx, double end, bool complete,
                             const ProfileOptions& options) {
  check_context(ctx);
  if (!(end >= ctx.t0)) throw std::invalid_argument("profile end precedes t0");
  const double tau = active_tau(ctx.tau);
  ImpactProfile out;
  out.t0 = ctx.t0;
  out.tau = ctx.tau;
  out.end = end;
  out.complete = complete;
  out.truncated = end < tau;

  std::vector<double>& bp = out.breakpoints;
  bp.push_back(ctx.t0);
  for (const auto& ev : ctx.history.events)
    if (ev.time > ctx.t0 && ev.time < end) bp.push_back(ev.time);
  if (tau > ctx.t0 && tau < end) bp.push_back(tau);
  for (double t : options.extra_times)
    if (t > ctx.t0 && t < end) bp.push_back(t);
  if (end > ctx.t0) bp.push_back(end);
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

  const auto& events = ctx.history.events;
  const int d_E = ctx.params.d_E;
  const double nu0 = ctx.params.nu[kLiquidator];
  out.profile.assign(bp.size(), 0.0);
  out.dir.assign(bp.size(), 0.0);
  out.indir.assign(bp.size(), 0.0);

  if (options.method == ProfileMethod::exact) {
    for (std::size_t i = 0; i < bp.size(); ++i) {
      out.dir[i] = dir_value(ctx, bp[i], true);
      out.indir[i] = indir_value(ctx, bp[i], true);
      if (i + 1 == bp.size()) break;
      const double a = bp[i], b = bp[i + 1];
      const int x = state_after(ctx.history, a);
      double inc = 0.0;
      if (a < tau) {
        const double w = deflationary_weight(ctx.phi, kLiquidator, x, ctx.K);
        if (w != 0.0) {
          double integral = nu0 * (b - a);
          for (const auto& ev : events) {
            if (ev.time > a) break;
            const double al = ctx.params.a(ev.type, ev.state, kLiquidator);
            if (al != 0.0)
              integral += kernel_integral(al, ctx.params.b(ev.type, ev.state, kLiquidator), a, b,
                                          ev.time);
          }
          inc += w * integral;
        }
      }
      for (int e = 1; e <= d_E; ++e) {
        const double w = price_weight(ctx.phi, e, x, ctx.K);
        if (w == 0.0) continue;
        double integral = 0.0;
        for (const auto& ev : events) {
          if (ev.time > a) break;
          if (ev.type != kLiquidator) continue;
          const double al = ctx.params.a(kLiquidator, ev.state, e);
          if (al != 0.0)
            integral += kernel_integral(al, ctx.params.b(kLiquidator, ev.state, e), a, b, ev.time);
        }
        inc += w * integral;
      }
      out.profile[i + 1] = out.profile[i] + inc;
    }
  } else {
    const double horizon = std::max(1.0, bp.back() + 1.0);
    const PowerLawSoe basis(horizon);
    const HawkesParams to_liquidator = keep_targets(ctx.params, true);
    const HawkesParams from_fills = keep_targets(ctx.params, false);
    SoeIntensityTracker lam0(to_liquidator, basis);
    SoeIntensityTracker resp(from_fills, basis);
    std::vector<double> step0(ctx.params.types()), step1(ctx.params.types());
    std::size_t next = 0;
    double now = 0.0;
    auto advance_to = [&](double t) {
      lam0.advance(t - now, nullptr);
      resp.advance(t - now, nullptr);
      now = t;
    };
    auto absorb_through = [&](double t) {
      while (next < events.size() && events[next].time <= t) {
        advance_to(events[next].time);
        lam0.add_event(events[next].type, events[next].state);
        if (events[next].type == kLiquidator) resp.add_event(kLiquidator, events[next].state);
        ++next;
      }
      advance_to(t);
    };
    absorb_through(bp.front());
    for (std::size_t i = 0; i < bp.size(); ++i) {
      const double a = bp[i];
      const int x = state_after(ctx.history, a);
      const double wd = (a >= ctx.t0 && a < tau) ? deflationary_weight(ctx.phi, kLiquidator, x, ctx.K) : 0.0;
      std::vector<double> wi(d_E + 1, 0.0);
      for (int e = 1; e <= d_E; ++e) wi[e] = price_weight(ctx.phi, e, x, ctx.K);
      out.dir[i] = wd * (nu0 + lam0.excitation(kLiquidator));
      double indir = 0.0;
      for (int e = 1; e <= d_E; ++e) indir += wi[e] * resp.excitation(e);
      out.indir[i] = indir;
      if (i + 1 == bp.size()) break;
      const double b = bp[i + 1];
      // No events inside (a, b) by construction, so one step covers the interval.
      lam0.advance(b - a, step0.data());
      resp.advance(b - a, step1.data());
      now = b;
      double inc = wd * (nu0 * (b - a) + step0[kLiquidator]);
      for (int e = 1; e <= d_E; ++e) inc += wi[e] * step1[e];
      out.profile[i + 1] = out.profile[i] + inc;
      absorb_through(b);
    }
  }

  const double peak = *std::max_element(out.profile.begin(), out.profile.end());
  const double duration = (std::isfinite(tau) ? tau : end) - ctx.t0;
  out.score = duration > 0.0 ? peak / duration : 0.0;
  return out;
}

ImpactProfile impact_profile(const LiquidationRun& run, const TransitionMatrices& market_phi, int K,
                             const ProfileOptions& options) {
  if (run.fills.empty()) {
    ImpactProfile out;
    out.t0 = run.t0;
    out.tau = run.tau;
    out.end = run.end_time;
    out.breakpoints = {run.t0};
    if (run.end_time > run.t0) out.breakpoints.push_back(run.end_time);
    out.profile.assign(out.breakpoints.size(), 0.0);
    out.dir = out.indir = out.profile;
    out.complete = run.complete;
    out.truncated = !run.complete;
    return out;
  }
  const Phi0Estimate phi0 = estimate_phi0(run.fills, K);
  const TransitionMatrices phi = with_phi0(market_phi, phi0);
  const ImpactContext ctx{run.params, phi, run.history, K, run.t0,
                          run.complete ? run.tau : std::numeric_limits<double>::quiet_NaN()};
  return impact_profile(ctx, run.end_time, run.complete, options);
}

std::vector<int> canonical_event_map(int d_E) {
  if (d_E != 4) throw std::invalid_argument("canonical event map needs d_E = 4");
  return {0, 2, 1, 4, 3};
}

std::vector<int> canonical_state_map(int K) {
  std::vector<int> out(num_states(K));
  for (int x = 0; x < num_states(K); ++x) {
    const StateVariable s = StateVariable::from_index(x, K);
    out[x] = StateVariable{-s.x1, -s.x2, K}.index();
  }
  return out;
}

namespace {

void check_maps(const std::vector<int>& sigma_E, const std::vector<int>& sigma_S, int d_E, int K) {
  if (static_cast<int>(sigma_E.size()) != d_E + 1)
    throw std::invalid_argument("event map must have d_E + 1 entries");
  std::vector<char> seen(d_E + 1, 0);
  for (int e = 1; e <= d_E; ++e) {
    const int s = sigma_E[e];
    if (s < 1 || s > d_E || seen[s]) throw std::invalid_argument("event map is not a permutation");
    seen[s] = 1;
  }
  const int d_S = num_states(K);
  if (static_cast<int>(sigma_S.size()) != d_S)
    throw std::invalid_argument("state map must have d_S entries");
  std::vector<char> hit(d_S, 0);
  for (int x = 0; x < d_S; ++x) {
    if (!is_inflationary(x, K)) continue;
    const int y = sigma_S[x];
    if (y < 0 || y >= d_S || !is_deflationary(y, K) || hit[y])
      throw std::invalid_argument("state map is not a bijection onto the deflationary states");
    hit[y] = 1;
  }
}

}  // namespace

SymmetryReport check_price_symmetry(const HawkesParams& params, const TransitionMatrices& phi,
                                    const std::vector<int>& sigma_E,
                                    const std::vector<int>& sigma_S, int K, double tol) {
  check_maps(sigma_E, sigma_S, params.d_E, K);
  if (phi.d_S != params.d_S || params.d_S != num_states(K))
    throw std::invalid_argument("shapes do not match K");
  double v = 0.0;
  const int d_E = params.d_E, d_S = params.d_S;
  for (int e = 1; e <= d_E; ++e) {
    const int se = sigma_E[e];
    for (int y = 0; y < d_S; ++y)
      for (int x = 0; x < d_S; ++x)
        if (is_inflationary(x, K)) v = std::max(v, std::abs(phi(e, y, x) - phi(se, y, sigma_S[x])));
    v = std::max(v, std::abs(params.nu[e] - params.nu[se]));
    for (int src = 1; src <= d_E; ++src)
      for (int x = 0; x < d_S; ++x) {
        v = std::max(v, std::abs(params.a(src, x, e) - params.a(src, x, se)));
        // beta only matters where the kernel is nonzero.
        if (params.a(src, x, e) != 0.0 || params.a(src, x, se) != 0.0)
          v = std::max(v, std::abs(params.b(src, x, e) - params.b(src, x, se)));
      }
  }
  return {v <= tol, v};
}

void symmetrise(HawkesParams& params, TransitionMatrices& phi, const std::vector<int>& sigma_E,
                const std::vector<int>& sigma_S, int K) {
  check_maps(sigma_E, sigma_S, params.d_E, K);
  const int d_E = params.d_E, d_S = params.d_S;
  for (int e = 1; e <= d_E; ++e)
    if (sigma_E[sigma_E[e]] != e) throw std::invalid_argument("event map must be an involution");
  std::vector<int> inverse_S(d_S, -1);
  for (int x = 0; x < d_S; ++x)
    if (is_inflationary(x, K)) inverse_S[sigma_S[x]] = x;

  const HawkesParams p0 = params;
  const TransitionMatrices f0 = phi;
  for (int e = 1; e <= d_E; ++e) {
    const int se = sigma_E[e];
    params.nu[e] = 0.5 * (p0.nu[e] + p0.nu[se]);
    for (int src = 0; src <= d_E; ++src)
      for (int x = 0; x < d_S; ++x) {
        params.a(src, x, e) = 0.5 * (p0.a(src, x, e) + p0.a(src, x, se));
        params.b(src, x, e) = 0.5 * (p0.b(src, x, e) + p0.b(src, x, se));
      }
    for (int y = 0; y < d_S; ++y)
      for (int x = 0; x < d_S; ++x) {
        double partner;
        if (is_inflationary(x, K)) partner = f0(se, y, sigma_S[x]);
        else if (is_deflationary(x, K)) partner = f0(se, y, inverse_S[x]);
        else partner = f0(se, y, x);
        phi(e, y, x) = 0.5 * (f0(e, y, x) + partner);
      }
  }
  params.validate();
  phi.validate(1e-12);
}

}  // namespace lobimpact
