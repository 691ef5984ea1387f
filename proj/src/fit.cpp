#include <algorithm>
#include <cfloat>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

#include "likelihood_engine.hpp"
#include "lobimpact/calibration.hpp"

namespace lobimpact {

TransitionEstimate estimate_transitions(const History& history, int d_E, int d_S) {
  history.validate(d_E, d_S);
  TransitionEstimate out{TransitionMatrices(d_E, d_S),
                         std::vector<std::vector<long>>(d_E + 1, std::vector<long>(d_S, 0)),
                         std::vector<std::vector<char>>(d_E + 1, std::vector<char>(d_S, 0))};
  std::vector<long> counts(static_cast<std::size_t>(d_E + 1) * d_S * d_S, 0);
  int prev = history.initial_state;
  for (const auto& ev : history.events) {
    ++counts[(static_cast<std::size_t>(ev.type) * d_S + prev) * d_S + ev.state];
    ++out.row_counts[ev.type][prev];
    prev = ev.state;
  }
  for (int e = 0; e <= d_E; ++e) {
    for (int from = 0; from < d_S; ++from) {
      const long total = out.row_counts[e][from];
      if (total == 0) {
        out.fallback[e][from] = 1;
        continue;  // identity row already in place
      }
      const long* row = &counts[(static_cast<std::size_t>(e) * d_S + from) * d_S];
      int last = 0;
      for (int to = 0; to < d_S; ++to)
        if (row[to] > 0) last = to;
      double partial = 0.0;
      for (int to = 0; to < d_S; ++to) {
        double p = 0.0;
        if (to < last) {
          p = static_cast<double>(row[to]) / static_cast<double>(total);
          partial += p;
        } else if (to == last) {
          p = 1.0 - partial;  // closes the row so it sums to one exactly
        }
        out.phi(e, from, to) = p;
      }
    }
  }
  return out;
}

bool HawkesFit::converged() const {
  return std::all_of(reports.begin(), reports.end(),
                     [](const TargetFitReport& r) { return r.converged || r.degenerate; });
}

namespace {

constexpr double kLogMin = -60.0;  // lower clamp for log nu and log alpha
constexpr double kLogMax = 20.0;

// Negative per-event log-likelihood of one target in (u, v[g], w[g]) coordinates, restricted to
// the groups that occur in the history.
class TargetObjective {
 public:
  TargetObjective(const detail::LikelihoodEngine& engine, int target, std::vector<int> groups,
                  double scale, double w_max)
      : engine_(engine), target_(target), groups_(std::move(groups)), scale_(scale),
        w_max_(w_max), alpha_(engine.groups(), 0.0), beta_(engine.groups(), 2.0),
        ga_(engine.groups()), gb_(engine.groups()) {}

  std::size_t dim() const { return 1 + 2 * groups_.size(); }

  void clamp(std::vector<double>& x) const {
    x[0] = std::clamp(x[0], kLogMin, kLogMax);
    const std::size_t G = groups_.size();
    for (std::size_t i = 0; i < G; ++i) {
      x[1 + i] = std::clamp(x[1 + i], kLogMin, kLogMax);
      x[1 + G + i] = std::clamp(x[1 + G + i], kLogMin, w_max_);
    }
  }

  // Gradient components that push a clamped coordinate further out are zeroed.
  void project(const std::vector<double>& x, std::vector<double>& g) const {
    const std::size_t G = groups_.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double hi = (i > G) ? w_max_ : kLogMax;
      if ((x[i] <= kLogMin && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0)) g[i] = 0.0;
    }
  }

  double operator()(const std::vector<double>& x, std::vector<double>& grad) {
    const std::size_t G = groups_.size();
    const double nu = std::exp(x[0]);
    for (std::size_t i = 0; i < G; ++i) {
      alpha_[groups_[i]] = std::exp(x[1 + i]);
      beta_[groups_[i]] = 1.0 + std::exp(x[1 + G + i]);
    }
    double gnu = 0.0;
    long zero = -1;
    const double ll = engine_.evaluate(target_, nu, alpha_.data(), beta_.data(), &gnu, ga_.data(),
                                       gb_.data(), &zero);
    ++evaluations;
    if (!std::isfinite(ll)) return std::numeric_limits<double>::infinity();
    grad.assign(dim(), 0.0);
    grad[0] = -gnu * nu / scale_;
    for (std::size_t i = 0; i < G; ++i) {
      const int g = groups_[i];
      grad[1 + i] = -ga_[g] * alpha_[g] / scale_;
      grad[1 + G + i] = -gb_[g] * (beta_[g] - 1.0) / scale_;
    }
    return -ll / scale_;
  }

  void write(const std::vector<double>& x, HawkesParams& params) const {
    const std::size_t G = groups_.size();
    const int T = params.types();
    params.nu[target_] = std::exp(x[0]);
    for (int g = 0; g < engine_.groups(); ++g) {
      params.alpha[static_cast<std::size_t>(g) * T + target_] = 0.0;
      params.beta[static_cast<std::size_t>(g) * T + target_] = 2.0;
    }
    for (std::size_t i = 0; i < G; ++i) {
      params.alpha[static_cast<std::size_t>(groups_[i]) * T + target_] = std::exp(x[1 + i]);
      params.beta[static_cast<std::size_t>(groups_[i]) * T + target_] =
          1.0 + std::exp(x[1 + G + i]);
    }
  }

  int evaluations = 0;

 private:
  const detail::LikelihoodEngine& engine_;
  int target_;
  std::vector<int> groups_;
  double scale_;
  double w_max_;
  std::vector<double> alpha_, beta_, ga_, gb_;
};

double inf_norm(const std::vector<double>& g) {
  double m = 0.0;
  for (double v : g) m = std::max(m, std::abs(v));
  return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct RunResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  double gradient_norm = std::numeric_limits<double>::infinity();
};

// Projected L-BFGS with Armijo backtracking; every accepted step strictly decreases f.
RunResult minimise(TargetObjective& obj, std::vector<double> x, const OptimizerConfig& cfg,
                   std::vector<double>* trace) {
  RunResult r;
  obj.clamp(x);
  std::vector<double> g;
  double f = obj(x, g);
  if (!std::isfinite(f)) {
    r.x = x;
    return r;
  }
  if (trace) trace->push_back(f);
  std::deque<std::vector<double>> S, Y;
  std::deque<double> rho;
  std::vector<double> pg = g, d(x.size()), xn(x.size()), gn;
  obj.project(x, pg);
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (inf_norm(pg) < cfg.gradient_tolerance) {
      r.converged = true;
      break;
    }
    // Two-loop recursion on the projected gradient.
    d = pg;
    std::vector<double> a(S.size());
    for (std::size_t i = S.size(); i-- > 0;) {
      a[i] = rho[i] * dot(S[i], d);
      for (std::size_t j = 0; j < d.size(); ++j) d[j] -= a[i] * Y[i][j];
    }
    double h0 = 1.0;
    if (!S.empty()) h0 = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
    else h0 = 1.0 / std::max(1.0, inf_norm(pg));
    for (double& v : d) v *= h0;
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double b = rho[i] * dot(Y[i], d);
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += (a[i] - b) * S[i][j];
    }
    for (double& v : d) v = -v;
    double slope = dot(pg, d);
    if (!(slope < 0.0)) {
      S.clear(); Y.clear(); rho.clear();
      d = pg;
      for (double& v : d) v = -v / std::max(1.0, inf_norm(pg));
      slope = dot(pg, d);
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double step = 1.0;
      for (int k = 0; k < 60; ++k) {
        for (std::size_t j = 0; j < x.size(); ++j) xn[j] = x[j] + step * d[j];
        obj.clamp(xn);
        double fn = obj(xn, gn);
        double decrease = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) decrease += pg[j] * (xn[j] - x[j]);
        if (std::isfinite(fn) && fn < f && fn <= f + cfg.armijo_c * decrease) {
          std::vector<double> s(x.size()), y(x.size());
          for (std::size_t j = 0; j < x.size(); ++j) {
            s[j] = xn[j] - x[j];
            y[j] = gn[j] - g[j];
          }
          const double sy = dot(s, y);
          if (sy > 1e-300) {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > cfg.memory) {
              S.pop_front(); Y.pop_front(); rho.pop_front();
            }
          }
          x = xn;
          f = fn;
          g = gn;
          if (trace) trace->push_back(f);
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        // Fall back to steepest descent with fresh memory.
        S.clear(); Y.clear(); rho.clear();
        d = pg;
        for (double& v : d) v = -v / std::max(1.0, inf_norm(pg));
      }
    }
    pg = g;
    obj.project(x, pg);
    if (!accepted) break;
  }
  r.x = x;
  r.f = f;
  r.iterations = it;
  r.gradient_norm = inf_norm(pg);
  if (r.gradient_norm < cfg.gradient_tolerance) r.converged = true;
  return r;
}

std::uint64_t mix(std::uint64_t seed, int target) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(target + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

TargetFitReport fit_with_engine(const detail::LikelihoodEngine& engine,
                                const std::vector<int>& groups, int target,
                                const OptimizerConfig& cfg, HawkesParams& params) {
  TargetFitReport rep;
  rep.target = target;
  const long n_e = engine.count(target);
  const int T = params.types();
  if (n_e == 0) {
    params.nu[target] = DBL_MIN;
    for (int g = 0; g < engine.groups(); ++g) {
      params.alpha[static_cast<std::size_t>(g) * T + target] = 0.0;
      params.beta[static_cast<std::size_t>(g) * T + target] = cfg.initial_beta;
    }
    rep.degenerate = true;
    rep.converged = false;
    rep.log_likelihood = -DBL_MIN * engine.horizon();
    return rep;
  }
  if (!(cfg.beta_max > 1.0)) throw std::invalid_argument("beta_max must exceed 1");
  if (cfg.restarts < 1) throw std::invalid_argument("at least one restart is required");
  const double w_max = std::log(cfg.beta_max - 1.0);
  const double scale = std::max(1.0, static_cast<double>(n_e));
  TargetObjective obj(engine, target, groups, scale, w_max);
  const std::size_t G = groups.size();
  std::mt19937_64 rng(mix(cfg.seed, target));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double nu0 = static_cast<double>(n_e) / engine.horizon();
  RunResult best;
  for (int r = 0; r < cfg.restarts; ++r) {
    std::vector<double> x(obj.dim());
    double nu = nu0, a = cfg.initial_alpha, b = cfg.initial_beta;
    if (r > 0) {
      nu = nu0 * (0.25 + 0.75 * unif(rng));
      a = cfg.initial_alpha * std::exp(std::log(10.0) * (2.0 * unif(rng) - 1.0));
      b = 1.2 + 2.8 * unif(rng);
    }
    x[0] = std::log(nu);
    for (std::size_t i = 0; i < G; ++i) {
      x[1 + i] = std::log(a);
      x[1 + G + i] = std::log(std::min(b, cfg.beta_max) - 1.0);
    }
    std::vector<double> trace;
    RunResult run = minimise(obj, x, cfg, cfg.record_trace ? &trace : nullptr);
    rep.restart_log_likelihoods.push_back(-run.f * scale);
    if (cfg.record_trace) {
      for (double& v : trace) v = -v;
      rep.traces.push_back(std::move(trace));
    }
    if (run.f < best.f) best = run;
    rep.iterations += run.iterations;
  }
  rep.evaluations = obj.evaluations;
  if (best.x.empty()) throw std::runtime_error("likelihood is not finite at any starting point");
  obj.write(best.x, params);
  rep.log_likelihood = -best.f * scale;
  rep.converged = best.converged;
  rep.gradient_norm = best.gradient_norm;
  return rep;
}

std::vector<int> occupied_groups(const History& history, double horizon, int d_S) {
  std::vector<int> groups;
  for (const auto& ev : history.events) {
    if (ev.time > horizon) break;
    groups.push_back(ev.type * d_S + ev.state);
  }
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  return groups;
}

bool use_soe(LikelihoodMethod method, const History& history) {
  if (method == LikelihoodMethod::exact) return false;
  if (method == LikelihoodMethod::soe) return true;
  return history.events.size() > 2000;
}

}  // namespace

TargetFitReport fit_target(const History& history, double horizon, int target,
                           const OptimizerConfig& config, HawkesParams& params) {
  if (target < 1 || target > params.d_E) throw std::out_of_range("target type out of range");
  detail::LikelihoodEngine engine(history, horizon, params.d_E, params.d_S,
                                  use_soe(config.method, history));
  return fit_with_engine(engine, occupied_groups(history, horizon, params.d_S), target, config,
                         params);
}

HawkesFit fit_hawkes_in_order(const History& history, double horizon, int d_E, int d_S,
                              const OptimizerConfig& config, const std::vector<int>& order) {
  std::vector<int> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (int e = 1; e <= d_E; ++e)
    if (static_cast<int>(sorted.size()) != d_E || sorted[e - 1] != e)
      throw std::invalid_argument("fit order must be a permutation of the market types");
  HawkesFit fit{HawkesParams(d_E, d_S), std::vector<TargetFitReport>(d_E)};
  detail::LikelihoodEngine engine(history, horizon, d_E, d_S, use_soe(config.method, history));
  const auto groups = occupied_groups(history, horizon, d_S);
  for (int e : order) fit.reports[e - 1] = fit_with_engine(engine, groups, e, config, fit.params);
  fit.params.validate();
  return fit;
}

HawkesFit fit_hawkes(const History& history, double horizon, int d_E, int d_S,
                     const OptimizerConfig& config) {
  std::vector<int> order(d_E);
  for (int e = 1; e <= d_E; ++e) order[e - 1] = e;
  return fit_hawkes_in_order(history, horizon, d_E, d_S, config, order);
}

}  // namespace lobimpact
