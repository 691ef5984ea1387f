#include "lobimpact/hawkes.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace lobimpact {

void History::validate(int d_E, int d_S) const {
  if (initial_state < 0 || initial_state >= d_S)
    throw std::invalid_argument("initial state out of range");
  double last = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    if (!(ev.time > last))
      throw std::invalid_argument("event times must be strictly increasing (event " +
                                  std::to_string(i) + ")");
    if (ev.type < 0 || ev.type > d_E)
      throw std::invalid_argument("event type out of range (event " + std::to_string(i) + ")");
    if (ev.state < 0 || ev.state >= d_S)
      throw std::invalid_argument("event state out of range (event " + std::to_string(i) + ")");
    last = ev.time;
  }
}

int History::state_before(double t) const {
  auto it = std::lower_bound(events.begin(), events.end(), t,
                             [](const EventRecord& ev, double v) { return ev.time < v; });
  if (it == events.begin()) return initial_state;
  return std::prev(it)->state;
}

HawkesParams::HawkesParams(int d_E_, int d_S_) : d_E(d_E_), d_S(d_S_) {
  if (d_E < 1 || d_S < 1) throw std::invalid_argument("d_E and d_S must be positive");
  nu.assign(types(), 0.0);
  alpha.assign(static_cast<std::size_t>(types()) * d_S * types(), 0.0);
  beta.assign(alpha.size(), 2.0);
}

void HawkesParams::validate() const {
  const std::size_t size = static_cast<std::size_t>(types()) * d_S * types();
  if (static_cast<int>(nu.size()) != types() || alpha.size() != size || beta.size() != size)
    throw std::invalid_argument("Hawkes parameter shapes do not match d_E and d_S");
  for (double v : nu)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("base rates must be >= 0");
  for (double v : alpha)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("alpha must be >= 0");
  for (double v : beta)
    if (!(v > 1.0) || !std::isfinite(v)) throw std::invalid_argument("beta must exceed 1");
}

TransitionMatrices::TransitionMatrices(int d_E_, int d_S_) : d_E(d_E_), d_S(d_S_) {
  phi.assign(static_cast<std::size_t>(d_E + 1) * d_S * d_S, 0.0);
  for (int e = 0; e <= d_E; ++e)
    for (int x = 0; x < d_S; ++x) (*this)(e, x, x) = 1.0;
}

void TransitionMatrices::validate(double tol) const {
  if (phi.size() != static_cast<std::size_t>(d_E + 1) * d_S * d_S)
    throw std::invalid_argument("transition tensor shape does not match d_E and d_S");
  for (int e = 0; e <= d_E; ++e)
    for (int from = 0; from < d_S; ++from) {
      double row = 0.0;
      for (int to = 0; to < d_S; ++to) {
        const double p = (*this)(e, from, to);
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("transition entry outside [0,1]");
        row += p;
      }
      if (std::abs(row - 1.0) > tol)
        throw std::invalid_argument("transition row does not sum to 1 (type " + std::to_string(e) +
                                    ", row " + std::to_string(from) + ")");
    }
}

double TransitionMatrices::sign_constraint_violation(int K) const {
  double worst = 0.0;
  for (int from = 0; from < d_S; ++from)
    for (int to = 0; to < d_S; ++to) {
      const int x1 = to / K - 1;
      if (x1 == 1) {
        worst = std::max(worst, (*this)(kLiquidator, from, to));
        if (d_E >= 1) worst = std::max(worst, (*this)(kSellMarket, from, to));
      }
      if (x1 == -1 && d_E >= 2) worst = std::max(worst, (*this)(kBuyMarket, from, to));
    }
  return worst;
}

void LiquidationConfig::validate() const {
  if (!(Q0 > 0.0) || !std::isfinite(Q0)) throw std::invalid_argument("Q0 must be positive");
  if (!(nu0 >= 0.0) || !std::isfinite(nu0)) throw std::invalid_argument("nu0 must be >= 0");
  if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("a must be >= 0");
  if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("c must lie in (0, 1]");
  if (!(t0 >= 0.0) || !std::isfinite(t0)) throw std::invalid_argument("t0 must be >= 0");
}

HawkesParams with_liquidator(const HawkesParams& market, double nu0, double a) {
  if (market.d_E < 1) throw std::invalid_argument("market needs a sell market order type");
  HawkesParams p = market;
  p.nu[kLiquidator] = nu0;
  for (int x = 0; x < p.d_S; ++x) {
    for (int e = 1; e <= p.d_E; ++e) {
      p.a(kLiquidator, x, e) = market.a(kSellMarket, x, e);
      p.b(kLiquidator, x, e) = market.b(kSellMarket, x, e);
    }
    for (int src = 1; src <= p.d_E; ++src) {
      p.a(src, x, kLiquidator) = a * market.a(src, x, kSellMarket);
      p.b(src, x, kLiquidator) = market.b(src, x, kSellMarket);
    }
    // The liquidator's own orders excite it as a sell market order would.
    p.a(kLiquidator, x, kLiquidator) = a * market.a(kSellMarket, x, kSellMarket);
    p.b(kLiquidator, x, kLiquidator) = market.b(kSellMarket, x, kSellMarket);
  }
  return p;
}

double intensity_at(const HawkesParams& params, const History& history, double t, int target) {
  if (target < 0 || target > params.d_E) throw std::out_of_range("target type out of range");
  double lambda = params.nu[target];
  for (const auto& ev : history.events) {
    if (!(ev.time < t)) break;
    const std::size_t i = params.index(ev.type, ev.state, target);
    const double a = params.alpha[i];
    if (a != 0.0) lambda += a * std::pow(t - ev.time + 1.0, -params.beta[i]);
  }
  return lambda;
}

double hybrid_intensity_at(const HawkesParams& params, const TransitionMatrices& phi,
                           const History& history, double t, int target, int to_state) {
  const int from = history.state_before(t);
  const double p = phi(target, from, to_state);
  if (p == 0.0) return 0.0;
  return p * intensity_at(params, history, t, target);
}

std::vector<double> compensator_increment(const HawkesParams& params, const History& history,
                                          double t0, double t1) {
  if (t1 < t0) throw std::invalid_argument("compensator interval must satisfy t0 <= t1");
  std::vector<double> out(params.types());
  for (int e = 0; e < params.types(); ++e) out[e] = params.nu[e] * (t1 - t0);
  for (const auto& ev : history.events) {
    if (!(ev.time < t1)) break;
    for (int e = 0; e < params.types(); ++e) {
      const std::size_t i = params.index(ev.type, ev.state, e);
      const double a = params.alpha[i];
      if (a == 0.0) continue;
      const double b = params.beta[i];
      const double tail1 = std::pow(t1 - ev.time + 1.0, 1.0 - b);
      const double tail0 = ev.time < t0 ? std::pow(t0 - ev.time + 1.0, 1.0 - b) : 1.0;
      out[e] += a / (b - 1.0) * (tail0 - tail1);
    }
  }
  return out;
}

std::vector<double> compensator(const HawkesParams& params, const History& history, double t) {
  return compensator_increment(params, history, 0.0, t);
}

double spectral_radius_heuristic(const HawkesParams& params) {
  const int d = params.d_E;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (int src = 1; src <= d; ++src)
    for (int tgt = 1; tgt <= d; ++tgt) {
      double worst = 0.0;
      for (int x = 0; x < params.d_S; ++x) worst = std::max(worst, params.norm(src, x, tgt));
      m(src - 1, tgt - 1) = worst;
    }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

SoeIntensityTracker::SoeIntensityTracker(const HawkesParams& params, const PowerLawSoe& basis)
    : params_(params), basis_(basis), nodes_(basis.size()) {
  const int T = params.types();
  active_.assign(T, 0);
  table_.assign(params.alpha.size() * nodes_, 0.0);
  for (int src = 0; src < T; ++src)
    for (int x = 0; x < params.d_S; ++x)
      for (int tgt = 0; tgt < T; ++tgt) {
        const std::size_t i = params.index(src, x, tgt);
        const double a = params.alpha[i];
        if (a == 0.0) continue;
        active_[tgt] = 1;
        double* row = &table_[i * nodes_];
        basis.weights(params.beta[i], row);
        for (int k = 0; k < nodes_; ++k) row[k] *= a;
      }
  sums_.assign(static_cast<std::size_t>(T) * nodes_, 0.0);
  decay_.assign(nodes_, 1.0);
  gain_.assign(nodes_, 0.0);
}

void SoeIntensityTracker::reset() { std::fill(sums_.begin(), sums_.end(), 0.0); }

void SoeIntensityTracker::advance(double dt, double* integrals) {
  const int T = params_.types();
  if (integrals) std::fill(integrals, integrals + T, 0.0);
  if (dt <= 0.0) return;
  const auto& s = basis_.rates();
  if (integrals) {
    // decay_ holds expm1(-s dt) first so that slow nodes integrate without cancellation.
    for (int k = 1; k < nodes_; ++k) {
      decay_[k] = std::expm1(-s[k] * dt);
      gain_[k] = -decay_[k] / s[k];
      decay_[k] += 1.0;
    }
  } else {
    basis_.decay_factors(dt, decay_.data());
  }
  for (int tgt = 0; tgt < T; ++tgt) {
    if (!active_[tgt]) continue;
    double* y = &sums_[static_cast<std::size_t>(tgt) * nodes_];
    if (integrals) {
      double acc = y[0] * dt;
      for (int k = 1; k < nodes_; ++k) acc += y[k] * gain_[k];
      integrals[tgt] = acc;
    }
    for (int k = 1; k < nodes_; ++k) y[k] *= decay_[k];
  }
}

void SoeIntensityTracker::add_event(int type, int state) {
  const int T = params_.types();
  for (int tgt = 0; tgt < T; ++tgt) {
    const std::size_t i = params_.index(type, state, tgt);
    if (params_.alpha[i] == 0.0) continue;
    const double* row = &table_[i * nodes_];
    double* y = &sums_[static_cast<std::size_t>(tgt) * nodes_];
    for (int k = 0; k < nodes_; ++k) y[k] += row[k];
  }
}

double SoeIntensityTracker::excitation(int target) const {
  if (!active_[target]) return 0.0;
  const double* y = &sums_[static_cast<std::size_t>(target) * nodes_];
  double sum = 0.0;
  for (int k = 0; k < nodes_; ++k) sum += y[k];
  return sum;
}

}  // namespace lobimpact
