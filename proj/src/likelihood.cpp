#include <cmath>
#include <limits>

#include "likelihood_engine.hpp"
#include "lobimpact/calibration.hpp"

namespace lobimpact {

namespace detail {

namespace {

constexpr long kExactLimit = 2000;  // histories up to this size are evaluated exactly

// (1 - y^(1-b)) / (b - 1) and its derivative in b.
void tail_mass(double y, double b, double* f, double* df) {
  const double L = std::log(y);
  const double z = std::exp((1.0 - b) * L);
  const double bm1 = b - 1.0;
  *f = (1.0 - z) / bm1;
  if (df) *df = (z * L * bm1 - (1.0 - z)) / (bm1 * bm1);
}

}  // namespace

LikelihoodEngine::LikelihoodEngine(const History& history, double horizon, int d_E, int d_S,
                                   bool use_soe, std::size_t cache_budget_bytes)
    : d_S_(d_S), groups_((d_E + 1) * d_S), horizon_(horizon), use_soe_(use_soe) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("horizon must be positive and finite");
  history.validate(d_E, d_S);
  for (const auto& ev : history.events) {
    if (ev.time > horizon) break;
    if (ev.time < 0.0) throw std::invalid_argument("event times must be non-negative");
    times_.push_back(ev.time);
    types_.push_back(ev.type);
    group_.push_back(ev.type * d_S + ev.state);
  }
  if (use_soe_) {
    basis_ = std::make_unique<PowerLawSoe>(horizon);
    nodes_ = basis_->size();
    const std::size_t n = times_.size();
    if (n > 1 && (n - 1) * nodes_ * sizeof(double) <= cache_budget_bytes) {
      decay_cache_.resize((n - 1) * nodes_);
      for (std::size_t i = 1; i < n; ++i)
        basis_->decay_factors(times_[i] - times_[i - 1], &decay_cache_[(i - 1) * nodes_]);
    }
  }
}

long LikelihoodEngine::count(int target) const {
  long c = 0;
  for (int t : types_) c += (t == target);
  return c;
}

void LikelihoodEngine::decay_row(std::size_t n, double* out) const {
  basis_->decay_factors(times_[n] - times_[n - 1], out);
}

double LikelihoodEngine::evaluate(int target, double nu, const double* alpha, const double* beta,
                                  double* g_nu, double* g_alpha, double* g_beta,
                                  long* zero_index) const {
  if (zero_index) *zero_index = -1;
  if (g_alpha)
    for (int g = 0; g < groups_; ++g) g_alpha[g] = g_beta[g] = 0.0;
  if (g_nu) *g_nu = 0.0;
  const double value = use_soe_
                           ? evaluate_soe(target, nu, alpha, beta, g_nu, g_alpha, g_beta, zero_index)
                           : evaluate_exact(target, nu, alpha, beta, g_nu, g_alpha, g_beta, zero_index);
  if (!std::isfinite(value)) return value;
  // Compensator part, exact for both methods.
  double comp = nu * horizon_;
  if (g_nu) *g_nu -= horizon_;
  for (std::size_t n = 0; n < times_.size(); ++n) {
    const int g = group_[n];
    if (alpha[g] == 0.0 && !g_alpha) continue;
    double f = 0.0, df = 0.0;
    tail_mass(horizon_ - times_[n] + 1.0, beta[g], &f, g_beta ? &df : nullptr);
    comp += alpha[g] * f;
    if (g_alpha) {
      g_alpha[g] -= f;
      g_beta[g] -= alpha[g] * df;
    }
  }
  return value - comp;
}

double LikelihoodEngine::evaluate_exact(int target, double nu, const double* alpha,
                                        const double* beta, double* g_nu, double* g_alpha,
                                        double* g_beta, long* zero_index) const {
  double ll = 0.0;
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (types_[i] != target) continue;
    double lambda = nu;
    for (std::size_t n = 0; n < i; ++n) {
      const int g = group_[n];
      if (alpha[g] != 0.0) lambda += alpha[g] * std::pow(times_[i] - times_[n] + 1.0, -beta[g]);
    }
    if (!(lambda > 0.0)) {
      if (zero_index) *zero_index = static_cast<long>(i);
      return -std::numeric_limits<double>::infinity();
    }
    ll += std::log(lambda);
    if (g_nu) {
      const double inv = 1.0 / lambda;
      *g_nu += inv;
      for (std::size_t n = 0; n < i; ++n) {
        const int g = group_[n];
        const double y = times_[i] - times_[n] + 1.0;
        const double k = std::pow(y, -beta[g]);
        g_alpha[g] += inv * k;
        g_beta[g] -= inv * alpha[g] * std::log(y) * k;
      }
    }
  }
  return ll;
}

double LikelihoodEngine::evaluate_soe(int target, double nu, const double* alpha,
                                      const double* beta, double* g_nu, double* g_alpha,
                                      double* g_beta, long* zero_index) const {
  const int K = nodes_;
  const std::size_t N = times_.size();
  std::vector<double> w(static_cast<std::size_t>(groups_) * K, 0.0);  // alpha * w_k(beta)
  std::vector<char> used(groups_, 0);
  for (std::size_t n = 0; n < N; ++n) used[group_[n]] = 1;
  for (int g = 0; g < groups_; ++g) {
    if (!used[g]) continue;
    double* row = &w[static_cast<std::size_t>(g) * K];
    basis_->weights(beta[g], row);
    for (int k = 0; k < K; ++k) row[k] *= alpha[g];
  }
  std::vector<double> y(K, 0.0), dec(K);
  std::vector<double> inv_lambda(g_nu ? N : 0, 0.0);
  double ll = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    if (n > 0) {
      const double* d = decay_cache_.empty() ? (decay_row(n, dec.data()), dec.data())
                                             : &decay_cache_[(n - 1) * K];
      for (int k = 0; k < K; ++k) y[k] *= d[k];
    }
    if (types_[n] == target) {
      double lambda = nu;
      for (int k = 0; k < K; ++k) lambda += y[k];
      if (!(lambda > 0.0)) {
        if (zero_index) *zero_index = static_cast<long>(n);
        return -std::numeric_limits<double>::infinity();
      }
      ll += std::log(lambda);
      if (g_nu) {
        inv_lambda[n] = 1.0 / lambda;
        *g_nu += inv_lambda[n];
      }
    }
    const double* row = &w[static_cast<std::size_t>(group_[n]) * K];
    for (int k = 0; k < K; ++k) y[k] += row[k];
  }
  if (!g_nu) return ll;

  // Adjoint pass: b_k(n) = sum_{i > n, type target} exp(-s_k (t_i - t_n)) / lambda_i.
  std::vector<double> z(static_cast<std::size_t>(groups_) * K, 0.0);
  std::vector<double> b(K, 0.0);
  for (std::size_t n = N; n-- > 0;) {
    double* zg = &z[static_cast<std::size_t>(group_[n]) * K];
    for (int k = 0; k < K; ++k) zg[k] += b[k];
    if (n == 0) break;
    const double add = inv_lambda[n];
    const double* d = decay_cache_.empty() ? (decay_row(n, dec.data()), dec.data())
                                           : &decay_cache_[(n - 1) * K];
    for (int k = 0; k < K; ++k) b[k] = d[k] * (b[k] + add);
  }
  std::vector<double> wk(K), dlog(K);
  for (int g = 0; g < groups_; ++g) {
    if (!used[g]) continue;
    basis_->weights(beta[g], wk.data());
    basis_->log_weight_derivatives(beta[g], dlog.data());
    const double* zg = &z[static_cast<std::size_t>(g) * K];
    double ga = 0.0, gb = 0.0;
    for (int k = 0; k < K; ++k) {
      const double t = wk[k] * zg[k];
      ga += t;
      gb += t * dlog[k];
    }
    g_alpha[g] += ga;
    g_beta[g] += alpha[g] * gb;
  }
  return ll;
}

}  // namespace detail

namespace {

bool choose_soe(LikelihoodMethod method, std::size_t events) {
  if (method == LikelihoodMethod::exact) return false;
  if (method == LikelihoodMethod::soe) return true;
  return static_cast<long>(events) > detail::kExactLimit;
}

ParamGradient zero_gradient(const HawkesParams& p) {
  return {std::vector<double>(p.nu.size(), 0.0), std::vector<double>(p.alpha.size(), 0.0),
          std::vector<double>(p.beta.size(), 0.0)};
}

void run_target(const detail::LikelihoodEngine& engine, const HawkesParams& params, int target,
                bool with_gradient, LikelihoodResult& out) {
  const int G = engine.groups();
  const int T = params.types();
  std::vector<double> a(G), b(G), ga(G), gb(G);
  for (int g = 0; g < G; ++g) {
    a[g] = params.alpha[static_cast<std::size_t>(g) * T + target];
    b[g] = params.beta[static_cast<std::size_t>(g) * T + target];
  }
  double gnu = 0.0;
  long zero = -1;
  const double v = engine.evaluate(target, params.nu[target], a.data(), b.data(),
                                   with_gradient ? &gnu : nullptr,
                                   with_gradient ? ga.data() : nullptr,
                                   with_gradient ? gb.data() : nullptr, &zero);
  out.value += v;
  if (zero >= 0 && out.zero_intensity_event < 0) {
    out.zero_intensity_event = zero;
    out.diagnostic = "zero intensity of type " + std::to_string(target) + " at event index " +
                     std::to_string(zero);
  }
  if (with_gradient && std::isfinite(v)) {
    out.gradient.nu[target] = gnu;
    for (int g = 0; g < G; ++g) {
      out.gradient.alpha[static_cast<std::size_t>(g) * T + target] = ga[g];
      out.gradient.beta[static_cast<std::size_t>(g) * T + target] = gb[g];
    }
  }
}

}  // namespace

LikelihoodResult log_likelihood_target(const HawkesParams& params, const History& history,
                                       double horizon, int target, bool with_gradient,
                                       LikelihoodMethod method) {
  params.validate();
  if (target < 0 || target > params.d_E) throw std::out_of_range("target type out of range");
  detail::LikelihoodEngine engine(history, horizon, params.d_E, params.d_S,
                                  choose_soe(method, history.events.size()));
  LikelihoodResult out;
  out.gradient = zero_gradient(params);
  run_target(engine, params, target, with_gradient, out);
  return out;
}

LikelihoodResult log_likelihood(const HawkesParams& params, const History& history,
                                double horizon, bool with_gradient, LikelihoodMethod method) {
  params.validate();
  detail::LikelihoodEngine engine(history, horizon, params.d_E, params.d_S,
                                  choose_soe(method, history.events.size()));
  LikelihoodResult out;
  out.gradient = zero_gradient(params);
  for (int e = 1; e <= params.d_E; ++e) run_target(engine, params, e, with_gradient, out);
  return out;
}

}  // namespace lobimpact
