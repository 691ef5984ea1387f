#include "lobimpact/lob_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lobimpact {

void BookSnapshot::validate() const {
  if (tick_size <= 0) throw std::invalid_argument("tick size must be positive");
  if (best_ask_price <= best_bid_price)
    throw std::invalid_argument("best ask price must exceed best bid price");
  if (best_ask_price % tick_size != 0 || best_bid_price % tick_size != 0)
    throw std::invalid_argument("prices must be multiples of the tick size");
  if (ask_volumes.empty() || bid_volumes.empty())
    throw std::invalid_argument("snapshot needs at least one level per side");
  for (double v : ask_volumes)
    if (!(v >= 0.0)) throw std::invalid_argument("volumes must be non-negative");
  for (double v : bid_volumes)
    if (!(v >= 0.0)) throw std::invalid_argument("volumes must be non-negative");
  if (ask_volumes[0] <= 0.0 || bid_volumes[0] <= 0.0)
    throw std::invalid_argument("level-1 volumes must be positive");
}

int StateVariable::index() const {
  const int half = (K - 1) / 2;
  if (K < 1 || K % 2 == 0) throw std::invalid_argument("K must be odd and positive");
  if (x1 < -1 || x1 > 1 || x2 < -half || x2 > half)
    throw std::out_of_range("state component out of range");
  return (x1 + 1) * K + (x2 + half);
}

StateVariable StateVariable::from_index(int index, int K) {
  if (K < 1 || K % 2 == 0) throw std::invalid_argument("K must be odd and positive");
  if (index < 0 || index >= 3 * K) throw std::out_of_range("state index out of range");
  return StateVariable{index / K - 1, index % K - (K - 1) / 2, K};
}

void LimitOrder::validate() const {
  if (!(size > 0.0)) throw std::invalid_argument("order size must be positive");
  if (direction != 1 && direction != -1) throw std::invalid_argument("direction must be +1 or -1");
}

DirichletParams DirichletParams::uniform(int n, int K) {
  DirichletParams p;
  p.n = n;
  p.K = K;
  p.gamma.assign(3 * K, std::vector<double>(2 * n, 1.0));
  return p;
}

const std::vector<double>& DirichletParams::at(int state_index) const {
  if (state_index < 0 || state_index >= static_cast<int>(gamma.size()))
    throw std::out_of_range("no Dirichlet parameters for state " + std::to_string(state_index));
  return gamma[state_index];
}

void DirichletParams::validate() const {
  if (n < 1) throw std::invalid_argument("depth n must be positive");
  if (static_cast<int>(gamma.size()) != 3 * K)
    throw std::invalid_argument("Dirichlet parameters must cover 3K states");
  for (const auto& g : gamma) {
    if (static_cast<int>(g.size()) != 2 * n)
      throw std::invalid_argument("Dirichlet parameter vectors must have 2n entries");
    for (double v : g)
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument("Dirichlet parameters must be positive");
  }
}

double queue_imbalance(const BookSnapshot& snapshot, int n) {
  if (n < 1) throw std::invalid_argument("depth n must be positive");
  if (static_cast<int>(snapshot.ask_volumes.size()) < n ||
      static_cast<int>(snapshot.bid_volumes.size()) < n)
    throw std::invalid_argument("snapshot has fewer than n levels");
  double bid = 0.0, ask = 0.0;
  for (int i = 0; i < n; ++i) {
    bid += snapshot.bid_volumes[i];
    ask += snapshot.ask_volumes[i];
  }
  if (bid + ask <= 0.0) throw std::domain_error("empty book");
  return (bid - ask) / (bid + ask);
}

double queue_imbalance(const std::vector<double>& v) {
  if (v.size() % 2 != 0) throw std::invalid_argument("interleaved volume vector has odd length");
  double bid = 0.0, ask = 0.0;
  for (std::size_t i = 0; i < v.size(); i += 2) {
    ask += v[i];
    bid += v[i + 1];
  }
  if (bid + ask <= 0.0) throw std::domain_error("empty book");
  return (bid - ask) / (bid + ask);
}

namespace {
double bucket_lower(int k, int K) { return (2.0 * k - K) / K; }
}  // namespace

std::pair<double, double> imbalance_bucket(int x2, int K) {
  const int k = x2 + (K - 1) / 2;
  if (K < 1 || K % 2 == 0) throw std::invalid_argument("K must be odd and positive");
  if (k < 0 || k >= K) throw std::out_of_range("x2 out of range");
  return {bucket_lower(k, K), bucket_lower(k + 1, K)};
}

int discretise_imbalance(double imbalance, int K) {
  if (K < 1 || K % 2 == 0) throw std::invalid_argument("K must be odd and positive");
  if (!(imbalance >= -1.0 && imbalance <= 1.0))
    throw std::domain_error("imbalance outside [-1, 1]");
  int k = static_cast<int>(std::floor((imbalance + 1.0) * K / 2.0));
  k = std::clamp(k, 0, K - 1);
  // Align with the exact bucket bounds used by imbalance_bucket.
  while (k + 1 < K && imbalance >= bucket_lower(k + 1, K)) ++k;
  while (k > 0 && imbalance < bucket_lower(k, K)) --k;
  return k - (K - 1) / 2;
}

std::pair<LimitOrder, LimitOrder> decompose_limit_order(const LimitOrder& order,
                                                        const BookSnapshot& snapshot) {
  order.validate();
  snapshot.validate();
  double crossing = 0.0;
  if (order.direction < 0) {
    for (int i = 0; i < static_cast<int>(snapshot.bid_volumes.size()); ++i)
      if (snapshot.bid_price(i) >= order.price) crossing += snapshot.bid_volumes[i];
  } else {
    for (int i = 0; i < static_cast<int>(snapshot.ask_volumes.size()); ++i)
      if (snapshot.ask_price(i) <= order.price) crossing += snapshot.ask_volumes[i];
  }
  const double q_market = std::min(order.size, crossing);
  LimitOrder market{order.time, q_market,
                    order.direction < 0 ? kSellMarketPrice : kBuyMarketPrice, order.direction};
  LimitOrder queued{order.time, order.size - q_market, order.price, order.direction};
  return {market, queued};
}

PriceLadder PriceLadder::from_snapshot(const BookSnapshot& s) {
  PriceLadder ladder;
  for (int i = 0; i < static_cast<int>(s.ask_volumes.size()); ++i)
    if (s.ask_volumes[i] > 0.0) ladder.asks[s.ask_price(i)] = s.ask_volumes[i];
  for (int i = 0; i < static_cast<int>(s.bid_volumes.size()); ++i)
    if (s.bid_volumes[i] > 0.0) ladder.bids[s.bid_price(i)] = s.bid_volumes[i];
  return ladder;
}

void PriceLadder::execute_market(const LimitOrder& market) {
  double remaining = market.size;
  if (market.direction < 0) {
    while (remaining > 0.0 && !bids.empty()) {
      auto best = std::prev(bids.end());
      const double take = std::min(remaining, best->second);
      best->second -= take;
      remaining -= take;
      if (best->second <= 0.0) bids.erase(best);
    }
  } else {
    while (remaining > 0.0 && !asks.empty()) {
      auto best = asks.begin();
      const double take = std::min(remaining, best->second);
      best->second -= take;
      remaining -= take;
      if (best->second <= 0.0) asks.erase(best);
    }
  }
}

void PriceLadder::queue_limit(const LimitOrder& queued) {
  if (queued.size <= 0.0) return;
  if (queued.direction < 0)
    asks[queued.price] += queued.size;
  else
    bids[queued.price] += queued.size;
}

namespace {
std::vector<std::pair<Price, double>> nonzero(const std::map<Price, double>& side) {
  std::vector<std::pair<Price, double>> out;
  for (const auto& [p, v] : side)
    if (v > 0.0) out.emplace_back(p, v);
  return out;
}
}  // namespace

std::vector<std::pair<Price, double>> PriceLadder::nonzero_asks() const { return nonzero(asks); }
std::vector<std::pair<Price, double>> PriceLadder::nonzero_bids() const { return nonzero(bids); }

std::vector<double> sample_volumes(const DirichletParams& gamma, int state_index,
                                   std::mt19937_64& rng) {
  const auto& g = gamma.at(state_index);
  std::vector<double> v(g.size());
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::gamma_distribution<double> dist(g[i], 1.0);
    v[i] = dist(rng);
    total += v[i];
  }
  if (!(total > 0.0)) {
    // Every gamma variate underflowed; fall back to the largest parameter's vertex.
    std::fill(v.begin(), v.end(), 0.0);
    v[std::max_element(g.begin(), g.end()) - g.begin()] = 1.0;
    return v;
  }
  for (double& x : v) x /= total;
  return v;
}

std::vector<double> sample_volumes_conditional(const DirichletParams& gamma,
                                               const StateVariable& state, std::mt19937_64& rng,
                                               int max_attempts) {
  if (max_attempts < 1) throw std::invalid_argument("rejection budget must be positive");
  const int index = state.index();
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    auto v = sample_volumes(gamma, index, rng);
    if (discretise_imbalance(queue_imbalance(v), state.K) == state.x2) return v;
  }
  const double rate_bound = 1.0 / max_attempts;
  throw SamplingError("conditional Dirichlet sampling exhausted " + std::to_string(max_attempts) +
                          " attempts for state " + std::to_string(index) +
                          " (acceptance rate below " + std::to_string(rate_bound) + ")",
                      0.0);
}

std::vector<double> sample_volumes_conditional(const DirichletParams& gamma,
                                               const StateVariable& state, std::uint64_t seed,
                                               int max_attempts) {
  std::mt19937_64 rng(seed);
  return sample_volumes_conditional(gamma, state, rng, max_attempts);
}

MarketOrderOutcome apply_market_order_to_volumes(const std::vector<double>& volumes, int K,
                                                 double c, Side side) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("order size fraction must be >= 0");
  if (volumes.size() < 2 || volumes.size() % 2 != 0)
    throw std::invalid_argument("interleaved volume vector must have 2n entries");
  MarketOrderOutcome out;
  out.volumes_before = volumes;
  out.volumes_after = volumes;
  const std::size_t n = volumes.size() / 2;
  // Sell orders hit bids (odd slots); buy orders hit asks (even slots).
  const std::size_t hit = side == Side::sell ? 1 : 0;
  double depth = 0.0, other = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    depth += volumes[2 * i + hit];
    other += volumes[2 * i + 1 - hit];
  }
  const double q = c * depth;
  out.order_size = q;
  const bool walks = q >= volumes[hit];
  double consumed = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double& level = out.volumes_after[2 * i + hit];
    // An order of the full depth clears every level without rounding residue.
    const double v = q >= depth ? level : std::max(0.0, std::min(level, q - consumed));
    level -= v;
    consumed += v;
  }
  double remaining = 0.0;
  for (std::size_t i = 0; i < n; ++i) remaining += out.volumes_after[2 * i + hit];
  double imbalance;
  if (remaining + other <= 0.0)
    imbalance = side == Side::sell ? -1.0 : 1.0;
  else if (side == Side::sell)
    imbalance = (remaining - other) / (remaining + other);
  else
    imbalance = (other - remaining) / (remaining + other);
  imbalance = std::clamp(imbalance, -1.0, 1.0);
  out.state.K = K;
  out.state.x1 = walks ? (side == Side::sell ? -1 : 1) : 0;
  out.state.x2 = discretise_imbalance(imbalance, K);
  return out;
}

MarketOrderOutcome apply_market_order(const StateVariable& state, const DirichletParams& gamma,
                                      double c, Side side, std::mt19937_64& rng,
                                      int max_attempts) {
  auto volumes = sample_volumes_conditional(gamma, state, rng, max_attempts);
  return apply_market_order_to_volumes(volumes, state.K, c, side);
}

MarketOrderOutcome apply_market_order(const StateVariable& state, const DirichletParams& gamma,
                                      double c, Side side, std::uint64_t seed, int max_attempts) {
  std::mt19937_64 rng(seed);
  return apply_market_order(state, gamma, c, side, rng, max_attempts);
}

double PricePath::at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return p0;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

PricePath mid_price_proxy(double p0, Price tick, const std::vector<std::pair<double, int>>& events) {
  PricePath path;
  path.p0 = p0;
  double level = p0;
  const double half_tick = 0.5 * static_cast<double>(tick);
  for (const auto& [time, x1] : events) {
    level += half_tick * x1;
    path.times.push_back(time);
    path.values.push_back(level);
  }
  return path;
}

}  // namespace lobimpact
