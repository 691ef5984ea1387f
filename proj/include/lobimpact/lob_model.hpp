#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lobimpact {

// Prices are integers in units of 1e-4 currency.
using Price = std::int64_t;

inline constexpr Price kBuyMarketPrice = INT64_MAX;  // sentinel price of a buy market order
inline constexpr Price kSellMarketPrice = 0;         // sentinel price of a sell market order

class SamplingError : public std::runtime_error {
 public:
  SamplingError(const std::string& what, double acceptance_rate)
      : std::runtime_error(what), acceptance_rate_(acceptance_rate) {}
  double acceptance_rate() const { return acceptance_rate_; }

 private:
  double acceptance_rate_;
};

// Best prices plus per-level volumes. Level i sits (i-1) ticks away from the best price.
struct BookSnapshot {
  Price best_ask_price = 0;
  Price best_bid_price = 0;
  std::vector<double> ask_volumes;
  std::vector<double> bid_volumes;
  Price tick_size = 1;

  Price ask_price(int level) const { return best_ask_price + level * tick_size; }  // level is 0-based
  Price bid_price(int level) const { return best_bid_price - level * tick_size; }
  Price spread() const { return best_ask_price - best_bid_price; }
  double mid_price() const { return 0.5 * static_cast<double>(best_ask_price + best_bid_price); }
  void validate() const;
};

// (x1, x2) with x1 in {-1,0,1} and x2 in {-(K-1)/2..(K-1)/2}.
struct StateVariable {
  int x1 = 0;
  int x2 = 0;
  int K = 3;

  int index() const;
  static StateVariable from_index(int index, int K);
  bool operator==(const StateVariable&) const = default;
};

inline int num_states(int K) { return 3 * K; }

struct LimitOrder {
  double time = 0.0;
  double size = 0.0;
  Price price = 0;
  int direction = -1;  // +1 buy, -1 sell
  void validate() const;
};

// Dirichlet parameters of the interleaved volume vector (V^{a,1}, V^{b,1}, ..., V^{a,n}, V^{b,n}),
// one vector per flat state index.
struct DirichletParams {
  int n = 2;
  int K = 3;
  std::vector<std::vector<double>> gamma;

  static DirichletParams uniform(int n, int K);
  const std::vector<double>& at(int state_index) const;
  void validate() const;
};

double queue_imbalance(const BookSnapshot& snapshot, int n);
// Imbalance of an interleaved volume vector (ask, bid, ask, bid, ...).
double queue_imbalance(const std::vector<double>& interleaved);

// Bucket [lo, hi) of x2; the top bucket is closed at 1.
std::pair<double, double> imbalance_bucket(int x2, int K);
int discretise_imbalance(double imbalance, int K);

std::pair<LimitOrder, LimitOrder> decompose_limit_order(const LimitOrder& order,
                                                        const BookSnapshot& snapshot);

// Explicit price ladder used to replay order flow level by level.
struct PriceLadder {
  std::map<Price, double> asks;
  std::map<Price, double> bids;

  static PriceLadder from_snapshot(const BookSnapshot& snapshot);
  // Consumes the market component from the best levels of the opposite side.
  void execute_market(const LimitOrder& market);
  // Adds the queued component as resting volume on its own side.
  void queue_limit(const LimitOrder& queued);
  // Nonzero levels as (price, volume), asks then bids, ascending price.
  std::vector<std::pair<Price, double>> nonzero_asks() const;
  std::vector<std::pair<Price, double>> nonzero_bids() const;
};

std::vector<double> sample_volumes(const DirichletParams& gamma, int state_index,
                                   std::mt19937_64& rng);
std::vector<double> sample_volumes_conditional(const DirichletParams& gamma,
                                               const StateVariable& state, std::mt19937_64& rng,
                                               int max_attempts = 10000);
std::vector<double> sample_volumes_conditional(const DirichletParams& gamma,
                                               const StateVariable& state, std::uint64_t seed,
                                               int max_attempts = 10000);

enum class Side { buy, sell };

struct MarketOrderOutcome {
  StateVariable state;
  double order_size = 0.0;             // normalised size q_M actually sent
  std::vector<double> volumes_before;  // interleaved
  std::vector<double> volumes_after;
};

// Book-mechanics state update for a market order of size c times the same-side depth.
MarketOrderOutcome apply_market_order(const StateVariable& state, const DirichletParams& gamma,
                                      double order_size_fraction, Side side,
                                      std::mt19937_64& rng, int max_attempts = 10000);
MarketOrderOutcome apply_market_order(const StateVariable& state, const DirichletParams& gamma,
                                      double order_size_fraction, Side side, std::uint64_t seed,
                                      int max_attempts = 10000);
// Deterministic part of the update given an already sampled volume vector.
MarketOrderOutcome apply_market_order_to_volumes(const std::vector<double>& volumes, int K,
                                                 double order_size_fraction, Side side);

struct PricePath {
  double p0 = 0.0;
  std::vector<double> times;
  std::vector<double> values;  // value from times[i] (inclusive) onwards
  double at(double t) const;
  double final_value() const { return values.empty() ? p0 : values.back(); }
};

PricePath mid_price_proxy(double p0, Price tick,
                          const std::vector<std::pair<double, int>>& events);

}  // namespace lobimpact
