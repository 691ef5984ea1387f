#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "lobimpact/lob_model.hpp"
#include "oracles.hpp"

using namespace lobimpact;

namespace {

BookSnapshot make_book(Price ask, Price bid, std::vector<double> asks, std::vector<double> bids,
                       Price tick = 100) {
  BookSnapshot s;
  s.best_ask_price = ask;
  s.best_bid_price = bid;
  s.ask_volumes = std::move(asks);
  s.bid_volumes = std::move(bids);
  s.tick_size = tick;
  return s;
}

}  // namespace

TEST(QueueImbalance, LevelOneOfFirstGoldenRow) {
  const auto s = make_book(460800, 460600, {200}, {900});
  EXPECT_NEAR(queue_imbalance(s, 1), 700.0 / 1100.0, 1e-15);
  EXPECT_NEAR(queue_imbalance(s, 1), 0.63636, 1e-5);
}

TEST(QueueImbalance, BalancedBookIsZero) {
  const auto s = make_book(460800, 460600, {321, 5}, {321, 5});
  EXPECT_EQ(queue_imbalance(s, 2), 0.0);
}

TEST(QueueImbalance, TwoLevelsOfGoldenRow) {
  const auto s = make_book(460800, 460700, {1600, 2552}, {100, 1029});
  EXPECT_NEAR(queue_imbalance(s, 2), (1129.0 - 4152.0) / 5281.0, 1e-15);
  EXPECT_NEAR(queue_imbalance(s, 2), -0.57243, 1e-5);
}

TEST(QueueImbalance, EmptyBookIsDomainError) {
  const auto s = make_book(460800, 460600, {0, 0}, {0, 0});
  EXPECT_THROW(queue_imbalance(s, 2), std::domain_error);
  EXPECT_THROW(queue_imbalance(std::vector<double>{0, 0}), std::domain_error);
}

TEST(QueueImbalance, BoundedAndAntisymmetric) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(3), b(3);
    for (int i = 0; i < 3; ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
    }
    const double i1 = queue_imbalance(make_book(200, 100, a, b), 3);
    const double i2 = queue_imbalance(make_book(200, 100, b, a), 3);
    EXPECT_GE(i1, -1.0);
    EXPECT_LE(i1, 1.0);
    EXPECT_EQ(i1, -i2);
  }
}

TEST(DiscretiseImbalance, Examples) {
  EXPECT_EQ(discretise_imbalance(0.636, 3), 1);
  EXPECT_EQ(discretise_imbalance(0.0, 3), 0);
  EXPECT_EQ(discretise_imbalance(-1.0, 5), -2);
  EXPECT_EQ(discretise_imbalance(1.0, 3), 1);
  EXPECT_EQ(discretise_imbalance(1.0 / 3.0, 3), 1);
  EXPECT_EQ(discretise_imbalance(-1.0 / 3.0, 3), 0);
  EXPECT_EQ(discretise_imbalance(0.3, 1), 0);
}

TEST(DiscretiseImbalance, Errors) {
  EXPECT_THROW(discretise_imbalance(1.0000001, 3), std::domain_error);
  EXPECT_THROW(discretise_imbalance(-1.5, 3), std::domain_error);
  EXPECT_THROW(discretise_imbalance(0.0, 4), std::invalid_argument);
}

TEST(DiscretiseImbalance, MonotoneWithFullImage) {
  for (int K : {1, 3, 5, 7, 9}) {
    int last = -1000;
    std::set<int> image;
    for (int i = 0; i <= 20000; ++i) {
      const double x = -1.0 + 2.0 * i / 20000.0;
      const int b = discretise_imbalance(x, K);
      EXPECT_GE(b, last);
      last = b;
      image.insert(b);
      const auto [lo, hi] = imbalance_bucket(b, K);
      EXPECT_GE(x, lo);
      if (b < (K - 1) / 2) EXPECT_LT(x, hi);
    }
    EXPECT_EQ(static_cast<int>(image.size()), K);
    EXPECT_EQ(*image.begin(), -(K - 1) / 2);
    EXPECT_EQ(*image.rbegin(), (K - 1) / 2);
  }
}

TEST(StateVariable, FlatIndexIsBijection) {
  for (int K : {1, 3, 5}) {
    std::set<int> seen;
    for (int x1 = -1; x1 <= 1; ++x1)
      for (int x2 = -(K - 1) / 2; x2 <= (K - 1) / 2; ++x2) {
        const StateVariable s{x1, x2, K};
        EXPECT_EQ(s.index(), (x1 + 1) * K + x2 + (K - 1) / 2);
        EXPECT_EQ(StateVariable::from_index(s.index(), K), s);
        seen.insert(s.index());
      }
    EXPECT_EQ(static_cast<int>(seen.size()), 3 * K);
    EXPECT_EQ(*seen.rbegin(), 3 * K - 1);
  }
}

TEST(DecomposeLimitOrder, SellPartlyCrossing) {
  const auto s = make_book(300, 200, {10}, {50});
  const auto [m, q] = decompose_limit_order({0.0, 80.0, 200, -1}, s);
  EXPECT_EQ(m.size, 50.0);
  EXPECT_EQ(m.price, kSellMarketPrice);
  EXPECT_EQ(q.size, 30.0);
  EXPECT_EQ(q.price, 200);
  EXPECT_EQ(q.direction, -1);
}

TEST(DecomposeLimitOrder, SellAboveBestBidIsFullyQueued) {
  const auto s = make_book(400, 200, {10, 10}, {50, 60});
  const auto [m, q] = decompose_limit_order({0.0, 80.0, 300, -1}, s);
  EXPECT_EQ(m.size, 0.0);
  EXPECT_EQ(q.size, 80.0);
}

TEST(DecomposeLimitOrder, BuyWalkingTwoLevels) {
  const auto s = make_book(300, 200, {300, 400}, {10, 10});
  const auto [m, q] = decompose_limit_order({0.0, 500.0, 400, +1}, s);
  EXPECT_EQ(m.size, 500.0);
  EXPECT_EQ(m.price, kBuyMarketPrice);
  EXPECT_EQ(q.size, 0.0);
  // Oracle: matching engine fills 300 then 200, leaving 200 at best_ask + tick.
  auto oracle_book = oracle::book_from_snapshot(s);
  oracle_book.submit_limit(500.0, 400, +1);
  ASSERT_EQ(oracle_book.asks.size(), 1u);
  EXPECT_EQ(oracle_book.asks[0], (std::pair<Price, double>{400, 200.0}));
}

TEST(DecomposeLimitOrder, InvalidOrderRejected) {
  const auto s = make_book(300, 200, {1}, {1});
  EXPECT_THROW(decompose_limit_order({0.0, 0.0, 200, -1}, s), std::invalid_argument);
  EXPECT_THROW(decompose_limit_order({0.0, 1.0, 200, 0}, s), std::invalid_argument);
}

// Replaying the market component then the queued component gives the same book as a
// matching engine applying the original order, bit for bit.
TEST(DecomposeLimitOrder, MatchesMatchingEngineOnRandomBooks) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int levels = 1 + static_cast<int>(rng() % 5);
    const Price tick = 100;
    const Price bid = 100000 + tick * static_cast<Price>(rng() % 50);
    const Price ask = bid + tick * (1 + static_cast<Price>(rng() % 3));
    std::vector<double> av(levels), bv(levels);
    for (int i = 0; i < levels; ++i) {
      av[i] = static_cast<double>(rng() % 4 == 0 ? 0 : 1 + rng() % 500);
      bv[i] = static_cast<double>(rng() % 4 == 0 ? 0 : 1 + rng() % 500);
    }
    av[0] = 1 + static_cast<double>(rng() % 500);
    bv[0] = 1 + static_cast<double>(rng() % 500);
    const auto s = make_book(ask, bid, av, bv, tick);
    const int direction = rng() % 2 ? 1 : -1;
    const Price ref = direction < 0 ? bid : ask;
    const Price price = ref + direction * tick * (static_cast<Price>(rng() % 9) - 3);
    if (price <= 0) continue;
    const double size = static_cast<double>(1 + rng() % 2500);
    const LimitOrder order{0.0, size, price, direction};

    const auto [market, queued] = decompose_limit_order(order, s);
    EXPECT_EQ(market.size + queued.size, size);
    PriceLadder ladder = PriceLadder::from_snapshot(s);
    ladder.execute_market(market);
    ladder.queue_limit(queued);

    auto engine = oracle::book_from_snapshot(s);
    engine.submit_limit(size, price, direction);
    ASSERT_EQ(ladder.nonzero_asks(), engine.asks_ascending()) << "trial " << trial;
    ASSERT_EQ(ladder.nonzero_bids(), engine.bids_ascending()) << "trial " << trial;
  }
}

TEST(SampleVolumes, SingleBucketAcceptsEverything) {
  const auto gamma = DirichletParams::uniform(2, 1);
  const auto v = sample_volumes_conditional(gamma, StateVariable{0, 0, 1}, std::uint64_t{5}, 1);
  EXPECT_EQ(v.size(), 4u);
}

TEST(SampleVolumes, Deterministic) {
  const auto gamma = DirichletParams::uniform(2, 3);
  const StateVariable s{1, -1, 3};
  EXPECT_EQ(sample_volumes_conditional(gamma, s, std::uint64_t{77}),
            sample_volumes_conditional(gamma, s, std::uint64_t{77}));
}

TEST(SampleVolumes, ConditionalDrawsOnSimplexInsideBucket) {
  DirichletParams gamma = DirichletParams::uniform(2, 3);
  gamma.gamma[4] = {0.7, 2.0, 1.5, 0.4};
  std::mt19937_64 rng(3);
  for (int x2 = -1; x2 <= 1; ++x2) {
    const StateVariable s{0, x2, 3};
    for (int i = 0; i < 2000; ++i) {
      const auto v = sample_volumes_conditional(gamma, s, rng);
      double total = 0.0;
      for (double x : v) {
        EXPECT_GE(x, 0.0);
        total += x;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
      EXPECT_EQ(discretise_imbalance(queue_imbalance(v), 3), x2);
    }
  }
}

// The success rate of a one-attempt conditional draw equals the probability of the bucket
// under the unconditional sampler.
TEST(SampleVolumes, AcceptanceMatchesUnconditionalBucketMass) {
  const auto gamma = DirichletParams::uniform(2, 3);
  const StateVariable s{0, 1, 3};
  std::mt19937_64 rng(99);
  const int draws = 40000;
  int hits = 0;
  for (int i = 0; i < draws; ++i)
    if (discretise_imbalance(queue_imbalance(sample_volumes(gamma, s.index(), rng)), 3) == 1) ++hits;
  int accepted = 0;
  for (int i = 0; i < draws; ++i) {
    try {
      sample_volumes_conditional(gamma, s, static_cast<std::uint64_t>(1000 + i), 1);
      ++accepted;
    } catch (const SamplingError&) {
    }
  }
  const double p1 = static_cast<double>(hits) / draws, p2 = static_cast<double>(accepted) / draws;
  const double se = std::sqrt(p1 * (1 - p1) / draws * 2.0);
  EXPECT_NEAR(p1, p2, 4.0 * se);
  EXPECT_GT(p1, 0.2);
  EXPECT_LT(p1, 0.5);
}

TEST(SampleVolumes, ExhaustedBudgetReportsRate) {
  DirichletParams gamma = DirichletParams::uniform(1, 3);
  gamma.gamma[StateVariable{0, 1, 3}.index()] = {50.0, 0.05};  // almost all mass on the ask
  try {
    sample_volumes_conditional(gamma, StateVariable{0, 1, 3}, std::uint64_t{1}, 20);
    FAIL() << "expected SamplingError";
  } catch (const SamplingError& e) {
    EXPECT_GE(e.acceptance_rate(), 0.0);
    EXPECT_LT(e.acceptance_rate(), 1.0 / 20.0);
  }
}

TEST(ApplyMarketOrder, ZeroSizeLeavesState) {
  const auto gamma = DirichletParams::uniform(2, 3);
  for (int x2 = -1; x2 <= 1; ++x2) {
    const StateVariable s{0, x2, 3};
    const auto out = apply_market_order(s, gamma, 0.0, Side::sell, std::uint64_t{5});
    EXPECT_EQ(out.state.x1, 0);
    EXPECT_EQ(out.state.x2, x2);
    EXPECT_EQ(out.volumes_after, out.volumes_before);
  }
}

TEST(ApplyMarketOrder, FullDepletion) {
  const auto gamma = DirichletParams::uniform(2, 3);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto out = apply_market_order(StateVariable{0, 1, 3}, gamma, 1.0, Side::sell, seed);
    EXPECT_EQ(out.state.x1, -1);
    EXPECT_EQ(out.state.x2, -1);
    EXPECT_EQ(out.volumes_after[1], 0.0);
    EXPECT_EQ(out.volumes_after[3], 0.0);
    const auto buy = apply_market_order(StateVariable{0, -1, 3}, gamma, 1.0, Side::buy, seed);
    EXPECT_EQ(buy.state.x1, 1);
    EXPECT_EQ(buy.state.x2, 1);
  }
}

TEST(ApplyMarketOrder, DeterministicWalkRule) {
  // Interleaved (a1, b1, a2, b2); depth on the bid side is 0.5, so c = 0.5 sends 0.25.
  const auto walk = apply_market_order_to_volumes({0.25, 0.1, 0.25, 0.4}, 3, 0.5, Side::sell);
  EXPECT_EQ(walk.state.x1, -1);
  EXPECT_NEAR(walk.order_size, 0.25, 1e-15);
  EXPECT_EQ(walk.volumes_after[1], 0.0);
  EXPECT_NEAR(walk.volumes_after[3], 0.25, 1e-15);
  // Remaining bids 0.25 vs asks 0.5: imbalance -1/3 is the lower edge of the centre bucket.
  EXPECT_EQ(walk.state.x2, 0);
  const auto stay = apply_market_order_to_volumes({0.25, 0.4, 0.25, 0.1}, 3, 0.5, Side::sell);
  EXPECT_EQ(stay.state.x1, 0);
  EXPECT_NEAR(stay.volumes_after[1], 0.15, 1e-15);
}

// Concentrating bid mass deeper in the book under negative imbalance makes a c = 0.5 sell
// order walk level 1 essentially always.
TEST(ApplyMarketOrder, HalfDepthOrderWalksThinBestBid) {
  DirichletParams gamma = DirichletParams::uniform(2, 3);
  for (auto& g : gamma.gamma) g = {4.0, 0.05, 4.0, 8.0};
  int walks = 0;
  const int trials = 2000;
  std::mt19937_64 rng(8);
  for (int i = 0; i < trials; ++i)
    walks += apply_market_order(StateVariable{0, -1, 3}, gamma, 0.5, Side::sell, rng).state.x1 == -1;
  EXPECT_GT(static_cast<double>(walks) / trials, 0.999);
}

TEST(ApplyMarketOrder, NeverRaisesBidsOrTouchesAsks) {
  DirichletParams gamma = DirichletParams::uniform(3, 5);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 3000; ++i) {
    const StateVariable s = StateVariable::from_index(static_cast<int>(rng() % 15), 5);
    const auto out = apply_market_order(s, gamma, u(rng), Side::sell, rng);
    for (int k = 0; k < 3; ++k) {
      EXPECT_LE(out.volumes_after[2 * k + 1], out.volumes_before[2 * k + 1]);
      EXPECT_EQ(out.volumes_after[2 * k], out.volumes_before[2 * k]);
    }
  }
}

TEST(MidPriceProxy, Examples) {
  const auto cancel = mid_price_proxy(460650, 100, {{1.0, 1}, {2.0, -1}});
  EXPECT_EQ(cancel.final_value(), 460650.0);
  EXPECT_EQ(cancel.at(1.5), 460700.0);
  const auto empty = mid_price_proxy(460650, 100, {});
  EXPECT_EQ(empty.at(1e9), 460650.0);
  const auto up = mid_price_proxy(460650, 100, {{1.0, 1}, {2.0, 1}, {3.0, 1}});
  EXPECT_EQ(up.final_value(), 460800.0);
  EXPECT_EQ(up.at(0.5), 460650.0);
  EXPECT_EQ(up.at(2.0), 460750.0);
}

TEST(BookSnapshot, Validation) {
  EXPECT_THROW(make_book(200, 200, {1}, {1}).validate(), std::invalid_argument);
  EXPECT_THROW(make_book(250, 100, {1}, {1}).validate(), std::invalid_argument);
  EXPECT_THROW(make_book(200, 100, {0}, {1}).validate(), std::invalid_argument);
  EXPECT_NO_THROW(make_book(200, 100, {1, 0}, {1, 3}).validate());
}
