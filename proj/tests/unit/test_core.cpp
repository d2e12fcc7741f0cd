#include <gtest/gtest.h>

#include <random>

#include "pinnmcts/core.hpp"

using namespace pinnmcts;

TEST(TimeGrid, HourOfDayWraps) {
  TimeGrid g(22.0, 0.5, 10);
  EXPECT_DOUBLE_EQ(g.hour_of_day(0), 22.0);
  EXPECT_DOUBLE_EQ(g.hour_of_day(3), 23.5);
  EXPECT_DOUBLE_EQ(g.hour_of_day(4), 0.0);
  EXPECT_DOUBLE_EQ(g.hour_of_day(52), 0.0);
  EXPECT_EQ(g.steps_per_day(), 48u);
}

TEST(TimeGrid, RejectsInvalid) {
  EXPECT_THROW(TimeGrid(0.0, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(TimeGrid(0.0, 0.5, 0), std::invalid_argument);
  EXPECT_THROW(TimeGrid(24.0, 0.5, 1), std::invalid_argument);
}

TEST(Reward, ZeroWhenIdleAtSetpoint) {
  EXPECT_EQ(reward(0.0, 0.3, 0.5, 21.0, 21.0, ComfortWeights{}), 0.0);
}

TEST(Reward, EnergyCost) {
  // 4 kW for half an hour is 2 kWh.
  EXPECT_NEAR(reward(4000.0, 0.2, 0.5, 21.0, 21.0, ComfortWeights{}), -0.4, 1e-12);
}

TEST(Reward, AsymmetricComfort) {
  const ComfortWeights w{0.5, 0.1};
  EXPECT_NEAR(reward(0.0, 0.2, 0.5, 21.0, 20.0, w), -0.5, 1e-12);
  EXPECT_NEAR(reward(0.0, 0.2, 0.5, 21.0, 22.0, w), -0.1, 1e-12);
}

TEST(Reward, NegativePriceMakesHeatingPay) {
  EXPECT_GT(reward(4000.0, -0.1, 0.5, 21.0, 21.0, ComfortWeights{}), 0.0);
}

TEST(Reward, NonincreasingInPowerForPositivePrice) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> price(0.0, 0.4), temp(15.0, 25.0), power(0.0, 4000.0);
  for (int i = 0; i < 1000; ++i) {
    const double p = price(rng), Ts = temp(rng), Tr = temp(rng);
    const double a = power(rng), b = power(rng);
    const double lo = std::min(a, b), hi = std::max(a, b);
    EXPECT_LE(reward(hi, p, 0.5, Ts, Tr, ComfortWeights{}), reward(lo, p, 0.5, Ts, Tr, ComfortWeights{}));
    EXPECT_LE(reward(hi, p, 0.5, Ts, Tr, ComfortWeights{}), 0.0);
  }
}

TEST(Normalize, Endpoints) {
  const RewardNormalizer n{-1.8, 0.0};
  EXPECT_EQ(normalize_reward(0.0, n), 1.0);
  EXPECT_EQ(normalize_reward(-1.8, n), 0.0);
  EXPECT_DOUBLE_EQ(normalize_reward(-0.9, n), 0.5);
}

TEST(Normalize, ClipsOutsideBounds) {
  const RewardNormalizer n{-1.0, 0.0};
  EXPECT_EQ(normalize_reward(0.4, n), 1.0);
  EXPECT_EQ(normalize_reward(-7.0, n), 0.0);
}

TEST(Normalize, DegenerateNormalizerThrows) {
  EXPECT_THROW(normalize_reward(0.0, RewardNormalizer{0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW((RewardNormalizer{0.5, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((RewardNormalizer{-1.0, 0.1}.validate()), std::invalid_argument);
}

TEST(Normalize, MonotoneAndInUnitInterval) {
  const RewardNormalizer n{-1.5, 0.0};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> rho(-3.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = rho(rng), b = rho(rng);
    const double na = normalize_reward(a, n), nb = normalize_reward(b, n);
    EXPECT_GE(na, 0.0);
    EXPECT_LE(na, 1.0);
    if (a <= b) EXPECT_LE(na, nb);
  }
}

TEST(RewardBounds, WorstCase) {
  const RewardNormalizer n = reward_bounds(4000.0, 0.4, 0.5, ComfortWeights{0.5, 0.1});
  EXPECT_NEAR(n.rho_min, -1.8, 1e-12);
  EXPECT_EQ(n.rho_max, 0.0);
}

TEST(RewardBounds, OnlyComfortFloorWithoutData) {
  const RewardNormalizer n = reward_bounds(0.0, 0.0, 0.5, ComfortWeights{0.5, 0.1});
  EXPECT_DOUBLE_EQ(n.rho_min, -1.0);
  EXPECT_EQ(n.rho_max, 0.0);
}

TEST(RewardBounds, UsesMagnitudeOfNegativePrices) {
  EXPECT_NEAR(reward_bounds(4000.0, -0.4, 0.5, ComfortWeights{}).rho_min, -1.8, 1e-12);
}

TEST(ComfortWeights, Validation) {
  EXPECT_NO_THROW(ComfortWeights{}.validate());
  EXPECT_THROW((ComfortWeights{0.1, 0.1}.validate()), std::invalid_argument);
  EXPECT_THROW((ComfortWeights{0.5, 0.0}.validate()), std::invalid_argument);
}

TEST(Range, SymmetricRoundTrip) {
  EXPECT_DOUBLE_EQ(ranges::kRoomTemp.to_symmetric(15.0), -1.0);
  EXPECT_DOUBLE_EQ(ranges::kRoomTemp.to_symmetric(25.0), 1.0);
  EXPECT_DOUBLE_EQ(ranges::kRoomTemp.from_symmetric(0.0), 20.0);
  EXPECT_DOUBLE_EQ(ranges::kPower.from_symmetric(ranges::kPower.to_symmetric(1234.0)), 1234.0);
}
