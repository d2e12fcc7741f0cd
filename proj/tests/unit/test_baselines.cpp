#include <gtest/gtest.h>

#include <algorithm>

#include "pinnmcts/baselines.hpp"

using namespace pinnmcts;
using namespace pinnmcts::baselines;

TEST(BangBang, PrintedCases) {
  EXPECT_EQ(bang_bang(20.9, 21.0), 1.0);
  EXPECT_EQ(bang_bang(21.0, 21.0), 0.0);
  EXPECT_EQ(bang_bang(26.0, 21.0), 0.0);
}

TEST(DiscreteRule, PrintedCases) {
  EXPECT_EQ(discrete_rule(21.5, 21.0), 0.0);
  EXPECT_EQ(discrete_rule(20.9, 21.0), 0.5);
  EXPECT_EQ(discrete_rule(20.7, 21.0), 1.0);
}

TEST(DiscreteRule, EveryBranch) {
  EXPECT_EQ(discrete_rule(21.0, 21.0), 0.25);  // equality falls through to the next branch
  EXPECT_EQ(discrete_rule(20.97, 21.0), 0.25);
  EXPECT_EQ(discrete_rule(20.8, 21.0), 0.75);
  EXPECT_EQ(discrete_rule(15.0, 21.0), 1.0);
}

TEST(ContinuousRule, PrintedCases) {
  EXPECT_NEAR(continuous_rule(20.7, 21.0), 0.6, 1e-12);
  EXPECT_EQ(continuous_rule(20.5, 21.0), 1.0);
  EXPECT_EQ(continuous_rule(18.0, 21.0), 1.0);
  EXPECT_EQ(continuous_rule(21.0, 21.0), 0.0);
  EXPECT_EQ(continuous_rule(22.0, 21.0), 0.0);
}

TEST(Baselines, MonotoneNonincreasingInRoomTemperature) {
  for (auto rule : {&bang_bang, &discrete_rule, &continuous_rule}) {
    double prev = 2.0;
    for (double T = 17.0; T <= 25.0; T += 0.01) {
      const double u = rule(T, 21.0);
      EXPECT_LE(u, prev);
      prev = u;
    }
  }
}

TEST(Baselines, DiscreteRuleStaysInActionSet) {
  for (double T = 17.0; T <= 25.0; T += 0.003) {
    const double u = discrete_rule(T, 21.0);
    EXPECT_NE(std::find(kActionValues.begin(), kActionValues.end(), u), kActionValues.end());
  }
}

TEST(Baselines, ControllerByName) {
  ObservableState obs;
  obs.T_r = 20.7;
  obs.T_set = 21.0;
  EXPECT_EQ(make_controller("bangbang")(obs, {}).u, 1.0);
  EXPECT_EQ(make_controller("discrete")(obs, {}).u, 1.0);
  EXPECT_NEAR(make_controller("continuous")(obs, {}).u, 0.6, 1e-12);
  EXPECT_THROW(make_controller("pid"), std::invalid_argument);
}
