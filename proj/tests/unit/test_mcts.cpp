#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "pinnmcts/mcts.hpp"
#include "toy_fomdp.hpp"

using namespace pinnmcts;
using namespace pinnmcts::mcts;
using namespace pinnmcts::toy;

namespace {

SearchConfig toy_cfg(std::size_t sims, std::size_t depth) {
  SearchConfig c;
  c.n_simulations = sims;
  c.max_depth = depth;
  return c;
}

template <class State>
void check_tree_invariants(const Tree<State>& tree) {
  for (const auto& n : tree.nodes) {
    std::uint32_t sum = 0;
    for (const auto& e : tree.edges_of(n)) {
      EXPECT_GE(e.q, 0.0);
      EXPECT_LE(e.q, 1.0);
      sum += e.visits;
    }
    if (n.expanded) EXPECT_EQ(n.visits, 1 + sum);
  }
}

}  // namespace

TEST(Score, HandEvaluated) {
  // Q + P alpha sqrt(N) / (1 + n)
  EXPECT_DOUBLE_EQ(uct_score(0.4, 1.0, 1.0, 4, 1), 0.4 + 2.0 / 2.0);
  EXPECT_DOUBLE_EQ(uct_score(0.4, 0.5, 3.5, 9, 2), 0.4 + 0.5 * 3.5 * 3.0 / 3.0);
}

TEST(Score, FreshNodeTieBreaksToLowestAction) {
  std::vector<Edge> e(5);
  for (int a = 0; a < 5; ++a) {
    e[a].action = a;
    e[a].q = 0.6;
  }
  EXPECT_EQ(select_edge(e, 1, 1.0, SearchMode::vanilla), 0u);
}

TEST(Score, PriorSteersAlphaZero) {
  std::vector<Edge> e(5);
  const double P[5] = {0.025, 0.025, 0.9, 0.025, 0.025};
  for (int a = 0; a < 5; ++a) {
    e[a].action = a;
    e[a].q = 0.5;
    e[a].prior = P[a];
  }
  EXPECT_EQ(select_edge(e, 1, 3.5, SearchMode::alphazero), 2u);
  EXPECT_EQ(select_edge(e, 1, 3.5, SearchMode::vanilla), 0u);
}

TEST(Score, VanishingAlphaIsGreedy) {
  std::vector<Edge> e(3);
  const double q[3] = {0.2, 0.9, 0.5};
  for (int a = 0; a < 3; ++a) {
    e[a].action = a;
    e[a].q = q[a];
    e[a].visits = static_cast<std::uint32_t>(3 - a);
  }
  EXPECT_EQ(select_edge(e, 10, 1e-12, SearchMode::vanilla), 1u);
}

TEST(Backprop, SingleEdge) {
  Edge e;
  e.reward = 0.8;
  e.q = 0.8;
  Edge* p[] = {&e};
  backpropagate(p, 0.97);
  EXPECT_DOUBLE_EQ(e.q, 0.8);
  EXPECT_EQ(e.visits, 1u);
}

TEST(Backprop, TwoEdgePath) {
  Edge a, b;
  a.reward = 0.5;
  a.q = 0.5;
  a.visits = 1;
  b.reward = 1.0;
  b.q = 1.0;
  Edge* p[] = {&a, &b};
  backpropagate(p, 0.5);
  // b: G = 1 -> q = 1. a: G = 0.5 + 0.5 * 1 = 1, normalised by 2 -> 0.5; mean of (0.5, 0.5).
  EXPECT_DOUBLE_EQ(b.q, 1.0);
  EXPECT_DOUBLE_EQ(a.q, 0.5);
  EXPECT_EQ(a.visits, 2u);
  EXPECT_EQ(b.visits, 1u);
}

TEST(Backprop, StaysInUnitInterval) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Edge> edges(8);
  for (int it = 0; it < 500; ++it) {
    std::vector<Edge*> path;
    for (auto& e : edges) {
      e.reward = U(rng);
      path.push_back(&e);
    }
    path.resize(1 + it % 8);
    backpropagate(path, U(rng));
    for (auto* e : path) {
      EXPECT_GE(e->q, 0.0);
      EXPECT_LE(e->q, 1.0);
    }
  }
}

TEST(AllowedActions, Band) {
  const BackupBand band{1.0, 1.0};
  EXPECT_EQ(allowed_actions(21.0, 21.0, band).size(), 5u);
  EXPECT_EQ(allowed_actions(19.9, 21.0, band), std::vector<int>{4});
  EXPECT_EQ(allowed_actions(22.1, 21.0, band), std::vector<int>{0});
  EXPECT_EQ(allowed_actions(20.0, 21.0, band).size(), 5u);
}

TEST(Config, Validation) {
  SearchConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_simulations = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SearchConfig{};
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SearchConfig{};
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(search_mode_from_string("alphazero"), SearchMode::alphazero);
  EXPECT_THROW(search_mode_from_string("muzero"), std::invalid_argument);
}

TEST(Oracle, TwoStepTwoActions) {
  int hits = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const ToyEnv env{2, 2, s};
    const auto r = search(env, ToyState{}, toy_cfg(40, 2));
    hits += r.action == optimal_root_action(env, 0.97);
  }
  EXPECT_GE(hits, 95);
}

TEST(Oracle, ThreeStepThreeActions) {
  int hits = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const ToyEnv env{3, 3, 1000 + s};
    const auto r = search(env, ToyState{}, toy_cfg(270, 3));
    hits += r.action == optimal_root_action(env, 0.97);
  }
  EXPECT_GE(hits, 95);
}

TEST(Oracle, RegretShrinksWithBudget) {
  // Mean root regret over 40 random 4-step problems, for doubling budgets.
  std::vector<double> regret;
  for (std::size_t budget : {10, 20, 40, 80, 160, 320, 640}) {
    double total = 0.0;
    for (std::uint64_t s = 0; s < 40; ++s) {
      const ToyEnv env{3, 4, 7000 + s};
      const double opt = best_return(env, ToyState{}, 0.97);
      const auto r = search(env, ToyState{}, toy_cfg(budget, 4));
      const auto t = env.transition(ToyState{}, r.action);
      total += opt - (t.reward + 0.97 * best_return(env, t.next, 0.97));
    }
    regret.push_back(total / 40.0);
  }
  EXPECT_LT(regret.back(), regret.front());
  EXPECT_LT(regret.back(), 0.05);
}

TEST(Tree, InvariantsOnRandomProblems) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    ToyEnv env{5, 6, s};
    env.allowed = [](const ToyState& st, int a) { return (st.path % 3 != 0) || a == static_cast<int>(st.path % 5); };
    SearchConfig cfg = toy_cfg(50 + 10 * s, 6);
    cfg.gamma = 0.9 + 0.002 * static_cast<double>(s);
    Search<ToyEnv> search(env, cfg);
    const auto r = search.run(ToyState{});
    const auto& tree = search.tree();
    check_tree_invariants(tree);
    EXPECT_EQ(tree.nodes[0].visits, cfg.n_simulations);
    double total = 0.0;
    for (double p : r.visit_dist) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (const auto& n : tree.nodes) {
      EXPECT_LE(n.depth, cfg.max_depth);
      for (const auto& e : tree.edges_of(n)) EXPECT_TRUE(env.allowed(n.state, e.action));
    }
  }
}

TEST(Tree, ForcedRootHasOneChild) {
  ToyEnv env{5, 3, 1};
  env.allowed = [](const ToyState& st, int a) { return st.depth > 0 || a == 4; };
  Search<ToyEnv> search(env, toy_cfg(30, 3));
  const auto r = search.run(ToyState{});
  EXPECT_EQ(r.action, 4);
  EXPECT_EQ(search.tree().nodes[0].num_edges, 1u);
  EXPECT_EQ(r.visit_dist[4], 1.0);
}

TEST(Tree, DepthLimitMarksTerminal) {
  const ToyEnv env{2, 1, 3};
  Search<ToyEnv> search(env, toy_cfg(20, 1));
  search.run(ToyState{});
  for (const auto& n : search.tree().nodes) {
    if (n.depth == 1) {
      EXPECT_FALSE(n.expanded);
    }
  }
  EXPECT_EQ(search.tree().nodes.size(), 3u);
}

TEST(Tree, UnitPriorAlphaZeroEqualsVanilla) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const ToyEnv env{5, 4, 300 + s};
    SearchConfig v = toy_cfg(200, 4);
    SearchConfig a = v;
    a.mode = SearchMode::alphazero;
    const auto rv = search(env, ToyState{}, v);
    const auto ra = search(env, ToyState{}, a);
    EXPECT_EQ(rv.action, ra.action);
    EXPECT_EQ(rv.visit_dist, ra.visit_dist);
  }
}

TEST(Tree, Deterministic) {
  const ToyEnv env{4, 5, 77};
  const auto a = search(env, ToyState{}, toy_cfg(300, 5));
  const auto b = search(env, ToyState{}, toy_cfg(300, 5));
  EXPECT_EQ(a.action, b.action);
  EXPECT_EQ(a.visit_dist, b.visit_dist);
}
