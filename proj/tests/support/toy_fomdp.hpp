#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pinnmcts/mcts.hpp"

namespace pinnmcts::toy {

// Tree-shaped deterministic MDP: the state is the action path so far, rewards are hashed per (path, action).
struct ToyState {
  std::uint64_t path = 1;  // base-(A+1) encoding of the actions taken
  std::size_t depth = 0;
};

struct ToyEnv {
  using State = ToyState;
  std::size_t A = 2;
  std::size_t depth = 2;
  std::uint64_t seed = 0;
  std::function<bool(const ToyState&, int)> allowed;  // optional pruning rule

  std::size_t num_actions() const { return A; }
  void allowed_actions(const ToyState& s, std::vector<int>& out) const {
    out.clear();
    for (std::size_t a = 0; a < A; ++a) {
      if (!allowed || allowed(s, static_cast<int>(a))) out.push_back(static_cast<int>(a));
    }
  }
  double reward(const ToyState& s, int a) const {
    std::uint64_t x = (s.path * 0x9E3779B97F4A7C15ULL) ^ (seed * 0xBF58476D1CE4E5B9ULL) ^ static_cast<std::uint64_t>(a + 1);
    x ^= x >> 31;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 29;
    return static_cast<double>(x >> 11) / 9007199254740992.0;
  }
  mcts::Transition<ToyState> transition(const ToyState& s, int a) const {
    return {ToyState{s.path * (A + 1) + static_cast<std::uint64_t>(a) + 1, s.depth + 1}, reward(s, a)};
  }
  void prior(const ToyState&, std::span<const int> actions, std::span<double> out) const {
    for (int a : actions) out[static_cast<std::size_t>(a)] = 1.0;
  }
};

// Exhaustive optimum of the discounted return over full-depth paths.
inline double best_return(const ToyEnv& env, const ToyState& s, double gamma) {
  if (s.depth == env.depth) return 0.0;
  double best = -1.0;
  for (std::size_t a = 0; a < env.A; ++a) {
    const auto t = env.transition(s, static_cast<int>(a));
    best = std::max(best, t.reward + gamma * best_return(env, t.next, gamma));
  }
  return best;
}

inline int optimal_root_action(const ToyEnv& env, double gamma) {
  int arg = 0;
  double best = -1.0;
  for (std::size_t a = 0; a < env.A; ++a) {
    const auto t = env.transition(ToyState{}, static_cast<int>(a));
    const double v = t.reward + gamma * best_return(env, t.next, gamma);
    if (v > best) {
      best = v;
      arg = static_cast<int>(a);
    }
  }
  return arg;
}

}  // namespace pinnmcts::toy
