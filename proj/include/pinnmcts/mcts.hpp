#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinnmcts/core.hpp"
#include "pinnmcts/thermal_env.hpp"

namespace pinnmcts::mcts {

enum class SearchMode { vanilla, alphazero };

std::string to_string(SearchMode m);
SearchMode search_mode_from_string(const std::string& s);

struct SearchConfig {
  std::size_t n_simulations = 100;
  std::size_t max_depth = 24;
  double alpha = 1.0;
  double gamma = 0.97;
  BackupBand band;
  SearchMode mode = SearchMode::vanilla;

  void validate() const;
};

// Exploration weight used when a config does not override it.
inline double default_alpha(SearchMode m) { return m == SearchMode::vanilla ? 1.0 : 3.5; }

template <class State>
struct Transition {
  State next;
  double reward = 0.0;  // normalised to [0, 1]
};

// A deterministic environment the search can plan in. Actions are indices into a fixed action set.
template <class E>
concept SearchEnvironment = requires(const E& env, const typename E::State& s, std::vector<int>& actions, int a,
                                     std::span<double> prior_out) {
  { env.num_actions() } -> std::convertible_to<std::size_t>;
  env.allowed_actions(s, actions);
  { env.transition(s, a) } -> std::same_as<Transition<typename E::State>>;
  env.prior(s, std::span<const int>(actions), prior_out);
};

struct Edge {
  int action = 0;
  std::uint32_t visits = 0;
  double q = 0.0;
  double prior = 1.0;
  double reward = 0.0;  // cached immediate normalised reward
  std::int32_t child = -1;
};

template <class State>
struct Node {
  State state;
  std::uint32_t visits = 0;
  std::uint32_t depth = 0;
  bool expanded = false;
  bool terminal = false;
  std::uint32_t first_edge = 0;
  std::uint32_t num_edges = 0;
};

template <class State>
struct Tree {
  std::vector<Node<State>> nodes;  // nodes[0] is the root
  std::vector<Edge> edges;

  std::span<const Edge> edges_of(const Node<State>& n) const { return {edges.data() + n.first_edge, n.num_edges}; }
  std::span<Edge> edges_of(const Node<State>& n) { return {edges.data() + n.first_edge, n.num_edges}; }
};

struct TreeStats {
  std::size_t nodes = 0;
  std::size_t max_depth_reached = 0;
  std::uint32_t root_visits = 0;
};

struct SearchResult {
  int action = 0;                   // chosen action index
  std::vector<double> visit_dist;   // over the full action set
  std::vector<double> root_q;       // Q of each root edge, NaN for pruned actions
  TreeStats stats;
};

// Modified UCT score; `prior` is 1 for the vanilla variant.
inline double uct_score(double q, double prior, double alpha, std::uint32_t node_visits, std::uint32_t edge_visits) {
  return q + prior * alpha * std::sqrt(static_cast<double>(node_visits)) / (1.0 + static_cast<double>(edge_visits));
}

// Index (within `edges`) of the edge maximising the score. Ties go to the lowest action index.
inline std::size_t select_edge(std::span<const Edge> edges, std::uint32_t node_visits, double alpha, SearchMode mode) {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  int best_action = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double p = mode == SearchMode::alphazero ? edges[i].prior : 1.0;
    const double s = uct_score(edges[i].q, p, alpha, node_visits, edges[i].visits);
    if (s > best_score || (s == best_score && edges[i].action < best_action)) {
      best = i;
      best_score = s;
      best_action = edges[i].action;
    }
  }
  return best;
}

// Discounted, length-normalised Q backup along a root-to-leaf path of edges, using each edge's
// cached immediate reward. Keeps every Q inside [0, 1] for gamma <= 1.
inline void backpropagate(std::span<Edge* const> path, double gamma) {
  const std::size_t len = path.size();
  double G = 0.0;
  for (std::size_t k = len; k-- > 0;) {
    G = std::clamp(path[k]->reward, 0.0, 1.0) + gamma * G;
    Edge& e = *path[k];
    const double n = static_cast<double>(e.visits);
    e.q = (n * e.q + G / static_cast<double>(len - k)) / (n + 1.0);
    e.visits += 1;
  }
}

template <class Env>
  requires SearchEnvironment<Env>
class Search {
 public:
  using State = typename Env::State;

  Search(const Env& env, const SearchConfig& cfg) : env_(env), cfg_(cfg) { cfg_.validate(); }

  const Tree<State>& tree() const { return tree_; }

  SearchResult run(const State& root) {
    tree_.nodes.clear();
    tree_.edges.clear();
    tree_.nodes.reserve(cfg_.n_simulations * env_.num_actions() + 1);
    tree_.edges.reserve(cfg_.n_simulations * env_.num_actions() + 1);
    tree_.nodes.push_back(Node<State>{root});
    std::vector<std::uint32_t> node_path;
    std::vector<std::uint32_t> edge_path;
    std::vector<Edge*> edge_ptrs;
    for (std::size_t it = 0; it < cfg_.n_simulations; ++it) {
      node_path.assign(1, 0);
      edge_path.clear();
      std::uint32_t cur = 0;
      while (tree_.nodes[cur].expanded && tree_.nodes[cur].num_edges > 0) {
        const auto& node = tree_.nodes[cur];
        const std::size_t i = select_edge(tree_.edges_of(node), node.visits, cfg_.alpha, cfg_.mode);
        const std::uint32_t eidx = node.first_edge + static_cast<std::uint32_t>(i);
        edge_path.push_back(eidx);
        cur = static_cast<std::uint32_t>(tree_.edges[eidx].child);
        node_path.push_back(cur);
      }
      if (!tree_.nodes[cur].expanded && !tree_.nodes[cur].terminal) expand(cur);

      edge_ptrs.clear();
      for (auto e : edge_path) edge_ptrs.push_back(&tree_.edges[e]);
      if (!edge_ptrs.empty()) backpropagate(edge_ptrs, cfg_.gamma);
      for (auto n : node_path) tree_.nodes[n].visits += 1;
    }
    return summarize();
  }

 private:
  void expand(std::uint32_t idx) {
    if (tree_.nodes[idx].depth >= cfg_.max_depth) {
      tree_.nodes[idx].terminal = true;
      return;
    }
    env_.allowed_actions(tree_.nodes[idx].state, actions_);
    if (actions_.empty()) throw std::logic_error("search: environment returned no allowed actions");
    std::sort(actions_.begin(), actions_.end());
    priors_.assign(env_.num_actions(), 1.0);
    if (cfg_.mode == SearchMode::alphazero) env_.prior(tree_.nodes[idx].state, actions_, priors_);

    const auto first = static_cast<std::uint32_t>(tree_.edges.size());
    const std::uint32_t depth = tree_.nodes[idx].depth + 1;
    for (int a : actions_) {
      Transition<State> tr = env_.transition(tree_.nodes[idx].state, a);
      Edge e;
      e.action = a;
      e.reward = std::clamp(tr.reward, 0.0, 1.0);
      e.q = e.reward;
      e.prior = priors_[static_cast<std::size_t>(a)];
      e.child = static_cast<std::int32_t>(tree_.nodes.size());
      Node<State> child{std::move(tr.next)};
      child.depth = depth;
      tree_.nodes.push_back(std::move(child));
      tree_.edges.push_back(e);
    }
    auto& node = tree_.nodes[idx];
    node.first_edge = first;
    node.num_edges = static_cast<std::uint32_t>(actions_.size());
    node.expanded = true;
  }

  SearchResult summarize() const {
    SearchResult r;
    const std::size_t na = env_.num_actions();
    r.visit_dist.assign(na, 0.0);
    r.root_q.assign(na, std::numeric_limits<double>::quiet_NaN());
    const auto& root = tree_.nodes[0];
    r.stats.nodes = tree_.nodes.size();
    r.stats.root_visits = root.visits;
    for (const auto& n : tree_.nodes) r.stats.max_depth_reached = std::max<std::size_t>(r.stats.max_depth_reached, n.depth);
    const auto edges = tree_.edges_of(root);
    if (edges.empty()) throw std::logic_error("search: root was never expanded");
    std::size_t best = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      total += edges[i].visits;
      r.root_q[static_cast<std::size_t>(edges[i].action)] = edges[i].q;
      const auto& b = edges[best];
      const auto& e = edges[i];
      if (e.visits > b.visits || (e.visits == b.visits && (e.q > b.q || (e.q == b.q && e.action < b.action)))) best = i;
    }
    r.action = edges[best].action;
    if (total > 0.0) {
      for (const auto& e : edges) r.visit_dist[static_cast<std::size_t>(e.action)] = e.visits / total;
    } else {
      r.visit_dist[static_cast<std::size_t>(r.action)] = 1.0;
    }
    return r;
  }

  const Env& env_;
  SearchConfig cfg_;
  Tree<State> tree_;
  std::vector<int> actions_;
  std::vector<double> priors_;
};

template <class Env>
SearchResult search(const Env& env, const typename Env::State& root, const SearchConfig& cfg) {
  Search<Env> s(env, cfg);
  return s.run(root);
}

// Actions the backup controller would not override: {1.0} below the band, {0.0} above, all otherwise.
std::vector<int> allowed_actions(double T_r, double T_set, const BackupBand& band);

}  // namespace pinnmcts::mcts
