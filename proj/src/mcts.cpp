#include "pinnmcts/mcts.hpp"

namespace pinnmcts::mcts {

std::string to_string(SearchMode m) { return m == SearchMode::vanilla ? "vanilla" : "alphazero"; }

SearchMode search_mode_from_string(const std::string& s) {
  if (s == "vanilla") return SearchMode::vanilla;
  if (s == "alphazero") return SearchMode::alphazero;
  throw std::invalid_argument("unknown search mode '" + s + "'");
}

void SearchConfig::validate() const {
  if (n_simulations < 1) throw std::invalid_argument("search: n_simulations must be >= 1");
  if (max_depth < 1) throw std::invalid_argument("search: max_depth must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("search: alpha must be > 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("search: gamma must lie in [0, 1]");
  band.validate();
}

std::vector<int> allowed_actions(double T_r, double T_set, const BackupBand& band) {
  if (T_r < T_set - band.delta_minus) return {static_cast<int>(kNumActions) - 1};
  if (T_r > T_set + band.delta_plus) return {0};
  std::vector<int> all(kNumActions);
  for (std::size_t i = 0; i < kNumActions; ++i) all[i] = static_cast<int>(i);
  return all;
}

}  // namespace pinnmcts::mcts
