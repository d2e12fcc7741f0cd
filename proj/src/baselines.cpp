#include "pinnmcts/baselines.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace pinnmcts::baselines {

double bang_bang(double T_r, double T_set) { return T_r < T_set ? 1.0 : 0.0; }

double discrete_rule(double T_r, double T_set) {
  if (T_r > T_set) return 0.0;
  if (T_r > T_set - 0.05) return 0.25;
  if (T_r > T_set - 0.15) return 0.5;
  if (T_r > T_set - 0.25) return 0.75;
  return 1.0;
}

double continuous_rule(double T_r, double T_set) { return std::min(2.0 * positive_part(T_set - T_r), 1.0); }

Controller make_controller(std::string_view name) {
  double (*rule)(double, double) = nullptr;
  if (name == "bangbang") {
    rule = &bang_bang;
  } else if (name == "discrete") {
    rule = &discrete_rule;
  } else if (name == "continuous") {
    rule = &continuous_rule;
  } else {
    throw std::invalid_argument("unknown baseline controller '" + std::string(name) + "'");
  }
  return [rule](const ObservableState& obs, std::span<const StepRecord>) { return Action{rule(obs.T_r, obs.T_set)}; };
}

}  // namespace pinnmcts::baselines
