#pragma once

#include <string_view>

#include "pinnmcts/thermal_env.hpp"

namespace pinnmcts::baselines {

// Full power whenever the room is strictly below the setpoint.
double bang_bang(double T_r, double T_set);

// Five-level rule; thresholds on the deficit at 0, 0.05, 0.15 and 0.25 degC.
double discrete_rule(double T_r, double T_set);

// u = min(2 (T_set - T_r)^+, 1)
double continuous_rule(double T_r, double T_set);

// Wraps a rule by name ("bangbang" | "discrete" | "continuous") as an episode controller.
Controller make_controller(std::string_view name);

}  // namespace pinnmcts::baselines
