#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace pinnmcts {

constexpr double kPi = 3.14159265358979323846;

// Discrete action set used by the planner.
constexpr std::size_t kNumActions = 5;
constexpr std::array<double, kNumActions> kActionValues{0.0, 0.25, 0.5, 0.75, 1.0};

struct TimeGrid {
  double start_hour = 0.0;
  double step_h = 0.5;
  std::size_t n_steps = 48;

  TimeGrid() = default;
  TimeGrid(double start, double step, std::size_t n);

  // Time of day in [0, 24) for step index t.
  double hour_of_day(std::size_t t) const;
  std::size_t steps_per_day() const;
};

struct Action {
  double u = 0.0;
};

struct ObservableState {
  double tau = 0.0;          // hour of day
  double T_r = 20.0;         // room temperature (degC)
  double u_phys_prev = 0.0;  // electrical power over the previous step (W)
  double T_a = 5.0;          // outdoor temperature (degC)
  double lambda = 0.0;       // price (EUR/kWh)
  double T_set = 20.0;       // setpoint (degC)
};

// Linear scaling range. Used for network inputs and for clipping synthetic data.
struct Range {
  double lo;
  double hi;

  double clamp(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
  // Maps [lo, hi] onto [-1, 1].
  double to_symmetric(double x) const { return 2.0 * (x - lo) / (hi - lo) - 1.0; }
  double from_symmetric(double y) const { return lo + 0.5 * (y + 1.0) * (hi - lo); }
  double half_width() const { return 0.5 * (hi - lo); }
};

namespace ranges {
constexpr Range kRoomTemp{15.0, 25.0};
constexpr Range kPower{0.0, 4000.0};
constexpr Range kOutdoorTemp{-10.0, 20.0};
constexpr Range kPrice{-0.4, 0.4};
constexpr Range kSetpoint{15.0, 25.0};
}  // namespace ranges

struct ComfortWeights {
  double c1 = 0.5;  // per degC below setpoint per step
  double c2 = 0.1;  // per degC above setpoint per step

  void validate() const;
};

struct RewardNormalizer {
  double rho_min = -1.0;
  double rho_max = 0.0;

  void validate() const;
};

// Raw step reward: energy cost plus asymmetric comfort penalty.
double reward(double u_phys_w, double price, double step_h, double T_set, double T_r_next,
              const ComfortWeights& w);

// Min-max normalisation to [0, 1] with clipping outside the bounds.
double normalize_reward(double rho, const RewardNormalizer& norm);

RewardNormalizer reward_bounds(double max_power_seen_w, double max_abs_price_seen, double step_h,
                               const ComfortWeights& w);

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }

// Energy in kWh for a power held over step_h hours.
inline double energy_kwh(double power_w, double step_h) { return power_w * step_h / 1000.0; }

}  // namespace pinnmcts
