#include "pinnmcts/core.hpp"

#include <cmath>
#include <string>

namespace pinnmcts {

TimeGrid::TimeGrid(double start, double step, std::size_t n) : start_hour(start), step_h(step), n_steps(n) {
  if (!(step > 0.0)) throw std::invalid_argument("TimeGrid: step must be positive");
  if (n < 1) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
  if (start < 0.0 || start >= 24.0) throw std::invalid_argument("TimeGrid: start_hour must be in [0, 24)");
}

double TimeGrid::hour_of_day(std::size_t t) const {
  double h = std::fmod(start_hour + static_cast<double>(t) * step_h, 24.0);
  return h < 0.0 ? h + 24.0 : h;
}

std::size_t TimeGrid::steps_per_day() const {
  return static_cast<std::size_t>(std::llround(24.0 / step_h));
}

void ComfortWeights::validate() const {
  if (!(c2 > 0.0) || !(c1 > c2)) {
    throw std::invalid_argument("ComfortWeights: require c1 > c2 > 0 (got c1=" + std::to_string(c1) +
                                ", c2=" + std::to_string(c2) + ")");
  }
}

void RewardNormalizer::validate() const {
  if (rho_max != 0.0) throw std::invalid_argument("RewardNormalizer: rho_max must be 0");
  if (!(rho_min < rho_max)) throw std::invalid_argument("RewardNormalizer: rho_min must be below rho_max");
}

double reward(double u_phys_w, double price, double step_h, double T_set, double T_r_next,
              const ComfortWeights& w) {
  const double cost = energy_kwh(u_phys_w, step_h) * price;
  const double too_cold = positive_part(T_set - T_r_next) * w.c1;
  const double too_warm = positive_part(T_r_next - T_set) * w.c2;
  return -cost - too_cold - too_warm;
}

double normalize_reward(double rho, const RewardNormalizer& norm) {
  if (norm.rho_max == norm.rho_min) throw std::invalid_argument("normalize_reward: degenerate normalizer");
  const double x = (rho - norm.rho_min) / (norm.rho_max - norm.rho_min);
  if (x < 0.0) return 0.0;
  if (x > 1.0) return 1.0;
  return x;
}

RewardNormalizer reward_bounds(double max_power_seen_w, double max_abs_price_seen, double step_h,
                               const ComfortWeights& w) {
  const double worst_cost = energy_kwh(std::abs(max_power_seen_w), step_h) * std::abs(max_abs_price_seen);
  const double worst_comfort = 2.0 * w.c1;
  return RewardNormalizer{-(worst_cost + worst_comfort), 0.0};
}

}  // namespace pinnmcts
