#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pinnmcts/core.hpp"

namespace pinnmcts {

// Aligned per-step exogenous series on a TimeGrid.
struct ScenarioTraces {
  TimeGrid grid;
  std::vector<double> lambda;        // EUR/kWh
  std::vector<double> T_a_true;      // degC, read by the environment only
  std::vector<double> T_a_forecast;  // degC, read by the planner only
  std::vector<double> T_set;         // degC
  std::vector<double> G_solar;       // W/m2
  std::vector<double> I_g;           // W, internal gains on top of EnvParams::Q_int_base

  std::size_t size() const { return grid.n_steps; }
  // Throws if any series has the wrong length or a non-finite value.
  void validate() const;
};

struct NoiseSpec {
  double sigma = 0.15;  // degC per step
  std::uint64_t seed = 0;
};

std::vector<double> square_wave_price(const TimeGrid& grid, double low, double high, double period_h,
                                      double phase_h);

// Daily sinusoid with its minimum at coldest_hour plus white noise, clipped to the outdoor range.
std::vector<double> synth_weather(const TimeGrid& grid, double mean, double amplitude, double coldest_hour,
                                  std::uint64_t seed, double noise_std = 0.3);

// Forecast with a random-walk error: E[0] = 0, E[t] = E[t-1] + s_t |eta_t| sigma.
std::vector<double> cumulative_noise(const std::vector<double>& T_a_true, const NoiseSpec& spec);

// Same error model restarted every block_len steps (a forecast issued once per block).
std::vector<double> cumulative_noise_blocks(const std::vector<double>& T_a_true, const NoiseSpec& spec,
                                            std::size_t block_len);

std::vector<double> setpoint_schedule(const TimeGrid& grid, double day_temp, double night_temp,
                                      double day_start_h, double day_end_h);

// Half-sine between sunrise and sunset, zero at night.
std::vector<double> solar_profile(const TimeGrid& grid, double peak_w_m2, double sunrise_h, double sunset_h);

// Constant level plus a rectangular evening bump.
std::vector<double> internal_gain_profile(const TimeGrid& grid, double base_w, double bump_w, double bump_start_h,
                                          double bump_end_h);

struct CsvColumnMap {
  std::string timestamp = "timestamp";
  std::string value = "value";
};

// Loads a (timestamp, value) CSV onto the grid. Rows are sorted by timestamp; the source spacing
// must be constant and an integer multiple of the grid step (values are repeated to fill).
std::vector<double> load_csv_trace(const std::filesystem::path& path, const CsvColumnMap& columns,
                                   const TimeGrid& grid);

// Parses "YYYY-MM-DD[T| ]HH:MM[:SS][Z]" into minutes since 1970-01-01.
std::int64_t parse_timestamp_minutes(const std::string& text);

void write_traces_csv(const ScenarioTraces& traces, const std::filesystem::path& path);

}  // namespace pinnmcts
