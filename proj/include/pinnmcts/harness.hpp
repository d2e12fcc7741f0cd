#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinnmcts/core.hpp"
#include "pinnmcts/mcts.hpp"
#include "pinnmcts/physnet.hpp"
#include "pinnmcts/planner.hpp"
#include "pinnmcts/scenario.hpp"
#include "pinnmcts/thermal_env.hpp"

namespace pinnmcts::harness {

struct CsvSource {
  std::string path;  // empty = synthetic
  CsvColumnMap columns;
};

struct ScenarioConfig {
  double start_hour = 0.0;
  double step_h = 0.5;

  double price_low = 0.05;
  double price_high = 0.25;
  double price_period_h = 12.0;
  double price_phase_h = 3.0;
  CsvSource price_csv;

  double weather_mean = 4.0;
  double weather_amplitude = 4.0;
  double weather_coldest_hour = 5.0;
  double weather_noise_std = 0.3;
  double weather_day_shift_std = 2.0;  // per-day offset random walk, degC
  CsvSource weather_csv;

  double setpoint_day = 21.0;
  double setpoint_night = 18.0;
  double setpoint_day_start_h = 7.0;
  double setpoint_day_end_h = 22.0;

  double solar_peak = 250.0;
  double solar_sunrise_h = 8.0;
  double solar_sunset_h = 17.0;

  double internal_bump_w = 300.0;
  double internal_bump_start_h = 18.0;
  double internal_bump_end_h = 22.0;

  double forecast_sigma = 0.15;
  std::size_t forecast_block_steps = 48;

  double initial_T_r = 19.0;
  double initial_T_m = 19.0;
  double initial_T_e = 12.0;
};

struct ForecasterSettings {
  std::vector<physnet::Mode> modes{physnet::Mode::physnet, physnet::Mode::blackbox};
  std::size_t window = 24;
  std::vector<std::size_t> train_days{2, 5, 24};
  std::vector<double> horizons_h{3.0, 6.0, 12.0};
  std::size_t test_days = 6;
  std::string data_controller = "continuous";
  double mass_time_constant_h = 80.0;
  double physics_weight = 1.0;
  std::size_t epochs = 100000;
  std::size_t max_updates = 1500;
  std::size_t retrain_updates = 200;
  std::size_t batch_size = 32;
  double lr = 1e-3;
};

struct SearchSettings {
  std::vector<std::size_t> budgets{50, 100, 250, 500, 1000};
  std::vector<std::size_t> blackbox_budgets{250, 500, 1000};
  double horizon_h = 6.0;
  double alpha_vanilla = 1.0;
  double alpha_alphazero = 3.5;
  double gamma = 0.97;
  std::size_t prior_budget = 1000;
  std::size_t prior_seed_days = 2;  // warmup days searched to seed the first prior
  std::size_t prior_epochs = 60;
  double prior_lr = 1e-3;
};

struct ProtocolSettings {
  std::size_t warmup_days = 10;
  std::size_t test_days = 11;
  bool retrain_daily = true;
  std::size_t max_train_days = 0;  // 0 = keep every day
  std::string warmup_controller = "discrete";
  std::string baseline_controller = "bangbang";
};

struct InspectSettings {
  std::size_t day = 0;   // test day
  std::size_t step = 14;  // step within that day
  std::size_t budget = 200;
  std::size_t max_nodes = 0;
  std::string mode = "physnet";
  std::string checkpoint;  // optional model file; trained from warmup otherwise
};

struct ExperimentConfig {
  EnvParams env;
  BackupBand band;
  ComfortWeights weights;
  ScenarioConfig scenario;
  ForecasterSettings forecaster;
  SearchSettings search;
  ProtocolSettings protocol;
  InspectSettings inspect;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "results";

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

// FNV-1a over the canonical JSON form.
std::uint64_t config_hash(const ExperimentConfig& c);
std::string hex64(std::uint64_t v);

std::size_t steps_per_day(const ScenarioConfig& s);

// Traces for `days` days; every random stream is derived from `seed`.
ScenarioTraces build_scenario(const ScenarioConfig& s, std::size_t days, std::uint64_t seed);
GroundTruthState initial_state(const ScenarioConfig& s);

struct MetricsRow {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string condition;
  std::string mode;    // forecaster mode or controller name
  std::string search;  // vanilla / alphazero / empty
  std::size_t budget = 0;
  std::size_t train_days = 0;
  double horizon_h = 0.0;
  double mae_temp = std::numeric_limits<double>::quiet_NaN();
  double mae_energy = std::numeric_limits<double>::quiet_NaN();
  double daily_reward = std::numeric_limits<double>::quiet_NaN();
  double cost_per_kwh = std::numeric_limits<double>::quiet_NaN();
  double mean_abs_temp_dev = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct SummaryRow {
  std::string experiment;
  std::string condition;
  std::string metric;
  std::size_t n = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct Table {
  std::string name;
  std::vector<MetricsRow> rows;
  std::vector<SummaryRow> summary;
};

// Linear-interpolated quantile of the finite entries; NaN when there are none.
double quantile(std::vector<double> v, double q);
std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows,
                                  const std::vector<std::string>& metrics);

struct DayMetrics {
  double reward = 0.0;  // sum of normalised step rewards
  double cost = 0.0;    // EUR
  double energy = 0.0;  // kWh
  double abs_dev = 0.0; // sum |T_r - T_set|
  std::size_t steps = 0;
};

DayMetrics day_metrics(std::span<const StepRecord> steps, const RewardNormalizer& norm, double step_h);

using Logger = std::function<void(const std::string&)>;

struct RunOptions {
  Logger log;
  bool keep_logs = false;  // store closed-loop logs in RunOutput::logs
};

struct ConditionLog {
  std::string condition;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::vector<double> daily_rewards;
  BackupBand band;
};

struct RunOutput {
  std::vector<Table> tables;
  std::vector<ConditionLog> logs;
};

RunOutput run_forecast_eval(const ExperimentConfig& cfg, const RunOptions& opts = {});
RunOutput run_control_eval(const ExperimentConfig& cfg, const RunOptions& opts = {});
RunOutput run_alphazero_compare(const ExperimentConfig& cfg, const RunOptions& opts = {});

// Writes one CSV per table (plus <name>_summary.csv when a summary exists) and manifest.json.
// Returns the written paths.
std::vector<std::filesystem::path> emit_results(const std::vector<Table>& tables, const std::filesystem::path& outdir,
                                                const ExperimentConfig& cfg, const std::string& experiment);

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);
void write_steps_csv(std::span<const StepRecord> steps, const std::filesystem::path& path);

// Shared pieces of the closed-loop protocol, exposed for the CLI and tests.
struct WarmupData {
  ScenarioTraces traces;
  std::vector<StepRecord> log;  // warmup days
  GroundTruthState state;       // state at the start of the test period
  RewardNormalizer norm;
};

WarmupData run_warmup(const ExperimentConfig& cfg, std::uint64_t seed);

physnet::ForecasterConfig forecaster_config(const ExperimentConfig& cfg, physnet::Mode mode);
std::size_t planning_depth(const ExperimentConfig& cfg);

// Forecast windows for training from a closed-loop log, trimmed to max_train_days when set.
std::vector<physnet::ForecastSample> training_samples(const ExperimentConfig& cfg, std::span<const StepRecord> log,
                                                      std::size_t horizon_steps);

physnet::Forecaster train_initial(const ExperimentConfig& cfg, physnet::Mode mode, std::span<const StepRecord> log,
                                  std::uint64_t seed);

mcts::SearchConfig search_config(const ExperimentConfig& cfg, mcts::SearchMode mode, std::size_t budget);

}  // namespace pinnmcts::harness
