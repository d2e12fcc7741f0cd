#include "pinnmcts/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pinnmcts/baselines.hpp"
#include "pinnmcts/csv.hpp"

#ifndef PINNMCTS_VERSION
#define PINNMCTS_VERSION "dev"
#endif

namespace pinnmcts::harness {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream tags for per-seed random sources.
constexpr std::uint64_t kTagWeather = 0x57454154ULL;
constexpr std::uint64_t kTagDayShift = 0x44415953ULL;
constexpr std::uint64_t kTagForecast = 0x464f5243ULL;
constexpr std::uint64_t kTagModel = 0x4d4f444cULL;
constexpr std::uint64_t kTagTrain = 0x5452414eULL;
constexpr std::uint64_t kTagPrior = 0x5052494fULL;

void log_line(const RunOptions& o, const std::string& s) {
  if (o.log) o.log(s);
}

template <class T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

CsvSource csv_source_from_json(const nlohmann::json& j) {
  CsvSource s;
  get_if(j, "path", s.path);
  get_if(j, "timestamp_column", s.columns.timestamp);
  get_if(j, "value_column", s.columns.value);
  return s;
}

nlohmann::json csv_source_to_json(const CsvSource& s) {
  return {{"path", s.path}, {"timestamp_column", s.columns.timestamp}, {"value_column", s.columns.value}};
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& section) {
  if (!j.is_object()) throw std::invalid_argument("config: section '" + section + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw std::invalid_argument("config: unknown key '" + k + "' in section '" + section + "'");
  }
}

std::string condition_name(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string s;
  for (const auto& [k, v] : kv) {
    if (!s.empty()) s += ';';
    s += k + "=" + v;
  }
  return s;
}

std::string fmt_num(double x) { return std::isfinite(x) ? csv::fmt(x) : std::string{}; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += "\"\"";
    else if (c == '\n' || c == '\r') q += ' ';
    else q += c;
  }
  return q + "\"";
}

}  // namespace

// ---------------------------------------------------------------- configuration

void ExperimentConfig::validate() const {
  env.validate(scenario.step_h);
  band.validate();
  weights.validate();
  if (seeds.empty()) throw std::invalid_argument("config: seeds must not be empty");
  if (!(scenario.step_h > 0.0)) throw std::invalid_argument("config: scenario.step_h must be > 0");
  const double spd = 24.0 / scenario.step_h;
  if (std::abs(spd - std::round(spd)) > 1e-9) throw std::invalid_argument("config: step_h must divide 24 h");
  if (forecaster.window < 1) throw std::invalid_argument("config: forecaster.window must be >= 1");
  if (forecaster.modes.empty()) throw std::invalid_argument("config: forecaster.modes must not be empty");
  if (forecaster.train_days.empty() || forecaster.horizons_h.empty()) {
    throw std::invalid_argument("config: forecaster.train_days and horizons_h must not be empty");
  }
  for (auto d : forecaster.train_days) {
    if (d < 1) throw std::invalid_argument("config: train_days entries must be >= 1");
  }
  for (double h : forecaster.horizons_h) {
    if (!(h >= scenario.step_h)) throw std::invalid_argument("config: horizons must cover at least one step");
  }
  if (forecaster.test_days < 1) throw std::invalid_argument("config: forecaster.test_days must be >= 1");
  for (auto b : search.budgets) {
    if (b < 1) throw std::invalid_argument("config: n_simulations entries must be >= 1");
  }
  for (auto b : search.blackbox_budgets) {
    if (b < 1) throw std::invalid_argument("config: n_simulations entries must be >= 1");
  }
  if (!(search.horizon_h >= scenario.step_h)) throw std::invalid_argument("config: search.horizon_h too short");
  if (!(search.alpha_vanilla > 0.0) || !(search.alpha_alphazero > 0.0)) {
    throw std::invalid_argument("config: alpha must be > 0");
  }
  if (!(search.gamma >= 0.0 && search.gamma <= 1.0)) throw std::invalid_argument("config: gamma must lie in [0, 1]");
  if (protocol.warmup_days < 1 || protocol.test_days < 1) {
    throw std::invalid_argument("config: warmup_days and test_days must be >= 1");
  }
  if (protocol.warmup_days * static_cast<std::size_t>(std::lround(spd)) < forecaster.window + 1) {
    throw std::invalid_argument("config: warmup shorter than the encoder window");
  }
  baselines::make_controller(protocol.warmup_controller);
  baselines::make_controller(protocol.baseline_controller);
  baselines::make_controller(forecaster.data_controller);
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  reject_unknown(j, {"env", "band", "reward", "scenario", "forecaster", "search", "protocol", "inspect", "seeds",
                     "output_dir"},
                 "root");
  if (j.contains("env")) {
    const auto& e = j.at("env");
    reject_unknown(e, {"C_r", "C_m", "C_e", "R_rm", "R_ra", "R_re", "R_ea", "gamma_solar", "P_el_max", "cop_a",
                       "cop_b", "cop_min", "cop_max", "Q_int_base", "substeps"},
                   "env");
    get_if(e, "C_r", c.env.C_r);
    get_if(e, "C_m", c.env.C_m);
    get_if(e, "C_e", c.env.C_e);
    get_if(e, "R_rm", c.env.R_rm);
    get_if(e, "R_ra", c.env.R_ra);
    get_if(e, "R_re", c.env.R_re);
    get_if(e, "R_ea", c.env.R_ea);
    get_if(e, "gamma_solar", c.env.gamma_solar);
    get_if(e, "P_el_max", c.env.P_el_max);
    get_if(e, "cop_a", c.env.cop_a);
    get_if(e, "cop_b", c.env.cop_b);
    get_if(e, "cop_min", c.env.cop_min);
    get_if(e, "cop_max", c.env.cop_max);
    get_if(e, "Q_int_base", c.env.Q_int_base);
    get_if(e, "substeps", c.env.substeps);
  }
  if (j.contains("band")) {
    reject_unknown(j.at("band"), {"delta_minus", "delta_plus"}, "band");
    get_if(j.at("band"), "delta_minus", c.band.delta_minus);
    get_if(j.at("band"), "delta_plus", c.band.delta_plus);
  }
  if (j.contains("reward")) {
    reject_unknown(j.at("reward"), {"c1", "c2"}, "reward");
    get_if(j.at("reward"), "c1", c.weights.c1);
    get_if(j.at("reward"), "c2", c.weights.c2);
  }
  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    reject_unknown(s, {"start_hour", "step_h", "price", "weather", "setpoint", "solar", "internal_gains",
                       "forecast_noise", "initial_state"},
                   "scenario");
    auto& o = c.scenario;
    get_if(s, "start_hour", o.start_hour);
    get_if(s, "step_h", o.step_h);
    if (s.contains("price")) {
      const auto& p = s.at("price");
      reject_unknown(p, {"low", "high", "period_h", "phase_h", "csv"}, "scenario.price");
      get_if(p, "low", o.price_low);
      get_if(p, "high", o.price_high);
      get_if(p, "period_h", o.price_period_h);
      get_if(p, "phase_h", o.price_phase_h);
      if (p.contains("csv")) o.price_csv = csv_source_from_json(p.at("csv"));
    }
    if (s.contains("weather")) {
      const auto& w = s.at("weather");
      reject_unknown(w, {"mean", "amplitude", "coldest_hour", "noise_std", "day_shift_std", "csv"},
                     "scenario.weather");
      get_if(w, "mean", o.weather_mean);
      get_if(w, "amplitude", o.weather_amplitude);
      get_if(w, "coldest_hour", o.weather_coldest_hour);
      get_if(w, "noise_std", o.weather_noise_std);
      get_if(w, "day_shift_std", o.weather_day_shift_std);
      if (w.contains("csv")) o.weather_csv = csv_source_from_json(w.at("csv"));
    }
    if (s.contains("setpoint")) {
      const auto& t = s.at("setpoint");
      reject_unknown(t, {"day", "night", "day_start_h", "day_end_h"}, "scenario.setpoint");
      get_if(t, "day", o.setpoint_day);
      get_if(t, "night", o.setpoint_night);
      get_if(t, "day_start_h", o.setpoint_day_start_h);
      get_if(t, "day_end_h", o.setpoint_day_end_h);
    }
    if (s.contains("solar")) {
      const auto& t = s.at("solar");
      reject_unknown(t, {"peak", "sunrise_h", "sunset_h"}, "scenario.solar");
      get_if(t, "peak", o.solar_peak);
      get_if(t, "sunrise_h", o.solar_sunrise_h);
      get_if(t, "sunset_h", o.solar_sunset_h);
    }
    if (s.contains("internal_gains")) {
      const auto& t = s.at("internal_gains");
      reject_unknown(t, {"bump_w", "bump_start_h", "bump_end_h"}, "scenario.internal_gains");
      get_if(t, "bump_w", o.internal_bump_w);
      get_if(t, "bump_start_h", o.internal_bump_start_h);
      get_if(t, "bump_end_h", o.internal_bump_end_h);
    }
    if (s.contains("forecast_noise")) {
      const auto& t = s.at("forecast_noise");
      reject_unknown(t, {"sigma", "block_steps"}, "scenario.forecast_noise");
      get_if(t, "sigma", o.forecast_sigma);
      get_if(t, "block_steps", o.forecast_block_steps);
    }
    if (s.contains("initial_state")) {
      const auto& t = s.at("initial_state");
      reject_unknown(t, {"T_r", "T_m", "T_e"}, "scenario.initial_state");
      get_if(t, "T_r", o.initial_T_r);
      get_if(t, "T_m", o.initial_T_m);
      get_if(t, "T_e", o.initial_T_e);
    }
  }
  if (j.contains("forecaster")) {
    const auto& f = j.at("forecaster");
    reject_unknown(f, {"modes", "window", "train_days", "horizons_h", "test_days", "data_controller",
                       "mass_time_constant_h", "physics_weight", "epochs", "max_updates", "retrain_updates",
                       "batch_size", "lr"},
                   "forecaster");
    auto& o = c.forecaster;
    if (f.contains("modes")) {
      o.modes.clear();
      for (const auto& m : f.at("modes")) o.modes.push_back(physnet::mode_from_string(m.get<std::string>()));
    }
    get_if(f, "window", o.window);
    get_if(f, "train_days", o.train_days);
    get_if(f, "horizons_h", o.horizons_h);
    get_if(f, "test_days", o.test_days);
    get_if(f, "data_controller", o.data_controller);
    get_if(f, "mass_time_constant_h", o.mass_time_constant_h);
    get_if(f, "physics_weight", o.physics_weight);
    get_if(f, "epochs", o.epochs);
    get_if(f, "max_updates", o.max_updates);
    get_if(f, "retrain_updates", o.retrain_updates);
    get_if(f, "batch_size", o.batch_size);
    get_if(f, "lr", o.lr);
  }
  if (j.contains("search")) {
    const auto& s = j.at("search");
    reject_unknown(s, {"budgets", "blackbox_budgets", "horizon_h", "alpha_vanilla", "alpha_alphazero", "gamma",
                       "prior_budget", "prior_seed_days", "prior_epochs", "prior_lr"},
                   "search");
    auto& o = c.search;
    get_if(s, "budgets", o.budgets);
    get_if(s, "blackbox_budgets", o.blackbox_budgets);
    get_if(s, "horizon_h", o.horizon_h);
    get_if(s, "alpha_vanilla", o.alpha_vanilla);
    get_if(s, "alpha_alphazero", o.alpha_alphazero);
    get_if(s, "gamma", o.gamma);
    get_if(s, "prior_budget", o.prior_budget);
    get_if(s, "prior_seed_days", o.prior_seed_days);
    get_if(s, "prior_epochs", o.prior_epochs);
    get_if(s, "prior_lr", o.prior_lr);
  }
  if (j.contains("protocol")) {
    const auto& p = j.at("protocol");
    reject_unknown(p, {"warmup_days", "test_days", "retrain_daily", "max_train_days", "warmup_controller",
                       "baseline_controller"},
                   "protocol");
    auto& o = c.protocol;
    get_if(p, "warmup_days", o.warmup_days);
    get_if(p, "test_days", o.test_days);
    get_if(p, "retrain_daily", o.retrain_daily);
    get_if(p, "max_train_days", o.max_train_days);
    get_if(p, "warmup_controller", o.warmup_controller);
    get_if(p, "baseline_controller", o.baseline_controller);
  }
  if (j.contains("inspect")) {
    const auto& p = j.at("inspect");
    reject_unknown(p, {"day", "step", "budget", "max_nodes", "mode", "checkpoint"}, "inspect");
    auto& o = c.inspect;
    get_if(p, "day", o.day);
    get_if(p, "step", o.step);
    get_if(p, "budget", o.budget);
    get_if(p, "max_nodes", o.max_nodes);
    get_if(p, "mode", o.mode);
    get_if(p, "checkpoint", o.checkpoint);
  }
  get_if(j, "seeds", c.seeds);
  get_if(j, "output_dir", c.output_dir);
  c.validate();
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json modes = nlohmann::json::array();
  for (auto m : c.forecaster.modes) modes.push_back(physnet::to_string(m));
  const auto& s = c.scenario;
  return {
      {"env",
       {{"C_r", c.env.C_r}, {"C_m", c.env.C_m}, {"C_e", c.env.C_e}, {"R_rm", c.env.R_rm}, {"R_ra", c.env.R_ra},
        {"R_re", c.env.R_re}, {"R_ea", c.env.R_ea}, {"gamma_solar", c.env.gamma_solar},
        {"P_el_max", c.env.P_el_max}, {"cop_a", c.env.cop_a}, {"cop_b", c.env.cop_b}, {"cop_min", c.env.cop_min},
        {"cop_max", c.env.cop_max}, {"Q_int_base", c.env.Q_int_base}, {"substeps", c.env.substeps}}},
      {"band", {{"delta_minus", c.band.delta_minus}, {"delta_plus", c.band.delta_plus}}},
      {"reward", {{"c1", c.weights.c1}, {"c2", c.weights.c2}}},
      {"scenario",
       {{"start_hour", s.start_hour},
        {"step_h", s.step_h},
        {"price",
         {{"low", s.price_low}, {"high", s.price_high}, {"period_h", s.price_period_h}, {"phase_h", s.price_phase_h},
          {"csv", csv_source_to_json(s.price_csv)}}},
        {"weather",
         {{"mean", s.weather_mean}, {"amplitude", s.weather_amplitude}, {"coldest_hour", s.weather_coldest_hour},
          {"noise_std", s.weather_noise_std}, {"day_shift_std", s.weather_day_shift_std},
          {"csv", csv_source_to_json(s.weather_csv)}}},
        {"setpoint",
         {{"day", s.setpoint_day}, {"night", s.setpoint_night}, {"day_start_h", s.setpoint_day_start_h},
          {"day_end_h", s.setpoint_day_end_h}}},
        {"solar", {{"peak", s.solar_peak}, {"sunrise_h", s.solar_sunrise_h}, {"sunset_h", s.solar_sunset_h}}},
        {"internal_gains",
         {{"bump_w", s.internal_bump_w}, {"bump_start_h", s.internal_bump_start_h},
          {"bump_end_h", s.internal_bump_end_h}}},
        {"forecast_noise", {{"sigma", s.forecast_sigma}, {"block_steps", s.forecast_block_steps}}},
        {"initial_state", {{"T_r", s.initial_T_r}, {"T_m", s.initial_T_m}, {"T_e", s.initial_T_e}}}}},
      {"forecaster",
       {{"modes", modes},
        {"window", c.forecaster.window},
        {"train_days", c.forecaster.train_days},
        {"horizons_h", c.forecaster.horizons_h},
        {"test_days", c.forecaster.test_days},
        {"data_controller", c.forecaster.data_controller},
        {"mass_time_constant_h", c.forecaster.mass_time_constant_h},
        {"physics_weight", c.forecaster.physics_weight},
        {"epochs", c.forecaster.epochs},
        {"max_updates", c.forecaster.max_updates},
        {"retrain_updates", c.forecaster.retrain_updates},
        {"batch_size", c.forecaster.batch_size},
        {"lr", c.forecaster.lr}}},
      {"search",
       {{"budgets", c.search.budgets},
        {"blackbox_budgets", c.search.blackbox_budgets},
        {"horizon_h", c.search.horizon_h},
        {"alpha_vanilla", c.search.alpha_vanilla},
        {"alpha_alphazero", c.search.alpha_alphazero},
        {"gamma", c.search.gamma},
        {"prior_budget", c.search.prior_budget},
        {"prior_seed_days", c.search.prior_seed_days},
        {"prior_epochs", c.search.prior_epochs},
        {"prior_lr", c.search.prior_lr}}},
      {"protocol",
       {{"warmup_days", c.protocol.warmup_days},
        {"test_days", c.protocol.test_days},
        {"retrain_daily", c.protocol.retrain_daily},
        {"max_train_days", c.protocol.max_train_days},
        {"warmup_controller", c.protocol.warmup_controller},
        {"baseline_controller", c.protocol.baseline_controller}}},
      {"inspect",
       {{"day", c.inspect.day},
        {"step", c.inspect.step},
        {"budget", c.inspect.budget},
        {"max_nodes", c.inspect.max_nodes},
        {"mode", c.inspect.mode},
        {"checkpoint", c.inspect.checkpoint}}},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  const std::string text = config_to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

// ---------------------------------------------------------------- scenario

std::size_t steps_per_day(const ScenarioConfig& s) { return static_cast<std::size_t>(std::lround(24.0 / s.step_h)); }

ScenarioTraces build_scenario(const ScenarioConfig& s, std::size_t days, std::uint64_t seed) {
  ScenarioTraces tr;
  tr.grid = TimeGrid(s.start_hour, s.step_h, days * steps_per_day(s));
  const TimeGrid& g = tr.grid;

  tr.lambda = s.price_csv.path.empty() ? square_wave_price(g, s.price_low, s.price_high, s.price_period_h, s.price_phase_h)
                                       : load_csv_trace(s.price_csv.path, s.price_csv.columns, g);
  if (s.weather_csv.path.empty()) {
    tr.T_a_true = synth_weather(g, s.weather_mean, s.weather_amplitude, s.weather_coldest_hour, mix(seed, kTagWeather),
                                s.weather_noise_std);
    if (s.weather_day_shift_std > 0.0) {
      // Day-to-day weather variation: AR(1) offset per day.
      std::mt19937_64 rng(mix(seed, kTagDayShift));
      std::normal_distribution<double> n(0.0, s.weather_day_shift_std);
      const std::size_t spd = steps_per_day(s);
      double offset = 0.0;
      for (std::size_t d = 0; d < days; ++d) {
        offset = 0.6 * offset + n(rng);
        for (std::size_t k = 0; k < spd; ++k) {
          double& v = tr.T_a_true[d * spd + k];
          v = ranges::kOutdoorTemp.clamp(v + offset);
        }
      }
    }
  } else {
    tr.T_a_true = load_csv_trace(s.weather_csv.path, s.weather_csv.columns, g);
  }
  tr.T_a_forecast = cumulative_noise_blocks(tr.T_a_true, NoiseSpec{s.forecast_sigma, mix(seed, kTagForecast)},
                                            s.forecast_block_steps);
  tr.T_set = setpoint_schedule(g, s.setpoint_day, s.setpoint_night, s.setpoint_day_start_h, s.setpoint_day_end_h);
  tr.G_solar = solar_profile(g, s.solar_peak, s.solar_sunrise_h, s.solar_sunset_h);
  tr.I_g = internal_gain_profile(g, 0.0, s.internal_bump_w, s.internal_bump_start_h, s.internal_bump_end_h);
  tr.validate();
  return tr;
}

GroundTruthState initial_state(const ScenarioConfig& s) {
  GroundTruthState st;
  st.T_r = s.initial_T_r;
  st.T_m = s.initial_T_m;
  st.T_e = s.initial_T_e;
  return st;
}

// ---------------------------------------------------------------- metrics

double quantile(std::vector<double> v, double q) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace {

double metric_value(const MetricsRow& r, const std::string& m) {
  if (m == "mae_temp") return r.mae_temp;
  if (m == "mae_energy") return r.mae_energy;
  if (m == "daily_reward") return r.daily_reward;
  if (m == "cost_per_kwh") return r.cost_per_kwh;
  if (m == "mean_abs_temp_dev") return r.mean_abs_temp_dev;
  throw std::invalid_argument("unknown metric " + m);
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows, const std::vector<std::string>& metrics) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const MetricsRow*>> groups;
  for (const auto& r : rows) {
    if (!groups.count(r.condition)) order.push_back(r.condition);
    groups[r.condition].push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const auto& cond : order) {
    for (const auto& m : metrics) {
      std::vector<double> v;
      for (const auto* r : groups[cond]) v.push_back(metric_value(*r, m));
      SummaryRow s;
      s.experiment = groups[cond].front()->experiment;
      s.condition = cond;
      s.metric = m;
      s.n = static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return std::isfinite(x); }));
      s.median = quantile(v, 0.5);
      s.q25 = quantile(v, 0.25);
      s.q75 = quantile(v, 0.75);
      out.push_back(s);
    }
  }
  return out;
}

DayMetrics day_metrics(std::span<const StepRecord> steps, const RewardNormalizer& norm, double step_h) {
  DayMetrics m;
  for (const auto& r : steps) {
    m.reward += normalize_reward(r.reward, norm);
    const double e = energy_kwh(r.u_phys, step_h);
    m.energy += e;
    m.cost += e * r.obs.lambda;
    m.abs_dev += std::abs(r.T_r_next - r.obs.T_set);
    ++m.steps;
  }
  return m;
}

// ---------------------------------------------------------------- output

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "experiment,seed,condition,mode,search,budget,train_days,horizon_h,mae_temp,mae_energy,daily_reward,"
         "cost_per_kwh,mean_abs_temp_dev,error\n";
  for (const auto& r : rows) {
    out << csv_field(r.experiment) << ',' << r.seed << ',' << csv_field(r.condition) << ',' << csv_field(r.mode) << ','
        << csv_field(r.search) << ',' << r.budget << ',' << r.train_days << ',' << fmt_num(r.horizon_h) << ','
        << fmt_num(r.mae_temp) << ',' << fmt_num(r.mae_energy) << ',' << fmt_num(r.daily_reward) << ','
        << fmt_num(r.cost_per_kwh) << ',' << fmt_num(r.mean_abs_temp_dev) << ',' << csv_field(r.error) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "experiment,condition,metric,n,median,q25,q75\n";
  for (const auto& r : rows) {
    out << csv_field(r.experiment) << ',' << csv_field(r.condition) << ',' << r.metric << ',' << r.n << ','
        << fmt_num(r.median) << ',' << fmt_num(r.q25) << ',' << fmt_num(r.q75) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_steps_csv(std::span<const StepRecord> steps, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,tau,T_r,u_phys_prev,T_a,lambda,T_set,u_requested,u_applied,u_phys,T_r_next,reward\n";
  for (const auto& r : steps) {
    out << r.t << ',' << csv::fmt(r.obs.tau) << ',' << csv::fmt(r.obs.T_r) << ',' << csv::fmt(r.obs.u_phys_prev) << ','
        << csv::fmt(r.obs.T_a) << ',' << csv::fmt(r.obs.lambda) << ',' << csv::fmt(r.obs.T_set) << ','
        << csv::fmt(r.u_requested) << ',' << csv::fmt(r.u_applied) << ',' << csv::fmt(r.u_phys) << ','
        << csv::fmt(r.T_r_next) << ',' << csv::fmt(r.reward) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::filesystem::path> emit_results(const std::vector<Table>& tables, const std::filesystem::path& outdir,
                                                const ExperimentConfig& cfg, const std::string& experiment) {
  std::filesystem::create_directories(outdir);
  std::vector<std::filesystem::path> written;
  nlohmann::json files = nlohmann::json::array();
  for (const auto& t : tables) {
    const auto p = outdir / (t.name + ".csv");
    write_metrics_csv(t.rows, p);
    written.push_back(p);
    files.push_back(p.filename().string());
    if (!t.summary.empty()) {
      const auto ps = outdir / (t.name + "_summary.csv");
      write_summary_csv(t.summary, ps);
      written.push_back(ps);
      files.push_back(ps.filename().string());
    }
  }
  nlohmann::json manifest = {
      {"experiment", experiment},
      {"config_hash", hex64(config_hash(cfg))},
      {"seeds", cfg.seeds},
      {"versions",
       {{"pinnmcts", PINNMCTS_VERSION},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"cxx_standard", static_cast<long>(__cplusplus)},
#if defined(__clang__)
        {"compiler", std::string("clang ") + __clang_version__},
#elif defined(__GNUC__)
        {"compiler", std::string("gcc ") + __VERSION__},
#else
        {"compiler", "unknown"},
#endif
        {"checkpoint_format", "pinnmcts.physnet/1"}}},
      {"files", files},
      {"config", config_to_json(cfg)}};
  const auto mp = outdir / "manifest.json";
  std::ofstream out(mp, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + mp.string());
  out << manifest.dump(2) << '\n';
  written.push_back(mp);
  return written;
}

// ---------------------------------------------------------------- protocol pieces

physnet::ForecasterConfig forecaster_config(const ExperimentConfig& cfg, physnet::Mode mode) {
  physnet::ForecasterConfig f;
  f.mode = mode;
  f.window = cfg.forecaster.window;
  f.step_h = cfg.scenario.step_h;
  f.mass_time_constant_h = cfg.forecaster.mass_time_constant_h;
  f.physics_weight = cfg.forecaster.physics_weight;
  return f;
}

std::size_t planning_depth(const ExperimentConfig& cfg) {
  return static_cast<std::size_t>(std::lround(cfg.search.horizon_h / cfg.scenario.step_h));
}

std::vector<physnet::ForecastSample> training_samples(const ExperimentConfig& cfg, std::span<const StepRecord> log,
                                                      std::size_t horizon_steps) {
  if (cfg.protocol.max_train_days > 0) {
    const std::size_t keep = cfg.protocol.max_train_days * steps_per_day(cfg.scenario);
    if (log.size() > keep) log = log.subspan(log.size() - keep);
  }
  return physnet::make_samples(log, cfg.forecaster.window, horizon_steps);
}

physnet::Forecaster train_initial(const ExperimentConfig& cfg, physnet::Mode mode, std::span<const StepRecord> log,
                                  std::uint64_t seed) {
  const auto samples = training_samples(cfg, log, planning_depth(cfg));
  // Same initial weights for both modes at a given seed.
  physnet::Forecaster model(forecaster_config(cfg, mode), mix(seed, kTagModel));
  physnet::TrainConfig tc;
  tc.epochs = cfg.forecaster.epochs;
  tc.batch_size = cfg.forecaster.batch_size;
  tc.max_updates = cfg.forecaster.max_updates;
  tc.lr = cfg.forecaster.lr;
  tc.seed = mix(seed, kTagTrain);
  physnet::train(model, samples, tc);
  return model;
}

mcts::SearchConfig search_config(const ExperimentConfig& cfg, mcts::SearchMode mode, std::size_t budget) {
  mcts::SearchConfig s;
  s.n_simulations = budget;
  s.max_depth = planning_depth(cfg);
  s.alpha = mode == mcts::SearchMode::vanilla ? cfg.search.alpha_vanilla : cfg.search.alpha_alphazero;
  s.gamma = cfg.search.gamma;
  s.band = cfg.band;
  s.mode = mode;
  return s;
}

WarmupData run_warmup(const ExperimentConfig& cfg, std::uint64_t seed) {
  WarmupData w;
  const std::size_t spd = steps_per_day(cfg.scenario);
  w.traces = build_scenario(cfg.scenario, cfg.protocol.warmup_days + cfg.protocol.test_days, seed);
  EpisodeOptions eo{cfg.band, cfg.weights};
  const EpisodeResult ep = run_episode(initial_state(cfg.scenario),
                                       baselines::make_controller(cfg.protocol.warmup_controller), w.traces, cfg.env,
                                       cfg.protocol.warmup_days * spd, eo);
  if (ep.error) throw std::runtime_error("warmup failed: " + *ep.error);
  w.log = ep.steps;
  w.state = ep.final_state;
  double max_power = 0.0, max_price = 0.0;
  for (const auto& r : w.log) {
    max_power = std::max(max_power, r.u_phys);
    max_price = std::max(max_price, std::abs(r.obs.lambda));
  }
  w.norm = reward_bounds(max_power, max_price, cfg.scenario.step_h, cfg.weights);
  return w;
}

namespace {

struct PriorState {
  nn::Network net;
  std::vector<planner::PriorSample> samples;
};

struct LoopResult {
  std::vector<StepRecord> steps;
  std::vector<DayMetrics> days;
};

planner::PlannerContext context(const ExperimentConfig& cfg, const physnet::Forecaster& model,
                                const WarmupData& warm) {
  return planner::PlannerContext{&model, &warm.traces, warm.norm, cfg.weights, cfg.band};
}

void refresh_prior(const ExperimentConfig& cfg, PriorState& prior, std::uint64_t seed, std::size_t day) {
  planner::PriorTrainConfig pc;
  pc.epochs = cfg.search.prior_epochs;
  pc.lr = cfg.search.prior_lr;
  pc.seed = mix(mix(seed, kTagPrior), day);
  planner::train_prior(prior.net, prior.samples, pc);
}

// Closed loop over the test days. `prior` is only used by AlphaZero search.
LoopResult closed_loop(const ExperimentConfig& cfg, const WarmupData& warm, physnet::Forecaster model,
                       const mcts::SearchConfig& scfg, std::uint64_t seed, PriorState* prior,
                       planner::PriorKind prior_kind, const RunOptions& opts, const std::string& label) {
  const std::size_t spd = steps_per_day(cfg.scenario);
  const std::size_t depth = scfg.max_depth;
  const std::size_t d = cfg.forecaster.window;
  const double step_h = cfg.scenario.step_h;
  std::vector<StepRecord> log = warm.log;
  GroundTruthState state = warm.state;
  LoopResult res;

  Controller ctrl = [&](const ObservableState& obs, std::span<const StepRecord> history) {
    const std::size_t t = history.empty() ? 0 : history.back().t + 1;
    planner::ThermalSimEnv env(model, planner::forecast_slice(warm.traces, t, depth + 1), warm.norm, cfg.weights,
                               cfg.band, step_h);
    if (scfg.mode == mcts::SearchMode::alphazero) {
      env.set_prior(prior_kind, prior_kind == planner::PriorKind::network ? &prior->net : nullptr);
    }
    const planner::SimState root = env.make_root(planner::history_window(history, obs, d), obs);
    const mcts::SearchResult r = mcts::search(env, root, scfg);
    return Action{kActionValues[static_cast<std::size_t>(r.action)]};
  };

  for (std::size_t day = 0; day < cfg.protocol.test_days; ++day) {
    const EpisodeResult ep = run_episode(state, ctrl, warm.traces, cfg.env, spd, EpisodeOptions{cfg.band, cfg.weights},
                                         log);
    if (ep.error) throw std::runtime_error(*ep.error);
    const std::size_t day_begin = log.size();
    log.insert(log.end(), ep.steps.begin(), ep.steps.end());
    res.steps.insert(res.steps.end(), ep.steps.begin(), ep.steps.end());
    res.days.push_back(day_metrics(ep.steps, warm.norm, step_h));
    state = ep.final_state;
    log_line(opts, label + " day " + std::to_string(day + 1) + " reward " + csv::fmt(res.days.back().reward));

    if (day + 1 == cfg.protocol.test_days) break;
    if (cfg.protocol.retrain_daily) {
      physnet::TrainConfig tc;
      tc.epochs = cfg.forecaster.epochs;
      tc.batch_size = cfg.forecaster.batch_size;
      tc.max_updates = cfg.forecaster.retrain_updates;
      tc.lr = cfg.forecaster.lr;
      tc.seed = mix(mix(seed, kTagTrain), day + 1);
      physnet::train(model, training_samples(cfg, log, depth), tc);
    }
    if (prior != nullptr && prior_kind == planner::PriorKind::network) {
      const auto ctx = context(cfg, model, warm);
      auto fresh = planner::collect_prior_samples(log, day_begin, log.size(), ctx,
                                                  search_config(cfg, mcts::SearchMode::vanilla, cfg.search.prior_budget));
      prior->samples.insert(prior->samples.end(), fresh.begin(), fresh.end());
      refresh_prior(cfg, *prior, seed, day + 1);
    }
  }
  return res;
}

void fill_control_metrics(MetricsRow& row, const std::vector<DayMetrics>& days) {
  double reward = 0.0, cost = 0.0, energy = 0.0, dev = 0.0;
  std::size_t steps = 0;
  for (const auto& d : days) {
    reward += d.reward;
    cost += d.cost;
    energy += d.energy;
    dev += d.abs_dev;
    steps += d.steps;
  }
  row.daily_reward = days.empty() ? std::numeric_limits<double>::quiet_NaN() : reward / static_cast<double>(days.size());
  row.cost_per_kwh = energy > 0.0 ? cost / energy : 0.0;
  row.mean_abs_temp_dev = steps > 0 ? dev / static_cast<double>(steps) : std::numeric_limits<double>::quiet_NaN();
}

ConditionLog make_log(const std::string& cond, std::uint64_t seed, const LoopResult& r, const BackupBand& band) {
  ConditionLog l;
  l.condition = cond;
  l.seed = seed;
  l.steps = r.steps;
  for (const auto& d : r.days) l.daily_rewards.push_back(d.reward);
  l.band = band;
  return l;
}

LoopResult baseline_loop(const ExperimentConfig& cfg, const WarmupData& warm) {
  const std::size_t spd = steps_per_day(cfg.scenario);
  LoopResult res;
  const EpisodeResult ep = run_episode(warm.state, baselines::make_controller(cfg.protocol.baseline_controller),
                                       warm.traces, cfg.env, spd * cfg.protocol.test_days,
                                       EpisodeOptions{cfg.band, cfg.weights}, warm.log);
  if (ep.error) throw std::runtime_error(*ep.error);
  res.steps = ep.steps;
  for (std::size_t day = 0; day < cfg.protocol.test_days; ++day) {
    res.days.push_back(day_metrics(std::span<const StepRecord>(ep.steps).subspan(day * spd, spd), warm.norm,
                                   cfg.scenario.step_h));
  }
  return res;
}

}  // namespace

// ---------------------------------------------------------------- experiments

RunOutput run_forecast_eval(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const auto& fc = cfg.forecaster;
  const std::size_t spd = steps_per_day(cfg.scenario);
  const std::size_t max_train = *std::max_element(fc.train_days.begin(), fc.train_days.end());
  const std::size_t total_days = max_train + fc.test_days;
  Table table{"forecast_eval", {}, {}};

  for (std::uint64_t seed : cfg.seeds) {
    // One long closed-loop trace per seed: training days first, then the held-out test days.
    const ScenarioTraces traces = build_scenario(cfg.scenario, total_days + 1, seed);
    const EpisodeResult ep = run_episode(initial_state(cfg.scenario), baselines::make_controller(fc.data_controller),
                                         traces, cfg.env, total_days * spd, EpisodeOptions{cfg.band, cfg.weights});
    if (ep.error) throw std::runtime_error("data generation failed: " + *ep.error);
    const std::span<const StepRecord> all(ep.steps);
    const std::span<const StepRecord> test = all.subspan(max_train * spd);

    for (std::size_t td : fc.train_days) {
      const std::span<const StepRecord> train = all.subspan((max_train - td) * spd, td * spd);
      for (double hh : fc.horizons_h) {
        const auto h = static_cast<std::size_t>(std::lround(hh / cfg.scenario.step_h));
        for (auto mode : fc.modes) {
          MetricsRow row;
          row.experiment = "forecast_eval";
          row.seed = seed;
          row.mode = physnet::to_string(mode);
          row.train_days = td;
          row.horizon_h = hh;
          row.condition = condition_name(
              {{"mode", row.mode}, {"train_days", std::to_string(td)}, {"horizon_h", csv::fmt(hh)}});
          try {
            const auto train_samples = physnet::make_samples(train, fc.window, h);
            // Windows whose history starts inside the training period are excluded from the test set.
            const auto test_samples = physnet::make_samples(test, fc.window, h);
            physnet::Forecaster model(forecaster_config(cfg, mode), mix(seed, kTagModel));
            physnet::TrainConfig tc;
            tc.epochs = fc.epochs;
            tc.batch_size = fc.batch_size;
            tc.max_updates = fc.max_updates;
            tc.lr = fc.lr;
            tc.seed = mix(seed, kTagTrain);
            physnet::train(model, train_samples, tc);
            const physnet::ForecastErrors err = physnet::evaluate(model, test_samples);
            row.mae_temp = err.mae_temp;
            row.mae_energy = err.mae_energy;
            log_line(opts, "forecast seed " + std::to_string(seed) + " " + row.condition + " mae_T " +
                               csv::fmt(err.mae_temp) + " theta " + csv::fmt(model.theta()));
          } catch (const std::exception& e) {
            row.error = e.what();
            log_line(opts, "forecast " + row.condition + " failed: " + e.what());
          }
          table.rows.push_back(row);
        }
      }
    }
  }
  table.summary = summarize(table.rows, {"mae_temp", "mae_energy"});
  return RunOutput{{table}, {}};
}

RunOutput run_control_eval(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  Table table{"control_eval", {}, {}};
  RunOutput out;

  for (std::uint64_t seed : cfg.seeds) {
    WarmupData warm;
    try {
      warm = run_warmup(cfg, seed);
    } catch (const std::exception& e) {
      MetricsRow row;
      row.experiment = "control_eval";
      row.seed = seed;
      row.condition = "warmup";
      row.error = e.what();
      table.rows.push_back(row);
      continue;
    }
    // Baseline: one run, repeated for every budget so it lines up with the sweep.
    std::optional<LoopResult> base;
    std::string base_error;
    try {
      base = baseline_loop(cfg, warm);
    } catch (const std::exception& e) {
      base_error = e.what();
    }
    std::vector<std::size_t> all_budgets = cfg.search.budgets;
    for (auto b : cfg.search.blackbox_budgets) {
      if (std::find(all_budgets.begin(), all_budgets.end(), b) == all_budgets.end()) all_budgets.push_back(b);
    }
    std::sort(all_budgets.begin(), all_budgets.end());

    for (auto mode : cfg.forecaster.modes) {
      std::optional<physnet::Forecaster> model0;
      std::string train_error;
      try {
        model0 = train_initial(cfg, mode, warm.log, seed);
      } catch (const std::exception& e) {
        train_error = e.what();
      }
      const auto& budgets = mode == physnet::Mode::physnet ? cfg.search.budgets : cfg.search.blackbox_budgets;
      for (std::size_t budget : budgets) {
        MetricsRow row;
        row.experiment = "control_eval";
        row.seed = seed;
        row.mode = physnet::to_string(mode);
        row.search = "vanilla";
        row.budget = budget;
        row.horizon_h = cfg.search.horizon_h;
        row.condition =
            condition_name({{"mode", row.mode}, {"search", "vanilla"}, {"budget", std::to_string(budget)}});
        try {
          if (!model0) throw std::runtime_error("initial training failed: " + train_error);
          const LoopResult r = closed_loop(cfg, warm, *model0, search_config(cfg, mcts::SearchMode::vanilla, budget),
                                           seed, nullptr, planner::PriorKind::none, opts,
                                           "seed " + std::to_string(seed) + " " + row.condition);
          fill_control_metrics(row, r.days);
          if (opts.keep_logs) out.logs.push_back(make_log(row.condition, seed, r, cfg.band));
        } catch (const std::exception& e) {
          row.error = e.what();
          log_line(opts, row.condition + " failed: " + e.what());
        }
        table.rows.push_back(row);
      }
    }
    for (std::size_t budget : all_budgets) {
      MetricsRow row;
      row.experiment = "control_eval";
      row.seed = seed;
      row.mode = cfg.protocol.baseline_controller;
      row.budget = budget;
      row.condition = condition_name({{"mode", row.mode}, {"budget", std::to_string(budget)}});
      if (base) {
        fill_control_metrics(row, base->days);
      } else {
        row.error = base_error;
      }
      table.rows.push_back(row);
    }
    if (opts.keep_logs && base) out.logs.push_back(make_log(cfg.protocol.baseline_controller, seed, *base, cfg.band));
  }
  table.summary = summarize(table.rows, {"daily_reward", "cost_per_kwh", "mean_abs_temp_dev"});
  out.tables.push_back(std::move(table));
  return out;
}

RunOutput run_alphazero_compare(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const std::size_t spd = steps_per_day(cfg.scenario);
  Table table{"alphazero_eval", {}, {}};
  RunOutput out;

  for (std::uint64_t seed : cfg.seeds) {
    auto fail_row = [&](const std::string& cond, const std::string& msg) {
      MetricsRow row;
      row.experiment = "alphazero_eval";
      row.seed = seed;
      row.condition = cond;
      row.error = msg;
      table.rows.push_back(row);
    };
    WarmupData warm;
    std::optional<physnet::Forecaster> model0;
    PriorState prior0{planner::make_prior_network(mix(seed, kTagPrior)), {}};
    try {
      warm = run_warmup(cfg, seed);
      model0 = train_initial(cfg, physnet::Mode::physnet, warm.log, seed);
      // Seed the prior with vanilla searches over the last warmup days.
      const std::size_t days = std::min(cfg.search.prior_seed_days, cfg.protocol.warmup_days);
      const auto ctx = context(cfg, *model0, warm);
      prior0.samples = planner::collect_prior_samples(
          warm.log, warm.log.size() - days * spd, warm.log.size(), ctx,
          search_config(cfg, mcts::SearchMode::vanilla, cfg.search.prior_budget));
      if (!prior0.samples.empty()) refresh_prior(cfg, prior0, seed, 0);
      log_line(opts, "seed " + std::to_string(seed) + " prior seeded with " + std::to_string(prior0.samples.size()) +
                         " samples");
    } catch (const std::exception& e) {
      fail_row("setup", e.what());
      continue;
    }

    for (std::size_t budget : cfg.search.budgets) {
      for (auto smode : {mcts::SearchMode::vanilla, mcts::SearchMode::alphazero}) {
        MetricsRow row;
        row.experiment = "alphazero_eval";
        row.seed = seed;
        row.mode = "physnet";
        row.search = mcts::to_string(smode);
        row.budget = budget;
        row.horizon_h = cfg.search.horizon_h;
        row.condition = condition_name({{"search", row.search}, {"budget", std::to_string(budget)}});
        try {
          PriorState prior = prior0;
          const LoopResult r =
              closed_loop(cfg, warm, *model0, search_config(cfg, smode, budget), seed,
                          smode == mcts::SearchMode::alphazero ? &prior : nullptr, planner::PriorKind::network, opts,
                          "seed " + std::to_string(seed) + " " + row.condition);
          fill_control_metrics(row, r.days);
          if (opts.keep_logs) out.logs.push_back(make_log(row.condition, seed, r, cfg.band));
        } catch (const std::exception& e) {
          row.error = e.what();
          log_line(opts, row.condition + " failed: " + e.what());
        }
        table.rows.push_back(row);
      }
    }
  }
  table.summary = summarize(table.rows, {"daily_reward", "cost_per_kwh", "mean_abs_temp_dev"});
  out.tables.push_back(std::move(table));
  return out;
}

}  // namespace pinnmcts::harness
