#include "pinnmcts/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pinnmcts/csv.hpp"

namespace pinnmcts {

void ScenarioTraces::validate() const {
  const std::size_t n = grid.n_steps;
  auto check = [n](const std::vector<double>& v, const char* name) {
    if (v.size() != n) {
      throw std::invalid_argument(std::string("ScenarioTraces: series '") + name + "' has length " +
                                  std::to_string(v.size()) + ", expected " + std::to_string(n));
    }
    for (double x : v) {
      if (!std::isfinite(x)) throw std::invalid_argument(std::string("ScenarioTraces: non-finite value in ") + name);
    }
  };
  check(lambda, "lambda");
  check(T_a_true, "T_a_true");
  check(T_a_forecast, "T_a_forecast");
  check(T_set, "T_set");
  check(G_solar, "G_solar");
  check(I_g, "I_g");
}

std::vector<double> square_wave_price(const TimeGrid& grid, double low, double high, double period_h,
                                      double phase_h) {
  if (!(period_h > 0.0)) throw std::invalid_argument("square_wave_price: period must be positive");
  if (low > high) throw std::invalid_argument("square_wave_price: low must not exceed high");
  std::vector<double> out(grid.n_steps);
  const double half = 0.5 * period_h;
  for (std::size_t t = 0; t < grid.n_steps; ++t) {
    const double elapsed = static_cast<double>(t) * grid.step_h + phase_h;
    // Small epsilon keeps exact multiples of the half period on the new level.
    const auto k = static_cast<long long>(std::floor(elapsed / half + 1e-9));
    out[t] = (k % 2 == 0) ? low : high;
  }
  return out;
}

std::vector<double> synth_weather(const TimeGrid& grid, double mean, double amplitude, double coldest_hour,
                                  std::uint64_t seed, double noise_std) {
  if (amplitude < 0.0) throw std::invalid_argument("synth_weather: amplitude must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> out(grid.n_steps);
  for (std::size_t t = 0; t < grid.n_steps; ++t) {
    const double tau = grid.hour_of_day(t);
    const double base = mean - amplitude * std::cos(2.0 * kPi * (tau - coldest_hour) / 24.0);
    const double eps = noise(rng);
    out[t] = ranges::kOutdoorTemp.clamp(base + noise_std * eps);
  }
  return out;
}

namespace {

void add_walk(const double* truth, double* out, std::size_t n, double sigma, std::mt19937_64& rng) {
  std::bernoulli_distribution sign(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  double err = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      const double s = sign(rng) ? 1.0 : -1.0;
      err += s * std::abs(normal(rng)) * sigma;
    }
    out[t] = truth[t] + err;
  }
}

}  // namespace

std::vector<double> cumulative_noise(const std::vector<double>& T_a_true, const NoiseSpec& spec) {
  if (spec.sigma < 0.0) throw std::invalid_argument("cumulative_noise: sigma must be nonnegative");
  std::vector<double> out(T_a_true.size());
  if (spec.sigma == 0.0) return T_a_true;
  std::mt19937_64 rng(spec.seed);
  add_walk(T_a_true.data(), out.data(), T_a_true.size(), spec.sigma, rng);
  return out;
}

std::vector<double> cumulative_noise_blocks(const std::vector<double>& T_a_true, const NoiseSpec& spec,
                                            std::size_t block_len) {
  if (spec.sigma < 0.0) throw std::invalid_argument("cumulative_noise: sigma must be nonnegative");
  if (block_len == 0) throw std::invalid_argument("cumulative_noise_blocks: block length must be positive");
  if (spec.sigma == 0.0) return T_a_true;
  std::vector<double> out(T_a_true.size());
  std::mt19937_64 rng(spec.seed);
  for (std::size_t start = 0; start < T_a_true.size(); start += block_len) {
    const std::size_t n = std::min(block_len, T_a_true.size() - start);
    add_walk(T_a_true.data() + start, out.data() + start, n, spec.sigma, rng);
  }
  return out;
}

std::vector<double> setpoint_schedule(const TimeGrid& grid, double day_temp, double night_temp,
                                      double day_start_h, double day_end_h) {
  for (double v : {day_temp, night_temp}) {
    if (v < ranges::kSetpoint.lo || v > ranges::kSetpoint.hi) {
      throw std::invalid_argument("setpoint_schedule: temperatures must lie in [15, 25]");
    }
  }
  std::vector<double> out(grid.n_steps);
  for (std::size_t t = 0; t < grid.n_steps; ++t) {
    const double tau = grid.hour_of_day(t);
    const bool day = (day_start_h <= day_end_h) ? (tau >= day_start_h && tau < day_end_h)
                                                : (tau >= day_start_h || tau < day_end_h);
    out[t] = day ? day_temp : night_temp;
  }
  return out;
}

std::vector<double> solar_profile(const TimeGrid& grid, double peak_w_m2, double sunrise_h, double sunset_h) {
  std::vector<double> out(grid.n_steps, 0.0);
  if (!(sunset_h > sunrise_h)) return out;
  for (std::size_t t = 0; t < grid.n_steps; ++t) {
    const double tau = grid.hour_of_day(t);
    if (tau > sunrise_h && tau < sunset_h) {
      out[t] = peak_w_m2 * std::sin(kPi * (tau - sunrise_h) / (sunset_h - sunrise_h));
    }
  }
  return out;
}

std::vector<double> internal_gain_profile(const TimeGrid& grid, double base_w, double bump_w, double bump_start_h,
                                          double bump_end_h) {
  std::vector<double> out(grid.n_steps, base_w);
  for (std::size_t t = 0; t < grid.n_steps; ++t) {
    const double tau = grid.hour_of_day(t);
    if (tau >= bump_start_h && tau < bump_end_h) out[t] += bump_w;
  }
  return out;
}

namespace {

std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

int parse_int(const std::string& s, std::size_t pos, std::size_t len, const std::string& full) {
  int v = 0;
  if (pos + len > s.size()) throw std::invalid_argument("bad timestamp: '" + full + "'");
  auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
  if (ec != std::errc() || p != s.data() + pos + len) throw std::invalid_argument("bad timestamp: '" + full + "'");
  return v;
}

}  // namespace

std::int64_t parse_timestamp_minutes(const std::string& text) {
  std::string s = csv::trim(text);
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.pop_back();
  // YYYY-MM-DD HH:MM[:SS]
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') {
    throw std::invalid_argument("bad timestamp: '" + text + "'");
  }
  const int year = parse_int(s, 0, 4, text);
  const int month = parse_int(s, 5, 2, text);
  const int day = parse_int(s, 8, 2, text);
  const int hour = parse_int(s, 11, 2, text);
  const int minute = parse_int(s, 14, 2, text);
  if (s.size() > 16) {
    if (s.size() != 19 || s[16] != ':') throw std::invalid_argument("bad timestamp: '" + text + "'");
    parse_int(s, 17, 2, text);
  }
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59) {
    throw std::invalid_argument("bad timestamp: '" + text + "'");
  }
  return days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) * 1440 + hour * 60 + minute;
}

std::vector<double> load_csv_trace(const std::filesystem::path& path, const CsvColumnMap& columns,
                                   const TimeGrid& grid) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv_trace: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv_trace: empty file " + path.string());
  const auto header = csv::split(line);
  const auto find_col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (csv::trim(header[i]) == name) return i;
    }
    throw std::runtime_error("load_csv_trace: column '" + name + "' not found in " + path.string());
  };
  const std::size_t ts_col = find_col(columns.timestamp);
  const std::size_t val_col = find_col(columns.value);

  std::vector<std::pair<std::int64_t, double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() <= std::max(ts_col, val_col)) {
      throw std::runtime_error("load_csv_trace: short row at line " + std::to_string(line_no));
    }
    const std::int64_t ts = parse_timestamp_minutes(cells[ts_col]);
    double value = 0.0;
    if (!csv::parse_double(cells[val_col], value)) {
      throw std::runtime_error("load_csv_trace: non-numeric value '" + cells[val_col] + "' at line " +
                               std::to_string(line_no));
    }
    rows.emplace_back(ts, value);
  }
  if (rows.empty()) throw std::runtime_error("load_csv_trace: no data rows in " + path.string());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  const auto grid_minutes = static_cast<std::int64_t>(std::llround(grid.step_h * 60.0));
  std::int64_t spacing = grid_minutes;
  if (rows.size() > 1) spacing = rows[1].first - rows[0].first;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::int64_t gap = rows[i].first - rows[i - 1].first;
    if (gap == 0) throw std::runtime_error("load_csv_trace: duplicate timestamp in " + path.string());
    if (gap != spacing) throw std::runtime_error("load_csv_trace: gap or irregular spacing in " + path.string());
  }
  if (spacing % grid_minutes != 0) {
    throw std::runtime_error("load_csv_trace: source spacing is not a multiple of the grid step");
  }
  const auto first_minute_of_day = ((rows.front().first % 1440) + 1440) % 1440;
  if (first_minute_of_day != static_cast<std::int64_t>(std::llround(grid.start_hour * 60.0))) {
    throw std::runtime_error("load_csv_trace: first timestamp does not match the grid start hour");
  }
  const auto repeat = static_cast<std::size_t>(spacing / grid_minutes);
  if (rows.size() * repeat < grid.n_steps) {
    throw std::runtime_error("load_csv_trace: trace covers " + std::to_string(rows.size() * repeat) +
                             " steps, grid needs " + std::to_string(grid.n_steps));
  }
  std::vector<double> out;
  out.reserve(grid.n_steps);
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < repeat && out.size() < grid.n_steps; ++k) out.push_back(row.second);
  }
  return out;
}

void write_traces_csv(const ScenarioTraces& traces, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_traces_csv: cannot open " + path.string());
  out << "step,tau,lambda,T_a_true,T_a_forecast,T_set,G_solar,I_g\n";
  for (std::size_t t = 0; t < traces.size(); ++t) {
    out << t << ',' << csv::fmt(traces.grid.hour_of_day(t)) << ',' << csv::fmt(traces.lambda[t]) << ','
        << csv::fmt(traces.T_a_true[t]) << ',' << csv::fmt(traces.T_a_forecast[t]) << ',' << csv::fmt(traces.T_set[t])
        << ',' << csv::fmt(traces.G_solar[t]) << ',' << csv::fmt(traces.I_g[t]) << '\n';
  }
  if (!out) throw std::runtime_error("write_traces_csv: write failed for " + path.string());
}

}  // namespace pinnmcts
