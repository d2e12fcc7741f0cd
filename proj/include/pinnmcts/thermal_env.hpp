#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pinnmcts/core.hpp"
#include "pinnmcts/scenario.hpp"

namespace pinnmcts {

// Ground-truth building: room air, internal mass and envelope nodes.
//
//   C_r dT_r = (T_m - T_r)/R_rm + (T_a - T_r)/R_ra + (T_e - T_r)/R_re + gamma G + Q_int + COP(T_a) P
//   C_m dT_m = (T_r - T_m)/R_rm
//   C_e dT_e = (T_r - T_e)/R_re + (T_a - T_e)/R_ea
//
// The planner's forecaster only assumes a room/mass pair, so the envelope node and the
// temperature-dependent COP are deliberate model mismatch.
struct EnvParams {
  double C_r = 2.0e7;   // J/degC, room air and furnishings (about 4 h)
  double C_m = 2.16e8;  // J/degC, building mass (about 60 h)
  double C_e = 3.24e7;  // J/degC, envelope (about 20 h)
  double R_rm = 1.0e-3;       // degC/W
  double R_ra = 1.0 / 80.0;   // degC/W
  double R_re = 1.0 / 300.0;  // degC/W
  double R_ea = 1.0 / 150.0;  // degC/W
  double gamma_solar = 6.0;   // m2
  double P_el_max = 4000.0;   // W
  double cop_a = 3.0;
  double cop_b = 0.05;  // per degC
  double cop_min = 1.5;
  double cop_max = 5.0;
  double Q_int_base = 300.0;  // W
  int substeps = 10;

  double cop(double T_a) const;
  // Throws std::invalid_argument for non-physical or Euler-unstable parameters.
  void validate(double step_h) const;
  // Mass coupling coefficient step/(C_m R_rm) of the room/mass pair.
  double mass_coupling(double step_h) const { return step_h * 3600.0 / (C_m * R_rm); }
};

struct GroundTruthState {
  double T_r = 20.0;
  double T_m = 20.0;
  double T_e = 20.0;
  std::size_t step_index = 0;
  double last_power_w = 0.0;  // electrical power applied over the previous step
};

struct BackupBand {
  double delta_minus = 1.0;
  double delta_plus = 1.0;

  void validate() const;
};

struct ExogenousInput {
  double T_a = 5.0;
  double G_solar = 0.0;
  double I_g = 0.0;
};

// Integrates one control step with `substeps` forward-Euler substeps.
// Returns the new state; `power_w` receives u * P_el_max.
GroundTruthState advance(const GroundTruthState& s, double u, const ExogenousInput& exog, const EnvParams& p,
                         double step_h, int substeps, double* power_w = nullptr);

// What the controller is allowed to see at step index s.step_index.
ObservableState observe(const GroundTruthState& s, const ScenarioTraces& traces);

struct StepOutcome {
  GroundTruthState state;
  double u_phys = 0.0;
  ObservableState obs;
};

StepOutcome step(const GroundTruthState& s, Action u, const ScenarioTraces& traces, const EnvParams& p);

Action backup_override(const ObservableState& obs, Action u, const BackupBand& band);

struct StepRecord {
  std::size_t t = 0;
  ObservableState obs;       // observation the decision was taken on
  double u_requested = 0.0;  // controller output
  double u_applied = 0.0;    // after the backup override
  double u_phys = 0.0;       // W
  double T_r_next = 0.0;
  double reward = 0.0;       // raw, un-normalised
};

using Controller = std::function<Action(const ObservableState&, std::span<const StepRecord> history)>;

struct EpisodeResult {
  std::vector<StepRecord> steps;
  GroundTruthState final_state;
  std::optional<std::string> error;  // set when the controller threw
};

struct EpisodeOptions {
  BackupBand band;
  ComfortWeights weights;
};

// Runs n_steps starting from s0 (s0.step_index selects the trace position). The controller
// sees `prior_history` followed by the steps of this episode.
EpisodeResult run_episode(const GroundTruthState& s0, const Controller& controller, const ScenarioTraces& traces,
                          const EnvParams& p, std::size_t n_steps, const EpisodeOptions& opts,
                          std::span<const StepRecord> prior_history = {});

}  // namespace pinnmcts
