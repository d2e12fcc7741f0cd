#include "pinnmcts/thermal_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pinnmcts {

double EnvParams::cop(double T_a) const { return std::clamp(cop_a + cop_b * T_a, cop_min, cop_max); }

void EnvParams::validate(double step_h) const {
  for (double v : {C_r, C_m, C_e, R_rm, R_ra, R_re, R_ea}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("EnvParams: capacitances and resistances must be positive");
  }
  if (P_el_max < 0.0 || gamma_solar < 0.0) throw std::invalid_argument("EnvParams: negative power or aperture");
  if (substeps < 1) throw std::invalid_argument("EnvParams: substeps must be >= 1");
  if (cop_min < 1.0 || cop_max < cop_min) throw std::invalid_argument("EnvParams: invalid COP clip range");
  for (double Ta : {-10.0, 20.0}) {
    if (cop(Ta) < 1.0) throw std::invalid_argument("EnvParams: COP below 1 within [-10, 20] degC");
  }
  // Forward Euler on a diagonal-dominant linear system is stable when dt < 2 * min time constant.
  const double dt = step_h * 3600.0 / substeps;
  const double tau_r = C_r / (1.0 / R_rm + 1.0 / R_ra + 1.0 / R_re);
  const double tau_m = C_m * R_rm;
  const double tau_e = C_e / (1.0 / R_re + 1.0 / R_ea);
  const double tau_min = std::min({tau_r, tau_m, tau_e});
  if (dt >= tau_min) {
    throw std::invalid_argument("EnvParams: Euler substep " + std::to_string(dt) +
                                " s is not below the fastest time constant " + std::to_string(tau_min) + " s");
  }
}

void BackupBand::validate() const {
  if (!(delta_minus > 0.0) || !(delta_plus > 0.0)) throw std::invalid_argument("BackupBand: deltas must be positive");
}

GroundTruthState advance(const GroundTruthState& s, double u, const ExogenousInput& exog, const EnvParams& p,
                         double step_h, int substeps, double* power_w) {
  if (!(step_h > 0.0)) throw std::invalid_argument("advance: step must be positive");
  if (substeps < 1) throw std::invalid_argument("advance: substeps must be >= 1");
  const double u_clamped = std::clamp(u, 0.0, 1.0);
  const double power = u_clamped * p.P_el_max;
  const double q_hp = p.cop(exog.T_a) * power;
  const double q_free = p.gamma_solar * exog.G_solar + p.Q_int_base + exog.I_g;
  const double dt = step_h * 3600.0 / substeps;

  double Tr = s.T_r, Tm = s.T_m, Te = s.T_e;
  for (int k = 0; k < substeps; ++k) {
    const double q_rm = (Tm - Tr) / p.R_rm;
    const double q_ra = (exog.T_a - Tr) / p.R_ra;
    const double q_re = (Te - Tr) / p.R_re;
    const double q_ea = (exog.T_a - Te) / p.R_ea;
    const double dTr = (q_rm + q_ra + q_re + q_free + q_hp) / p.C_r;
    const double dTm = -q_rm / p.C_m;
    const double dTe = (-q_re + q_ea) / p.C_e;
    Tr += dt * dTr;
    Tm += dt * dTm;
    Te += dt * dTe;
  }
  if (!std::isfinite(Tr) || !std::isfinite(Tm) || !std::isfinite(Te)) {
    throw std::runtime_error("advance: integration blow-up; parameters violate stability");
  }
  if (power_w != nullptr) *power_w = power;
  return GroundTruthState{Tr, Tm, Te, s.step_index + 1, power};
}

ObservableState observe(const GroundTruthState& s, const ScenarioTraces& traces) {
  const std::size_t t = std::min(s.step_index, traces.size() - 1);
  ObservableState obs;
  obs.tau = traces.grid.hour_of_day(s.step_index);
  obs.T_r = s.T_r;
  obs.u_phys_prev = s.last_power_w;
  obs.T_a = traces.T_a_true[t];
  obs.lambda = traces.lambda[t];
  obs.T_set = traces.T_set[t];
  return obs;
}

StepOutcome step(const GroundTruthState& s, Action u, const ScenarioTraces& traces, const EnvParams& p) {
  if (s.step_index >= traces.size()) throw std::out_of_range("step: state index beyond the scenario traces");
  const std::size_t t = s.step_index;
  const ExogenousInput exog{traces.T_a_true[t], traces.G_solar[t], traces.I_g[t]};
  StepOutcome out;
  out.state = advance(s, u.u, exog, p, traces.grid.step_h, p.substeps, &out.u_phys);
  out.obs = observe(out.state, traces);
  return out;
}

Action backup_override(const ObservableState& obs, Action u, const BackupBand& band) {
  if (obs.T_r < obs.T_set - band.delta_minus) return Action{1.0};
  if (obs.T_r > obs.T_set + band.delta_plus) return Action{0.0};
  return u;
}

EpisodeResult run_episode(const GroundTruthState& s0, const Controller& controller, const ScenarioTraces& traces,
                          const EnvParams& p, std::size_t n_steps, const EpisodeOptions& opts,
                          std::span<const StepRecord> prior_history) {
  opts.band.validate();
  if (s0.step_index + n_steps > traces.size()) {
    throw std::out_of_range("run_episode: traces do not cover the requested steps");
  }
  std::vector<StepRecord> history(prior_history.begin(), prior_history.end());
  const std::size_t prior = history.size();
  history.reserve(prior + n_steps);

  EpisodeResult result;
  GroundTruthState s = s0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const ObservableState obs = observe(s, traces);
    Action requested;
    try {
      requested = controller(obs, std::span<const StepRecord>(history));
    } catch (const std::exception& e) {
      result.error = "controller failed at step " + std::to_string(s.step_index) + ": " + e.what();
      break;
    }
    const Action applied = backup_override(obs, requested, opts.band);
    const StepOutcome next = step(s, applied, traces, p);

    StepRecord rec;
    rec.t = s.step_index;
    rec.obs = obs;
    rec.u_requested = requested.u;
    rec.u_applied = applied.u;
    rec.u_phys = next.u_phys;
    rec.T_r_next = next.state.T_r;
    rec.reward = reward(next.u_phys, obs.lambda, traces.grid.step_h, obs.T_set, next.state.T_r, opts.weights);
    history.push_back(rec);
    s = next.state;
  }
  result.steps.assign(history.begin() + static_cast<std::ptrdiff_t>(prior), history.end());
  result.final_state = s;
  return result;
}

}  // namespace pinnmcts
