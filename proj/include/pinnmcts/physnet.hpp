#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinnmcts/core.hpp"
#include "pinnmcts/nn.hpp"
#include "pinnmcts/thermal_env.hpp"

namespace pinnmcts::physnet {

enum class Mode { physnet, blackbox };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

constexpr std::size_t kEncoderHidden = 32;
constexpr std::size_t kPredictorHidden = 64;
constexpr std::size_t kPredictorInputs = 7;  // z, T_r, u_prev, sin tau, cos tau, T_a, u

// Latent scaling: mass temperature = 20 + 10 z.
constexpr double kLatentCenter = 20.0;
constexpr double kLatentScale = 10.0;

inline double latent_to_mass_temp(double z) { return kLatentCenter + kLatentScale * z; }
inline double mass_temp_to_latent(double T) { return (T - kLatentCenter) / kLatentScale; }

struct ForecasterConfig {
  Mode mode = Mode::physnet;
  std::size_t window = 24;          // past building states fed to the encoder
  double step_h = 0.5;
  double mass_time_constant_h = 80.0;  // initial guess; theta_0 = step_h / this
  double physics_weight = 1.0;
};

// Observable building state x^b_t = (T_r(t), u_phys(t - 1)).
struct BuildingState {
  double T_r = 20.0;
  double u_phys_prev = 0.0;
};

// Normalised encoder input, oldest entry first: [T_r, u, T_r, u, ...].
using Window = std::vector<double>;

Window make_window(std::span<const BuildingState> states, std::size_t d);
// Drops the oldest entry and appends (T_r, u_phys).
void push_window(Window& w, double T_r, double u_phys);

struct ExogenousStep {
  double tau = 0.0;
  double T_a = 5.0;
};

struct Prediction {
  double T_r = 20.0;    // degC, in [15, 25]
  double u_phys = 0.0;  // W, in [0, 4000]
};

struct RolloutResult {
  std::vector<double> T_r;     // h entries, steps 1..h
  std::vector<double> u_phys;  // h entries, steps 1..h
  std::vector<double> T_m;     // h + 1 entries, steps 0..h
};

class Forecaster {
 public:
  Forecaster() = default;
  Forecaster(const ForecasterConfig& cfg, std::uint64_t seed);

  const ForecasterConfig& config() const { return cfg_; }
  Mode mode() const { return cfg_.mode; }
  std::size_t window() const { return cfg_.window; }

  double theta() const;
  double theta_raw() const { return theta_raw_; }
  void set_theta_raw(double raw);
  void set_theta(double theta);

  nn::Network& encoder() { return encoder_; }
  const nn::Network& encoder() const { return encoder_; }
  nn::Network& predictor() { return predictor_; }
  const nn::Network& predictor() const { return predictor_; }

  // Latent z in (-1, 1) for a normalised window of exactly `window()` entries.
  double encode(std::span<const double> window, nn::Workspace& ws) const;
  double encode(std::span<const double> window) const;

  Prediction predict(double z, const BuildingState& current, const ExogenousStep& exo, double u,
                     nn::Workspace& ws) const;

  // Autoregressive multi-step forecast; each predicted state is appended to the window and re-encoded.
  RolloutResult rollout(std::span<const double> window, const BuildingState& current,
                        std::span<const ExogenousStep> exo, std::span<const double> actions) const;

  nlohmann::json to_json() const;
  static Forecaster from_json(const nlohmann::json& j);

 private:
  ForecasterConfig cfg_;
  nn::Network encoder_;
  nn::Network predictor_;
  double theta_raw_ = 0.0;
};

std::vector<double> predictor_inputs(double z, const BuildingState& current, const ExogenousStep& exo, double u);

// Targets for the latent mass temperatures: T_m[k] = T_m_hat[k-1] + theta (T_r[k-1] - T_m_hat[k-1]).
// Both inputs have h entries (k - 1 = 0 .. h - 1); the result holds T_m[1..h].
std::vector<double> physics_targets(std::span<const double> T_m_hat, std::span<const double> T_r, double theta);

// One training/evaluation window.
struct ForecastSample {
  Window window;                     // history ending at the current step
  BuildingState current;             // last entry of the window, in physical units
  std::vector<ExogenousStep> exo;    // h entries
  std::vector<double> actions;       // h entries
  std::vector<double> T_r_next;      // measured T_r at steps 1..h
  std::vector<double> u_phys_next;   // measured power over steps 0..h-1 (reported at 1..h)
};

// Stride-1 windows over a contiguous step log. Throws when the log is shorter than d + h steps.
// When `T_a_source` is given, the exogenous outdoor temperature is read from it (indexed by
// StepRecord::t) instead of the logged measurement, e.g. to evaluate on forecasts.
std::vector<ForecastSample> make_samples(std::span<const StepRecord> log, std::size_t d, std::size_t h,
                                         std::size_t stride = 1, const std::vector<double>* T_a_source = nullptr);

struct LossParts {
  double total = 0.0;
  double regression = 0.0;
  double physics = 0.0;
};

struct Gradients {
  std::vector<double> encoder;
  std::vector<double> predictor;
  double theta_raw = 0.0;

  explicit Gradients(const Forecaster& f)
      : encoder(f.encoder().num_params(), 0.0), predictor(f.predictor().num_params(), 0.0) {}
  void zero();
};

// Loss of a single window over its horizon plus the gradient with respect to every parameter
// (accumulated into `grads`, scaled by `scale`). Gradients flow through the whole autoregressive chain;
// physics targets are treated as constants for the networks while theta receives the gradient of the
// target term.
LossParts loss_and_gradient(const Forecaster& model, const ForecastSample& sample, Gradients* grads,
                            double scale = 1.0);

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::size_t max_updates = 0;  // 0 = no cap
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean per-window loss for each epoch
  std::size_t updates = 0;
};

// Trains in place (warm start) on the given samples.
TrainResult train(Forecaster& model, const std::vector<ForecastSample>& samples, const TrainConfig& cfg);

// Builds a fresh model from `seed` and trains it.
Forecaster train_new(const ForecasterConfig& fcfg, const std::vector<ForecastSample>& samples, const TrainConfig& cfg,
                     TrainResult* result = nullptr);

struct ForecastErrors {
  double mae_temp = 0.0;    // degC
  double mae_energy = 0.0;  // W
  std::size_t count = 0;
};

ForecastErrors evaluate(const Forecaster& model, const std::vector<ForecastSample>& samples);

}  // namespace pinnmcts::physnet
