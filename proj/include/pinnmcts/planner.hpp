#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinnmcts/core.hpp"
#include "pinnmcts/mcts.hpp"
#include "pinnmcts/nn.hpp"
#include "pinnmcts/physnet.hpp"
#include "pinnmcts/scenario.hpp"
#include "pinnmcts/thermal_env.hpp"

namespace pinnmcts::planner {

// Planner-side state: what the forecaster believes about the building.
struct SimState {
  double tau = 0.0;
  double T_r = 20.0;
  double T_m = 20.0;  // decoded latent
  double z = 0.0;
  double u_prev = 0.0;  // W
  std::size_t offset = 0;  // steps from the root
  physnet::Window window;
};

// Exogenous forecast for one planning step.
struct HorizonStep {
  double tau = 0.0;
  double T_a = 5.0;  // forecast, never the true value
  double lambda = 0.0;
  double T_set = 20.0;
};

// n entries starting at step t, read from T_a_forecast. Past the end of the traces the last
// values are held while the clock keeps running.
std::vector<HorizonStep> forecast_slice(const ScenarioTraces& traces, std::size_t t, std::size_t n);

enum class PriorKind { none, unit, network };

// Deterministic FOMDP over the trained forecaster.
class ThermalSimEnv {
 public:
  using State = SimState;

  ThermalSimEnv(const physnet::Forecaster& model, std::vector<HorizonStep> horizon, const RewardNormalizer& norm,
                const ComfortWeights& weights, const BackupBand& band, double step_h);

  // `net` must outlive the environment; nullptr keeps the uniform prior.
  void set_prior(PriorKind kind, const nn::Network* net = nullptr);

  std::size_t num_actions() const { return kNumActions; }
  void allowed_actions(const SimState& s, std::vector<int>& out) const;
  mcts::Transition<SimState> transition(const SimState& s, int a) const;
  void prior(const SimState& s, std::span<const int> actions, std::span<double> out) const;

  // Root from the real observation history: `window` must already end with the current observation.
  SimState make_root(const physnet::Window& window, const ObservableState& obs) const;

  const std::vector<HorizonStep>& horizon() const { return horizon_; }
  const physnet::Forecaster& model() const { return model_; }

 private:
  const HorizonStep& at(std::size_t offset) const;

  const physnet::Forecaster& model_;
  std::vector<HorizonStep> horizon_;
  RewardNormalizer norm_;
  ComfortWeights weights_;
  BackupBand band_;
  double step_h_;
  PriorKind prior_kind_ = PriorKind::none;
  const nn::Network* prior_net_ = nullptr;
};

constexpr std::size_t kPriorFeatures = 7;

// Normalised (sin tau, cos tau, T_r, T_m, T_a, lambda, T_set).
std::vector<double> prior_features(const SimState& s, const HorizonStep& exo);

// Encoder window ending at `obs`, built from the last d - 1 logged observations.
physnet::Window history_window(std::span<const StepRecord> history, const ObservableState& obs, std::size_t d);

struct PriorSample {
  std::vector<double> features;
  std::vector<double> target;  // root visit distribution over the full action set
};

struct PlannerContext {
  const physnet::Forecaster* model = nullptr;
  const ScenarioTraces* traces = nullptr;
  RewardNormalizer norm;
  ComfortWeights weights;
  BackupBand band;
};

// One vanilla search per logged decision in `day` (a contiguous slice of `log`); the states in
// `log` before the slice supply the encoder history.
std::vector<PriorSample> collect_prior_samples(std::span<const StepRecord> log, std::size_t day_begin,
                                               std::size_t day_end, const PlannerContext& ctx,
                                               const mcts::SearchConfig& cfg);

struct PriorTrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

nn::Network make_prior_network(std::uint64_t seed);

// Cross-entropy fit of the 7-64-32-5 prior; returns the mean loss of the last epoch in `final_loss`.
nn::Network train_prior(const std::vector<PriorSample>& data, const PriorTrainConfig& cfg,
                        double* final_loss = nullptr);
// Warm-start variant.
double train_prior(nn::Network& net, const std::vector<PriorSample>& data, const PriorTrainConfig& cfg);

nlohmann::json tree_to_json(const mcts::Tree<SimState>& tree, std::size_t max_nodes = 0);

}  // namespace pinnmcts::planner
