#include "pinnmcts/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pinnmcts::planner {

std::vector<HorizonStep> forecast_slice(const ScenarioTraces& traces, std::size_t t, std::size_t n) {
  if (traces.size() == 0) throw std::invalid_argument("forecast_slice: empty traces");
  std::vector<HorizonStep> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = std::min(t + k, traces.size() - 1);
    out[k] = HorizonStep{traces.grid.hour_of_day(t + k), traces.T_a_forecast[i], traces.lambda[i], traces.T_set[i]};
  }
  return out;
}

ThermalSimEnv::ThermalSimEnv(const physnet::Forecaster& model, std::vector<HorizonStep> horizon,
                             const RewardNormalizer& norm, const ComfortWeights& weights, const BackupBand& band,
                             double step_h)
    : model_(model), horizon_(std::move(horizon)), norm_(norm), weights_(weights), band_(band), step_h_(step_h) {
  if (horizon_.empty()) throw std::invalid_argument("ThermalSimEnv: empty forecast horizon");
  if (!(step_h > 0.0)) throw std::invalid_argument("ThermalSimEnv: step must be > 0");
  norm_.validate();
  weights_.validate();
  band_.validate();
}

void ThermalSimEnv::set_prior(PriorKind kind, const nn::Network* net) {
  if (kind == PriorKind::network) {
    if (net == nullptr) throw std::invalid_argument("ThermalSimEnv: network prior requested without a network");
    if (net->input_dim() != kPriorFeatures || net->output_dim() != kNumActions) {
      throw std::invalid_argument("ThermalSimEnv: prior network has the wrong shape");
    }
  }
  prior_kind_ = kind;
  prior_net_ = kind == PriorKind::network ? net : nullptr;
}

const HorizonStep& ThermalSimEnv::at(std::size_t offset) const {
  if (offset >= horizon_.size()) {
    throw std::out_of_range("ThermalSimEnv: state offset " + std::to_string(offset) + " beyond the forecast horizon");
  }
  return horizon_[offset];
}

void ThermalSimEnv::allowed_actions(const SimState& s, std::vector<int>& out) const {
  out = mcts::allowed_actions(s.T_r, at(s.offset).T_set, band_);
}

mcts::Transition<SimState> ThermalSimEnv::transition(const SimState& s, int a) const {
  thread_local nn::Workspace ws;
  const HorizonStep& exo = at(s.offset);
  const double u = kActionValues.at(static_cast<std::size_t>(a));
  const physnet::Prediction p =
      model_.predict(s.z, physnet::BuildingState{s.T_r, s.u_prev}, physnet::ExogenousStep{exo.tau, exo.T_a}, u, ws);
  if (!std::isfinite(p.T_r) || !std::isfinite(p.u_phys)) throw std::runtime_error("forecaster produced a non-finite state");

  mcts::Transition<SimState> tr;
  SimState& n = tr.next;
  n.window = s.window;
  physnet::push_window(n.window, p.T_r, p.u_phys);
  n.z = model_.encode(n.window, ws);
  n.T_m = physnet::latent_to_mass_temp(n.z);
  n.T_r = p.T_r;
  n.u_prev = p.u_phys;
  n.offset = s.offset + 1;
  n.tau = n.offset < horizon_.size() ? horizon_[n.offset].tau : std::fmod(s.tau + step_h_, 24.0);
  tr.reward = normalize_reward(reward(p.u_phys, exo.lambda, step_h_, exo.T_set, p.T_r, weights_), norm_);
  return tr;
}

void ThermalSimEnv::prior(const SimState& s, std::span<const int> actions, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  if (prior_kind_ != PriorKind::network) {
    const double p = prior_kind_ == PriorKind::unit ? 1.0 : 1.0 / static_cast<double>(actions.size());
    for (int a : actions) out[static_cast<std::size_t>(a)] = p;
    return;
  }
  thread_local nn::Workspace ws;
  const auto x = prior_features(s, at(s.offset));
  std::array<double, kNumActions> probs{};
  prior_net_->infer(x, probs, ws);
  double total = 0.0;
  for (int a : actions) total += probs[static_cast<std::size_t>(a)];
  for (int a : actions) {
    out[static_cast<std::size_t>(a)] =
        total > 0.0 ? probs[static_cast<std::size_t>(a)] / total : 1.0 / static_cast<double>(actions.size());
  }
}

SimState ThermalSimEnv::make_root(const physnet::Window& window, const ObservableState& obs) const {
  SimState s;
  s.window = window;
  s.z = model_.encode(window);
  s.T_m = physnet::latent_to_mass_temp(s.z);
  s.T_r = obs.T_r;
  s.u_prev = obs.u_phys_prev;
  s.tau = obs.tau;
  s.offset = 0;
  return s;
}

std::vector<double> prior_features(const SimState& s, const HorizonStep& exo) {
  const double angle = 2.0 * kPi * s.tau / 24.0;
  return {std::sin(angle),
          std::cos(angle),
          ranges::kRoomTemp.to_symmetric(s.T_r),
          physnet::mass_temp_to_latent(s.T_m),
          ranges::kOutdoorTemp.to_symmetric(exo.T_a),
          ranges::kPrice.to_symmetric(exo.lambda),
          ranges::kSetpoint.to_symmetric(exo.T_set)};
}

physnet::Window history_window(std::span<const StepRecord> history, const ObservableState& obs, std::size_t d) {
  if (d < 1) throw std::invalid_argument("history_window: d must be >= 1");
  if (history.size() + 1 < d) {
    throw std::invalid_argument("history_window: need " + std::to_string(d - 1) + " logged steps, have " +
                                std::to_string(history.size()));
  }
  std::vector<physnet::BuildingState> states;
  states.reserve(d);
  for (std::size_t i = history.size() + 1 - d; i < history.size(); ++i) {
    states.push_back({history[i].obs.T_r, history[i].obs.u_phys_prev});
  }
  states.push_back({obs.T_r, obs.u_phys_prev});
  return physnet::make_window(states, d);
}

std::vector<PriorSample> collect_prior_samples(std::span<const StepRecord> log, std::size_t day_begin,
                                               std::size_t day_end, const PlannerContext& ctx,
                                               const mcts::SearchConfig& cfg) {
  if (cfg.mode != mcts::SearchMode::vanilla) throw std::invalid_argument("collect_prior_samples: needs vanilla search");
  if (ctx.model == nullptr || ctx.traces == nullptr) throw std::invalid_argument("collect_prior_samples: missing model");
  if (day_begin > day_end || day_end > log.size()) throw std::out_of_range("collect_prior_samples: bad day slice");
  std::vector<PriorSample> out;
  const std::size_t d = ctx.model->window();
  for (std::size_t i = day_begin; i < day_end; ++i) {
    if (i + 1 < d) continue;
    const StepRecord& rec = log[i];
    ThermalSimEnv env(*ctx.model, forecast_slice(*ctx.traces, rec.t, cfg.max_depth + 1), ctx.norm, ctx.weights,
                      cfg.band, ctx.traces->grid.step_h);
    const SimState root = env.make_root(history_window(log.subspan(0, i), rec.obs, d), rec.obs);
    const mcts::SearchResult r = mcts::search(env, root, cfg);
    out.push_back(PriorSample{prior_features(root, env.horizon()[0]), r.visit_dist});
  }
  return out;
}

nn::Network make_prior_network(std::uint64_t seed) {
  using nn::Activation;
  return nn::Network({{kPriorFeatures, 64, Activation::relu, {}},
                      {64, 32, Activation::relu, {}},
                      {32, kNumActions, Activation::softmax, {}}},
                     seed);
}

double train_prior(nn::Network& net, const std::vector<PriorSample>& data, const PriorTrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train_prior: dataset is empty");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_prior: batch size must be >= 1");
  nn::AdamState adam(net.num_params(), cfg.lr);
  std::vector<double> grads(net.num_params());
  nn::ForwardCache cache;
  std::mt19937_64 rng(cfg.seed ^ 0x7072696f72ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double last = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grads.begin(), grads.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const PriorSample& s = data[order[i]];
        net.forward(s.features, cache);
        nn::LossAndGrad lg = nn::cross_entropy_loss(cache.output(), s.target);
        total += lg.loss;
        for (double& g : lg.grad) g *= scale;
        net.backward(cache, lg.grad, grads, {});
      }
      nn::adam_step(net.params(), grads, adam);
    }
    last = total / static_cast<double>(data.size());
  }
  return last;
}

nn::Network train_prior(const std::vector<PriorSample>& data, const PriorTrainConfig& cfg, double* final_loss) {
  nn::Network net = make_prior_network(cfg.seed);
  const double loss = train_prior(net, data, cfg);
  if (final_loss != nullptr) *final_loss = loss;
  return net;
}

nlohmann::json tree_to_json(const mcts::Tree<SimState>& tree, std::size_t max_nodes) {
  nlohmann::json nodes = nlohmann::json::array();
  const std::size_t n = max_nodes == 0 ? tree.nodes.size() : std::min(max_nodes, tree.nodes.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = tree.nodes[i];
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : tree.edges_of(node)) {
      edges.push_back({{"action", e.action},
                       {"u", kActionValues[static_cast<std::size_t>(e.action)]},
                       {"N", e.visits},
                       {"Q", e.q},
                       {"P", e.prior},
                       {"reward", e.reward},
                       {"child", e.child}});
    }
    nodes.push_back({{"id", i},
                     {"depth", node.depth},
                     {"N", node.visits},
                     {"expanded", node.expanded},
                     {"terminal", node.terminal},
                     {"state",
                      {{"tau", node.state.tau},
                       {"T_r", node.state.T_r},
                       {"T_m", node.state.T_m},
                       {"u_prev", node.state.u_prev},
                       {"offset", node.state.offset}}},
                     {"edges", std::move(edges)}});
  }
  return {{"format", "pinnmcts.tree"}, {"version", 1}, {"total_nodes", tree.nodes.size()}, {"nodes", std::move(nodes)}};
}

}  // namespace pinnmcts::planner
