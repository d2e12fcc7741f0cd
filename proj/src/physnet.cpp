#include "pinnmcts/physnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pinnmcts::physnet {

namespace {

// theta = softplus(raw) kept inside (0, 1).
constexpr double kThetaRawMin = -30.0;
const double kThetaRawMax = std::log(std::exp(1.0) - 1.0) - 1e-9;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double inverse_softplus(double y) { return std::log(std::expm1(y)); }

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double temp_to_norm(double T) { return ranges::kRoomTemp.to_symmetric(T); }
double power_to_norm(double u) { return ranges::kPower.to_symmetric(u); }

// Maps raw predictor outputs to physical values. Returns whether the power output was clipped at the top.
Prediction decode_outputs(const double* y, bool* power_clipped = nullptr) {
  Prediction p;
  p.T_r = ranges::kRoomTemp.from_symmetric(y[0]);
  const double frac = y[1];
  const bool clipped = frac >= 1.0;
  p.u_phys = ranges::kPower.hi * (clipped ? 1.0 : frac);
  if (power_clipped != nullptr) *power_clipped = clipped;
  return p;
}

void fill_predictor_inputs(double* x, double z, const BuildingState& cur, const ExogenousStep& exo, double u) {
  const double angle = 2.0 * kPi * exo.tau / 24.0;
  x[0] = z;
  x[1] = temp_to_norm(cur.T_r);
  x[2] = power_to_norm(cur.u_phys_prev);
  x[3] = std::sin(angle);
  x[4] = std::cos(angle);
  x[5] = ranges::kOutdoorTemp.to_symmetric(exo.T_a);
  x[6] = u;
}

}  // namespace

std::string to_string(Mode m) { return m == Mode::physnet ? "physnet" : "blackbox"; }

Mode mode_from_string(const std::string& s) {
  if (s == "physnet") return Mode::physnet;
  if (s == "blackbox") return Mode::blackbox;
  throw std::invalid_argument("unknown forecaster mode '" + s + "'");
}

Window make_window(std::span<const BuildingState> states, std::size_t d) {
  if (states.size() != d) {
    throw std::invalid_argument("make_window: need exactly " + std::to_string(d) + " states, got " +
                                std::to_string(states.size()));
  }
  Window w(2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    w[2 * i] = temp_to_norm(states[i].T_r);
    w[2 * i + 1] = power_to_norm(states[i].u_phys_prev);
  }
  return w;
}

void push_window(Window& w, double T_r, double u_phys) {
  std::copy(w.begin() + 2, w.end(), w.begin());
  w[w.size() - 2] = temp_to_norm(T_r);
  w[w.size() - 1] = power_to_norm(u_phys);
}

Forecaster::Forecaster(const ForecasterConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.window < 1) throw std::invalid_argument("Forecaster: window must be >= 1");
  if (!(cfg.step_h > 0.0) || !(cfg.mass_time_constant_h > cfg.step_h)) {
    throw std::invalid_argument("Forecaster: need 0 < step < mass time constant");
  }
  using nn::Activation;
  std::vector<nn::LayerSpec> enc{{2 * cfg.window, kEncoderHidden, Activation::relu, {}},
                                 {kEncoderHidden, 1, Activation::tanh, {}}};
  std::vector<nn::LayerSpec> pred{{kPredictorInputs, kPredictorHidden, Activation::relu, {}},
                                  {kPredictorHidden, 2, Activation::mixed, {Activation::tanh, Activation::relu}}};
  const std::uint64_t s = splitmix(seed);
  encoder_ = nn::Network(std::move(enc), splitmix(s ^ 0x01));
  predictor_ = nn::Network(std::move(pred), splitmix(s ^ 0x02));
  set_theta(cfg.step_h / cfg.mass_time_constant_h);
}

double Forecaster::theta() const { return softplus(theta_raw_); }

void Forecaster::set_theta_raw(double raw) { theta_raw_ = std::clamp(raw, kThetaRawMin, kThetaRawMax); }

void Forecaster::set_theta(double theta) {
  if (!(theta > 0.0) || !(theta < 1.0)) throw std::invalid_argument("Forecaster: theta must lie in (0, 1)");
  set_theta_raw(inverse_softplus(theta));
}

double Forecaster::encode(std::span<const double> window, nn::Workspace& ws) const {
  if (window.size() != 2 * cfg_.window) {
    throw std::invalid_argument("Forecaster::encode: window has " + std::to_string(window.size() / 2) +
                                " entries, expected " + std::to_string(cfg_.window));
  }
  double z = 0.0;
  encoder_.infer(window, std::span<double>(&z, 1), ws);
  return z;
}

double Forecaster::encode(std::span<const double> window) const {
  nn::Workspace ws;
  return encode(window, ws);
}

std::vector<double> predictor_inputs(double z, const BuildingState& current, const ExogenousStep& exo, double u) {
  std::vector<double> x(kPredictorInputs);
  fill_predictor_inputs(x.data(), z, current, exo, u);
  return x;
}

Prediction Forecaster::predict(double z, const BuildingState& current, const ExogenousStep& exo, double u,
                               nn::Workspace& ws) const {
  std::array<double, kPredictorInputs> x{};
  fill_predictor_inputs(x.data(), z, current, exo, u);
  std::array<double, 2> y{};
  predictor_.infer(x, y, ws);
  return decode_outputs(y.data());
}

RolloutResult Forecaster::rollout(std::span<const double> window, const BuildingState& current,
                                  std::span<const ExogenousStep> exo, std::span<const double> actions) const {
  const std::size_t h = actions.size();
  if (h == 0) throw std::invalid_argument("rollout: horizon must be >= 1");
  if (exo.size() != h) throw std::invalid_argument("rollout: forecast and action lengths differ");
  nn::Workspace ws;
  Window w(window.begin(), window.end());
  BuildingState cur = current;
  RolloutResult out;
  double z = encode(w, ws);
  out.T_m.push_back(latent_to_mass_temp(z));
  for (std::size_t k = 0; k < h; ++k) {
    const Prediction p = predict(z, cur, exo[k], actions[k], ws);
    out.T_r.push_back(p.T_r);
    out.u_phys.push_back(p.u_phys);
    push_window(w, p.T_r, p.u_phys);
    cur = BuildingState{p.T_r, p.u_phys};
    z = encode(w, ws);
    out.T_m.push_back(latent_to_mass_temp(z));
  }
  return out;
}

nlohmann::json Forecaster::to_json() const {
  return {{"format", "pinnmcts.physnet"},
          {"version", 1},
          {"mode", to_string(cfg_.mode)},
          {"d", cfg_.window},
          {"step_h", cfg_.step_h},
          {"mass_time_constant_h", cfg_.mass_time_constant_h},
          {"physics_weight", cfg_.physics_weight},
          {"theta", theta()},
          {"theta_raw", theta_raw_},
          {"latent", {{"center", kLatentCenter}, {"scale", kLatentScale}}},
          {"ranges",
           {{"T_r", {ranges::kRoomTemp.lo, ranges::kRoomTemp.hi}},
            {"u_phys", {ranges::kPower.lo, ranges::kPower.hi}},
            {"T_a", {ranges::kOutdoorTemp.lo, ranges::kOutdoorTemp.hi}},
            {"lambda", {ranges::kPrice.lo, ranges::kPrice.hi}}}},
          {"encoder", encoder_.to_json()},
          {"predictor", predictor_.to_json()}};
}

Forecaster Forecaster::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "pinnmcts.physnet") throw std::invalid_argument("checkpoint: not a physnet model");
  if (j.value("version", 0) != 1) throw std::invalid_argument("checkpoint: unsupported physnet version");
  Forecaster f;
  f.cfg_.mode = mode_from_string(j.at("mode").get<std::string>());
  f.cfg_.window = j.at("d").get<std::size_t>();
  f.cfg_.step_h = j.at("step_h").get<double>();
  f.cfg_.mass_time_constant_h = j.value("mass_time_constant_h", 80.0);
  f.cfg_.physics_weight = j.value("physics_weight", 1.0);
  f.encoder_ = nn::Network::from_json(j.at("encoder"));
  f.predictor_ = nn::Network::from_json(j.at("predictor"));
  if (f.encoder_.input_dim() != 2 * f.cfg_.window || f.encoder_.output_dim() != 1 ||
      f.predictor_.input_dim() != kPredictorInputs || f.predictor_.output_dim() != 2) {
    throw std::invalid_argument("checkpoint: network shapes do not match the forecaster layout");
  }
  f.set_theta_raw(j.at("theta_raw").get<double>());
  return f;
}

std::vector<double> physics_targets(std::span<const double> T_m_hat, std::span<const double> T_r, double theta) {
  if (T_m_hat.size() != T_r.size()) throw std::invalid_argument("physics_targets: length mismatch");
  if (!(theta > 0.0) || !(theta < 1.0)) throw std::invalid_argument("physics_targets: theta must lie in (0, 1)");
  std::vector<double> out(T_m_hat.size());
  for (std::size_t k = 0; k < T_m_hat.size(); ++k) out[k] = T_m_hat[k] + theta * (T_r[k] - T_m_hat[k]);
  return out;
}

std::vector<ForecastSample> make_samples(std::span<const StepRecord> log, std::size_t d, std::size_t h,
                                         std::size_t stride, const std::vector<double>* T_a_source) {
  if (d < 1 || h < 1 || stride < 1) throw std::invalid_argument("make_samples: d, h and stride must be >= 1");
  if (log.size() < d + h) {
    throw std::invalid_argument("make_samples: log has " + std::to_string(log.size()) + " steps, need at least d + h = " +
                                std::to_string(d + h));
  }
  for (std::size_t i = 1; i < log.size(); ++i) {
    if (log[i].t != log[i - 1].t + 1) throw std::invalid_argument("make_samples: log is not contiguous");
  }
  std::vector<ForecastSample> out;
  std::vector<BuildingState> states(d);
  for (std::size_t i = d - 1; i + h <= log.size(); i += stride) {
    for (std::size_t j = 0; j < d; ++j) {
      const auto& o = log[i + 1 - d + j].obs;
      states[j] = BuildingState{o.T_r, o.u_phys_prev};
    }
    ForecastSample s;
    s.window = make_window(states, d);
    s.current = states.back();
    for (std::size_t k = 0; k < h; ++k) {
      const auto& rec = log[i + k];
      double T_a = rec.obs.T_a;
      if (T_a_source != nullptr) T_a = T_a_source->at(rec.t);
      s.exo.push_back(ExogenousStep{rec.obs.tau, T_a});
      s.actions.push_back(rec.u_applied);
      s.T_r_next.push_back(rec.T_r_next);
      s.u_phys_next.push_back(rec.u_phys);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void Gradients::zero() {
  std::fill(encoder.begin(), encoder.end(), 0.0);
  std::fill(predictor.begin(), predictor.end(), 0.0);
  theta_raw = 0.0;
}

namespace {

struct RolloutScratch {
  std::vector<nn::ForwardCache> enc;   // h + 1
  std::vector<nn::ForwardCache> pred;  // h
  std::vector<Window> windows;         // h + 1
  std::vector<double> z;               // h + 1
  std::vector<char> clipped;           // h
  std::vector<double> g_window, g_window_prev, g_pred_in;

  void resize(std::size_t h) {
    if (enc.size() < h + 1) enc.resize(h + 1);
    if (pred.size() < h) pred.resize(h);
    if (windows.size() < h + 1) windows.resize(h + 1);
    z.resize(h + 1);
    clipped.resize(h);
  }
};

}  // namespace

LossParts loss_and_gradient(const Forecaster& model, const ForecastSample& sample, Gradients* grads, double scale) {
  thread_local RolloutScratch sc;
  const std::size_t h = sample.actions.size();
  if (h == 0 || sample.exo.size() != h || sample.T_r_next.size() != h || sample.u_phys_next.size() != h) {
    throw std::invalid_argument("loss_and_gradient: inconsistent sample horizon");
  }
  const bool physics = model.mode() == Mode::physnet;
  const double w_phys = model.config().physics_weight;
  const double theta = model.theta();
  const auto& enc = model.encoder();
  const auto& pred = model.predictor();
  sc.resize(h);

  // Forward pass.
  sc.windows[0].assign(sample.window.begin(), sample.window.end());
  enc.forward(sc.windows[0], sc.enc[0]);
  sc.z[0] = sc.enc[0].output()[0];
  BuildingState cur = sample.current;
  std::array<double, kPredictorInputs> x{};
  LossParts loss;
  std::vector<double> err_T(h), err_u(h);
  for (std::size_t k = 0; k < h; ++k) {
    fill_predictor_inputs(x.data(), sc.z[k], cur, sample.exo[k], sample.actions[k]);
    pred.forward(x, sc.pred[k]);
    bool clipped = false;
    const Prediction p = decode_outputs(sc.pred[k].output().data(), &clipped);
    sc.clipped[k] = clipped ? 1 : 0;
    err_T[k] = temp_to_norm(p.T_r) - temp_to_norm(sample.T_r_next[k]);
    err_u[k] = power_to_norm(p.u_phys) - power_to_norm(sample.u_phys_next[k]);
    loss.regression += err_T[k] * err_T[k] + err_u[k] * err_u[k];
    sc.windows[k + 1] = sc.windows[k];
    push_window(sc.windows[k + 1], p.T_r, p.u_phys);
    cur = BuildingState{p.T_r, p.u_phys};
    enc.forward(sc.windows[k + 1], sc.enc[k + 1]);
    sc.z[k + 1] = sc.enc[k + 1].output()[0];
  }

  // Physics residuals r_k = z_k - target_k for k = 1..h, in latent units.
  std::vector<double> resid(h + 1, 0.0);
  std::vector<double> drive(h + 1, 0.0);  // d target_k / d theta
  if (physics) {
    for (std::size_t k = 1; k <= h; ++k) {
      const double T_r_prev = (k == 1) ? sample.current.T_r : sample.T_r_next[k - 2];
      const double Tm_prev = latent_to_mass_temp(sc.z[k - 1]);
      const double target = Tm_prev + theta * (T_r_prev - Tm_prev);
      resid[k] = sc.z[k] - mass_temp_to_latent(target);
      drive[k] = (T_r_prev - Tm_prev) / kLatentScale;
      loss.physics += resid[k] * resid[k];
    }
  }
  loss.total = loss.regression + (physics ? w_phys * loss.physics : 0.0);
  if (grads == nullptr) return loss;

  // Backward pass through the autoregressive chain.
  const std::size_t wn = sample.window.size();
  sc.g_window.assign(wn, 0.0);
  sc.g_window_prev.assign(wn, 0.0);
  sc.g_pred_in.assign(kPredictorInputs, 0.0);
  std::array<double, 2> g_out{};
  double g_z = 0.0;
  if (physics) {
    double g_theta = 0.0;
    for (std::size_t k = 1; k <= h; ++k) g_theta += -2.0 * w_phys * resid[k] * drive[k];
    grads->theta_raw += scale * g_theta * sigmoid(model.theta_raw());
    g_z = 2.0 * w_phys * resid[h];
  }
  // Encoder at the final window only feeds the physics term.
  if (g_z != 0.0) {
    const double gz = scale * g_z;
    enc.backward(sc.enc[h], std::span<const double>(&gz, 1), grads->encoder, sc.g_window);
  }
  double g_T_in = 0.0, g_u_in = 0.0;  // gradient w.r.t. predictor state inputs of the next step (normalised)
  for (std::size_t k = h; k-- > 0;) {
    // Gradient on the normalised outputs of step k.
    double g_Tn = sc.g_window[wn - 2] + g_T_in + scale * 2.0 * err_T[k];
    double g_un = sc.g_window[wn - 1] + g_u_in + scale * 2.0 * err_u[k];
    // T_norm = y0; u_norm = 2 min(y1, 1) - 1.
    g_out[0] = g_Tn;
    g_out[1] = sc.clipped[k] ? 0.0 : 2.0 * g_un;

    std::fill(sc.g_window_prev.begin(), sc.g_window_prev.end(), 0.0);
    for (std::size_t j = 0; j + 2 < wn; ++j) sc.g_window_prev[j + 2] = sc.g_window[j];

    pred.backward(sc.pred[k], g_out, grads->predictor, sc.g_pred_in);
    g_T_in = sc.g_pred_in[1];
    g_u_in = sc.g_pred_in[2];
    double gz = sc.g_pred_in[0];
    if (physics && k >= 1) gz += scale * 2.0 * w_phys * resid[k];
    if (gz != 0.0) {
      std::fill(sc.g_window.begin(), sc.g_window.end(), 0.0);
      enc.backward(sc.enc[k], std::span<const double>(&gz, 1), grads->encoder, sc.g_window);
      for (std::size_t j = 0; j < wn; ++j) sc.g_window[j] += sc.g_window_prev[j];
    } else {
      sc.g_window.swap(sc.g_window_prev);
    }
  }
  return loss;
}

TrainResult train(Forecaster& model, const std::vector<ForecastSample>& samples, const TrainConfig& cfg) {
  if (samples.empty()) throw std::invalid_argument("train: dataset is empty");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  const bool physics = model.mode() == Mode::physnet;
  nn::AdamState adam_enc(model.encoder().num_params(), cfg.lr);
  nn::AdamState adam_pred(model.predictor().num_params(), cfg.lr);
  nn::AdamState adam_theta(1, cfg.lr);
  Gradients g(model);
  std::mt19937_64 rng(splitmix(cfg.seed ^ 0x7472616eULL));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult res;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      if (cfg.max_updates != 0 && res.updates >= cfg.max_updates) break;
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      g.zero();
      for (std::size_t i = start; i < end; ++i) {
        epoch_loss += loss_and_gradient(model, samples[order[i]], &g, scale).total;
        ++seen;
      }
      nn::adam_step(model.encoder().params(), g.encoder, adam_enc);
      nn::adam_step(model.predictor().params(), g.predictor, adam_pred);
      if (physics) {
        double raw = model.theta_raw();
        nn::adam_step(std::span<double>(&raw, 1), std::span<const double>(&g.theta_raw, 1), adam_theta);
        model.set_theta_raw(raw);
      }
      ++res.updates;
    }
    if (seen > 0) res.epoch_loss.push_back(epoch_loss / static_cast<double>(seen));
    if (cfg.max_updates != 0 && res.updates >= cfg.max_updates) break;
  }
  return res;
}

Forecaster train_new(const ForecasterConfig& fcfg, const std::vector<ForecastSample>& samples, const TrainConfig& cfg,
                     TrainResult* result) {
  Forecaster model(fcfg, cfg.seed);
  TrainResult r = train(model, samples, cfg);
  if (result != nullptr) *result = std::move(r);
  return model;
}

ForecastErrors evaluate(const Forecaster& model, const std::vector<ForecastSample>& samples) {
  ForecastErrors e;
  double st = 0.0, su = 0.0;
  for (const auto& s : samples) {
    const RolloutResult r = model.rollout(s.window, s.current, s.exo, s.actions);
    for (std::size_t k = 0; k < s.actions.size(); ++k) {
      st += std::abs(r.T_r[k] - s.T_r_next[k]);
      su += std::abs(r.u_phys[k] - s.u_phys_next[k]);
      ++e.count;
    }
  }
  if (e.count > 0) {
    e.mae_temp = st / static_cast<double>(e.count);
    e.mae_energy = su / static_cast<double>(e.count);
  }
  return e;
}

}  // namespace pinnmcts::physnet
