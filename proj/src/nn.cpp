#include "pinnmcts/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace pinnmcts::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
    case Activation::softmax:
      return "softmax";
    case Activation::mixed:
      return "mixed";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  if (s == "softmax") return Activation::softmax;
  if (s == "mixed") return Activation::mixed;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

namespace {

inline double apply_scalar(Activation a, double x) {
  switch (a) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::tanh:
      return std::tanh(x);
    default:
      return x;
  }
}

// Derivative expressed through the pre- and post-activation values.
inline double scalar_derivative(Activation a, double pre, double post) {
  switch (a) {
    case Activation::relu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh:
      return 1.0 - post * post;
    default:
      return 1.0;
  }
}

void activate(const LayerSpec& spec, const double* pre, double* post) {
  const std::size_t n = spec.out_dim;
  switch (spec.activation) {
    case Activation::softmax: {
      const double mx = *std::max_element(pre, pre + n);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        post[i] = std::exp(pre[i] - mx);
        sum += post[i];
      }
      for (std::size_t i = 0; i < n; ++i) post[i] /= sum;
      break;
    }
    case Activation::mixed:
      for (std::size_t i = 0; i < n; ++i) post[i] = apply_scalar(spec.per_output[i], pre[i]);
      break;
    default:
      for (std::size_t i = 0; i < n; ++i) post[i] = apply_scalar(spec.activation, pre[i]);
  }
}

void affine(const double* W, const double* b, const double* x, double* y, std::size_t in, std::size_t out) {
  for (std::size_t o = 0; o < out; ++o) {
    const double* row = W + o * in;
    double acc = b[o];
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

}  // namespace

void Network::check_layers() const {
  if (layers_.empty()) throw std::invalid_argument("Network: at least one layer required");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    if (s.in_dim < 1 || s.out_dim < 1) throw std::invalid_argument("Network: layer dims must be >= 1");
    if (l > 0 && s.in_dim != layers_[l - 1].out_dim) throw std::invalid_argument("Network: layer dims do not chain");
    const bool last = l + 1 == layers_.size();
    if ((s.activation == Activation::softmax || s.activation == Activation::mixed) && !last) {
      throw std::invalid_argument("Network: softmax/mixed activations are only allowed on the final layer");
    }
    if (s.activation == Activation::mixed) {
      if (s.per_output.size() != s.out_dim) throw std::invalid_argument("Network: mixed activation list size mismatch");
      for (auto a : s.per_output) {
        if (a == Activation::softmax || a == Activation::mixed) {
          throw std::invalid_argument("Network: mixed activation entries must be relu, tanh or identity");
        }
      }
    }
  }
}

Network::Network(std::vector<LayerSpec> layers, std::uint64_t seed) : layers_(std::move(layers)) {
  check_layers();
  std::size_t total = 0;
  for (const auto& s : layers_) {
    offsets_.push_back(total);
    total += s.in_dim * s.out_dim + s.out_dim;
  }
  params_.assign(total, 0.0);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t k = 0; k < s.in_dim * s.out_dim; ++k) params_[offsets_[l] + k] = dist(rng);
  }
}

Network::Network(std::vector<LayerSpec> layers, std::vector<double> params) : layers_(std::move(layers)) {
  check_layers();
  std::size_t total = 0;
  for (const auto& s : layers_) {
    offsets_.push_back(total);
    total += s.in_dim * s.out_dim + s.out_dim;
  }
  if (params.size() != total) throw std::invalid_argument("Network: parameter count does not match layer chain");
  for (double p : params) {
    if (!std::isfinite(p)) throw std::invalid_argument("Network: non-finite parameter");
  }
  params_ = std::move(params);
}

void Network::forward(std::span<const double> input, ForwardCache& cache) const {
  if (input.size() != input_dim()) {
    throw std::invalid_argument("Network::forward: input has " + std::to_string(input.size()) + " entries, expected " +
                                std::to_string(input_dim()));
  }
  const std::size_t L = layers_.size();
  cache.pre.resize(L);
  cache.post.resize(L + 1);
  cache.post[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < L; ++l) {
    const auto& s = layers_[l];
    cache.pre[l].resize(s.out_dim);
    cache.post[l + 1].resize(s.out_dim);
    affine(params_.data() + weight_offset(l), params_.data() + bias_offset(l), cache.post[l].data(),
           cache.pre[l].data(), s.in_dim, s.out_dim);
    activate(s, cache.pre[l].data(), cache.post[l + 1].data());
  }
  cache.valid = true;
}

void Network::infer(std::span<const double> input, std::span<double> output, Workspace& ws) const {
  if (input.size() != input_dim() || output.size() != output_dim()) {
    throw std::invalid_argument("Network::infer: shape mismatch");
  }
  std::size_t width = input.size();
  for (const auto& s : layers_) width = std::max(width, s.out_dim);
  if (ws.a.size() < width) ws.a.resize(width);
  if (ws.b.size() < width) ws.b.resize(width);
  std::copy(input.begin(), input.end(), ws.a.begin());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    affine(params_.data() + weight_offset(l), params_.data() + bias_offset(l), ws.a.data(), ws.b.data(), s.in_dim,
           s.out_dim);
    activate(s, ws.b.data(), ws.a.data());
  }
  std::copy(ws.a.begin(), ws.a.begin() + static_cast<std::ptrdiff_t>(output.size()), output.begin());
}

void Network::backward(const ForwardCache& cache, std::span<const double> grad_output, std::span<double> grad_params,
                       std::span<double> grad_input) const {
  const std::size_t L = layers_.size();
  if (!cache.valid || cache.pre.size() != L || cache.post.size() != L + 1) {
    throw std::invalid_argument("Network::backward: missing or mismatched forward cache");
  }
  if (grad_output.size() != output_dim()) throw std::invalid_argument("Network::backward: bad upstream gradient size");
  if (grad_params.size() != params_.size()) throw std::invalid_argument("Network::backward: bad gradient buffer size");
  if (!grad_input.empty() && grad_input.size() != input_dim()) {
    throw std::invalid_argument("Network::backward: bad input gradient size");
  }

  std::vector<double> upstream(grad_output.begin(), grad_output.end());
  std::vector<double> delta;
  for (std::size_t l = L; l-- > 0;) {
    const auto& s = layers_[l];
    const auto& pre = cache.pre[l];
    const auto& post = cache.post[l + 1];
    const auto& in = cache.post[l];
    delta.assign(s.out_dim, 0.0);
    if (s.activation == Activation::softmax) {
      double dot = 0.0;
      for (std::size_t i = 0; i < s.out_dim; ++i) dot += upstream[i] * post[i];
      for (std::size_t i = 0; i < s.out_dim; ++i) delta[i] = post[i] * (upstream[i] - dot);
    } else if (s.activation == Activation::mixed) {
      for (std::size_t i = 0; i < s.out_dim; ++i) delta[i] = upstream[i] * scalar_derivative(s.per_output[i], pre[i], post[i]);
    } else {
      for (std::size_t i = 0; i < s.out_dim; ++i) delta[i] = upstream[i] * scalar_derivative(s.activation, pre[i], post[i]);
    }

    const double* W = params_.data() + weight_offset(l);
    double* gW = grad_params.data() + weight_offset(l);
    double* gb = grad_params.data() + bias_offset(l);
    for (std::size_t o = 0; o < s.out_dim; ++o) {
      const double d = delta[o];
      gb[o] += d;
      if (d == 0.0) continue;
      double* grow = gW + o * s.in_dim;
      for (std::size_t i = 0; i < s.in_dim; ++i) grow[i] += d * in[i];
    }
    if (l == 0 && grad_input.empty()) break;
    upstream.assign(s.in_dim, 0.0);
    for (std::size_t o = 0; o < s.out_dim; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = W + o * s.in_dim;
      for (std::size_t i = 0; i < s.in_dim; ++i) upstream[i] += d * row[i];
    }
  }
  if (!grad_input.empty()) std::copy(upstream.begin(), upstream.end(), grad_input.begin());
}

nlohmann::json Network::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& s : layers_) {
    nlohmann::json l{{"in", s.in_dim}, {"out", s.out_dim}, {"activation", to_string(s.activation)}};
    if (s.activation == Activation::mixed) {
      nlohmann::json per = nlohmann::json::array();
      for (auto a : s.per_output) per.push_back(to_string(a));
      l["per_output"] = per;
    }
    layers.push_back(l);
  }
  return {{"format", "pinnmcts.ffnn"}, {"version", 1}, {"layers", layers}, {"params", params_}};
}

Network Network::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "pinnmcts.ffnn") throw std::invalid_argument("checkpoint: unknown format");
  if (j.value("version", 0) != 1) throw std::invalid_argument("checkpoint: unsupported version");
  std::vector<LayerSpec> layers;
  for (const auto& l : j.at("layers")) {
    LayerSpec s;
    s.in_dim = l.at("in").get<std::size_t>();
    s.out_dim = l.at("out").get<std::size_t>();
    s.activation = activation_from_string(l.at("activation").get<std::string>());
    if (l.contains("per_output")) {
      for (const auto& a : l.at("per_output")) s.per_output.push_back(activation_from_string(a.get<std::string>()));
    }
    layers.push_back(std::move(s));
  }
  return Network(std::move(layers), j.at("params").get<std::vector<double>>());
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st) {
  if (grads.size() != params.size() || st.m.size() != params.size() || st.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  st.step += 1;
  const double t = static_cast<double>(st.step);
  const double bc1 = 1.0 - std::pow(st.beta1, t);
  const double bc2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    const double m_hat = st.m[i] / bc1;
    const double v_hat = st.v[i] / bc2;
    params[i] -= st.lr * m_hat / (std::sqrt(v_hat) + st.eps);
  }
}

LossAndGrad cross_entropy_loss(std::span<const double> prediction, std::span<const double> target, double eps_floor) {
  if (prediction.size() != target.size()) throw std::invalid_argument("cross_entropy_loss: size mismatch");
  double sp = 0.0, st = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    if (prediction[i] < 0.0 || target[i] < 0.0) throw std::invalid_argument("cross_entropy_loss: negative entry");
    sp += prediction[i];
    st += target[i];
  }
  if (std::abs(sp - 1.0) > 1e-6 || std::abs(st - 1.0) > 1e-6) {
    throw std::invalid_argument("cross_entropy_loss: inputs must sum to 1");
  }
  LossAndGrad out;
  out.grad.resize(prediction.size());
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double p = prediction[i] + eps_floor;
    out.loss -= target[i] * std::log(p);
    out.grad[i] = -target[i] / p;
  }
  return out;
}

}  // namespace pinnmcts::nn
