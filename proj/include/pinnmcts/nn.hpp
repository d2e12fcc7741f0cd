#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pinnmcts::nn {

enum class Activation { relu, tanh, identity, softmax, mixed };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  Activation activation = Activation::identity;
  // Only for Activation::mixed: one of relu/tanh/identity per output unit.
  std::vector<Activation> per_output{};
};

// Per-layer activations recorded by Network::forward for use in backward.
struct ForwardCache {
  std::vector<std::vector<double>> pre;   // pre-activation of each layer
  std::vector<std::vector<double>> post;  // post[0] is the input, post[l + 1] the output of layer l
  bool valid = false;

  std::span<const double> output() const { return post.back(); }
};

// Scratch buffers for allocation-free inference; one per concurrent caller.
struct Workspace {
  std::vector<double> a;
  std::vector<double> b;
};

// Dense feed-forward chain. Parameters live in one flat array, layer by layer:
// W (out_dim x in_dim, row-major) followed by b (out_dim).
class Network {
 public:
  Network() = default;
  // Glorot-uniform weights, zero biases.
  Network(std::vector<LayerSpec> layers, std::uint64_t seed);
  // Adopts existing parameters; throws if the size does not match the layer chain.
  Network(std::vector<LayerSpec> layers, std::vector<double> params);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::size_t input_dim() const { return layers_.front().in_dim; }
  std::size_t output_dim() const { return layers_.back().out_dim; }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + layers_[layer].in_dim * layers_[layer].out_dim;
  }

  void forward(std::span<const double> input, ForwardCache& cache) const;
  void infer(std::span<const double> input, std::span<double> output, Workspace& ws) const;

  // Accumulates dL/dparams into grad_params (must be num_params long) and writes dL/dinput into
  // grad_input when it is non-empty.
  void backward(const ForwardCache& cache, std::span<const double> grad_output, std::span<double> grad_params,
                std::span<double> grad_input) const;

  nlohmann::json to_json() const;
  static Network from_json(const nlohmann::json& j);

 private:
  void check_layers() const;

  std::vector<LayerSpec> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  explicit AdamState(std::size_t n, double learning_rate = 1e-3) : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam update in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // with respect to the prediction
};

// -sum target * log(prediction + eps_floor); both arguments are probability vectors.
LossAndGrad cross_entropy_loss(std::span<const double> prediction, std::span<const double> target,
                               double eps_floor = 1e-12);

}  // namespace pinnmcts::nn
