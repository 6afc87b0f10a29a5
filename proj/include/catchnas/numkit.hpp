#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "catchnas/common.hpp"

namespace catchnas {

enum class Activation : std::uint32_t { identity = 0, tanh = 1, relu = 2 };

/// Intermediate values recorded by a forward pass, consumed by Mlp::backward.
struct MlpCache {
  std::vector<std::vector<double>> inputs;  // input to each layer
  std::vector<std::vector<double>> outputs; // post-activation output of each layer
};

/// Fully connected network with a configurable hidden activation and a linear
/// output layer. Parameters live in one flat buffer, laid out layer by layer as
/// row-major weights (out x in) followed by biases.
class Mlp {
 public:
  Mlp() = default;

  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from `seed`.
  Mlp(std::vector<std::size_t> dims, Activation hidden, std::uint64_t seed);

  static Mlp zeros(std::vector<std::size_t> dims, Activation hidden);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t layer_count() const { return dims_.size() - 1; }
  Activation hidden_activation() const { return hidden_; }

  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::span<double> weights(std::size_t layer);
  std::span<double> biases(std::size_t layer);

  std::vector<double> forward(std::span<const double> input) const;
  std::vector<double> forward(std::span<const double> input, MlpCache& cache) const;

  /// Accumulates parameter gradients into `param_grad` (length param_count())
  /// and returns the gradient with respect to the input.
  std::vector<double> backward(const MlpCache& cache, std::span<const double> upstream,
                               std::span<double> param_grad) const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  void layout();

  std::vector<std::size_t> dims_;
  Activation hidden_ = Activation::tanh;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;  // start of each layer's weights
};

/// Expected parameter count: sum of d_i * d_{i+1} + d_{i+1}.
std::size_t mlp_param_count(std::span<const std::size_t> dims);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t scheduler_step = 20;
  double scheduler_gamma = 0.99;
};

/// Adam with a step-decay learning rate: every `scheduler_step` updates the
/// rate is multiplied by `scheduler_gamma`.
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig config, std::size_t param_count);

  /// Throws NumericError, leaving params and state untouched, if any gradient
  /// is non-finite.
  void step(std::span<double> params, std::span<const double> grads);

  double current_lr() const;
  std::size_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t steps_ = 0;
};

double softplus(double x);
std::vector<double> softplus(std::span<const double> x);
double sigmoid(double x);

/// Softmax restricted to allowed entries. Masked entries are exactly zero.
/// Throws std::invalid_argument when nothing is allowed.
std::vector<double> masked_softmax(std::span<const double> logits, std::span<const std::uint8_t> mask);

/// Checkpoint layout (little-endian):
///   u32 magic 'CMLP', u32 version, u32 activation, u32 n_dims, n_dims x u64 dims,
///   u64 param_count, param_count x f64 (row-major weights then biases per layer).
void write_mlp(std::ostream& os, const Mlp& net);
Mlp read_mlp(std::istream& is);

}  // namespace catchnas
