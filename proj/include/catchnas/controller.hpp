#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "catchnas/common.hpp"
#include "catchnas/numkit.hpp"
#include "catchnas/spaces.hpp"

namespace catchnas {

struct PpoConfig {
  double clip = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  double value_coeff = 1.0;
  double entropy_coeff = 0.01;
  double lr = 1e-3;
  std::size_t scheduler_step = 20;
  double scheduler_gamma = 0.99;
  std::size_t memory_size = 200;
  std::size_t epochs = 4;              ///< passes over memory per update
  bool terminal_reward_only = false;   ///< default: every step receives the network's score

  void validate() const;
};

/// One decision of a sampled network, with everything PPO needs later.
struct StepRecord {
  std::vector<double> z;
  Actions prefix;
  int action = 0;
  ActionMask mask;
  double old_log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
  std::int64_t tag = -1;  ///< identifies the z sample, for routing dL/dz to the encoder
};

struct SampledNetwork {
  Actions actions;
  std::vector<StepRecord> steps;
  double log_prob = 0.0;
};

struct PolicyOutput {
  std::vector<double> probs;  ///< over the current slot's options; masked entries are 0
  double value = 0.0;
};

/// Sequential stochastic policy over an action schema. The MLP reads
/// [z, partial one-hot] and emits one logit block per slot (laid out like the
/// one-hot) plus a trailing state-value output.
class Controller {
 public:
  Controller() = default;
  Controller(ActionSchema schema, std::size_t latent_dim, std::vector<std::size_t> hidden, std::uint64_t seed);
  Controller(ActionSchema schema, Mlp net, std::size_t latent_dim);

  const ActionSchema& schema() const { return schema_; }
  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  std::size_t latent_dim() const { return latent_dim_; }

  std::vector<double> state_input(std::span<const double> z, std::span<const int> prefix) const;

  PolicyOutput policy_step(std::span<const double> z, std::span<const int> prefix, const ActionMask& mask) const;

  SampledNetwork sample(std::span<const double> z, Rng& rng) const;
  std::vector<SampledNetwork> sample_networks(std::span<const double> z, std::size_t count, Rng& rng) const;

 private:
  ActionSchema schema_;
  Mlp net_;
  std::size_t latent_dim_ = 0;
};

/// GAE computed backward in one pass. `values` has one entry per reward
/// (terminal bootstrap 0) or one extra bootstrap entry.
std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values, double gamma,
                                   double lambda);

/// Assigns rewards, advantages and returns to a completed trajectory.
void finish_trajectory(std::vector<StepRecord>& steps, double reward, const PpoConfig& config);

/// Batch advantages shifted and scaled to zero mean, unit variance.
std::vector<double> normalized_advantages(std::span<const StepRecord> steps);

struct PpoReport {
  double clip_loss = 0.0;   ///< negated clipped surrogate
  double value_loss = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  std::size_t steps = 0;
  bool updated = false;
};

/// Loss  -E[min(r A, clip(r) A)] + c_v E[(V - R)^2] - c_e E[H]  and its gradient.
/// Gradient accumulates into `param_grad` when non-empty; dL/dz of steps whose
/// tag equals `z_tag` accumulates into `dz` when non-empty.
PpoReport ppo_objective(const Controller& controller, std::span<const StepRecord> steps,
                        std::span<const double> advantages, const PpoConfig& config, std::span<double> param_grad,
                        std::int64_t z_tag = -1, std::span<double> dz = {});

/// Bounded on-policy memory plus the controller's optimizer.
class PpoTrainer {
 public:
  PpoTrainer() = default;
  PpoTrainer(PpoConfig config, std::size_t param_count);

  void add(std::vector<StepRecord> steps);
  void clear() { memory_.clear(); }
  const std::deque<StepRecord>& memory() const { return memory_; }
  const PpoConfig& config() const { return config_; }
  const Adam& optimizer() const { return adam_; }

  /// Runs config.epochs passes. The report and dL/dz come from the first pass,
  /// evaluated at the collected parameters. Empty memory is a no-op.
  PpoReport update(Controller& controller, std::int64_t z_tag = -1, std::span<double> dz = {});

 private:
  PpoConfig config_;
  Adam adam_;
  std::deque<StepRecord> memory_;
};

}  // namespace catchnas
