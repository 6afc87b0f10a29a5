#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <span>
#include <vector>

#include "catchnas/common.hpp"
#include "catchnas/numkit.hpp"

namespace catchnas {

struct PerConfig {
  double alpha = 0.5;
  double beta = 0.575;
  double beta_step = 0.01;
  std::size_t capacity = 512;
  double batch_fraction = 0.8;
  double lr = 1e-4;
  double priority_floor = 1e-6;

  void validate() const;
};

struct EpsilonConfig {
  double initial = 0.5;
  double decay = 0.025;
  std::size_t decay_every = 20;
};

/// Exploration rate that drops by `decay` after every `decay_every` selections.
class EpsilonSchedule {
 public:
  EpsilonSchedule() = default;
  explicit EpsilonSchedule(EpsilonConfig config) : config_(config), value_(config.initial) {}

  double value() const { return value_; }
  std::size_t selections() const { return selections_; }
  void reset() { reset(config_.initial); }
  void reset(double initial);
  void on_selection();

 private:
  EpsilonConfig config_;
  double value_ = 0.5;
  std::size_t selections_ = 0;
};

struct ReplayEntry {
  std::vector<double> arch_onehot;
  std::vector<double> z;
  double reward = 0.0;
  double priority = 1.0;
  std::int64_t tag = -1;
};

/// FIFO-bounded replay memory. New entries take the current maximum priority.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 512) : capacity_(capacity) {}

  void push(ReplayEntry entry);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const ReplayEntry& operator[](std::size_t i) const { return entries_[i]; }
  ReplayEntry& entry(std::size_t i) { return entries_.at(i); }
  void set_priority(std::size_t i, double priority);
  double max_priority() const;

  /// Versioned binary snapshot: u32 magic 'CRPL', u32 version, u64 capacity,
  /// u64 count, then per entry u64 onehot len, f64s, u64 z len, f64s,
  /// f64 reward, f64 priority, i64 tag.
  void write(std::ostream& os) const;
  static ReplayBuffer read(std::istream& is);

 private:
  std::size_t capacity_;
  std::deque<ReplayEntry> entries_;
};

struct PerBatch {
  std::vector<std::size_t> indices;
  std::vector<double> weights;  ///< importance weights, normalized by their max
};

/// Draws `batch_size` distinct entries, each draw proportional to p^alpha among
/// the entries not yet drawn. Weights are (N P(i))^-beta / max.
PerBatch per_sample(const ReplayBuffer& buffer, std::size_t batch_size, double alpha, double beta, Rng& rng);
/// Batch of ceil(fraction * N) entries (at least one).
PerBatch per_sample_fraction(const ReplayBuffer& buffer, double fraction, double alpha, double beta, Rng& rng);

double huber_loss(double diff);
double huber_grad(double diff);

/// Performance predictor f(m, z); reads [arch one-hot, z] and emits one score.
class Evaluator {
 public:
  Evaluator() = default;
  Evaluator(std::size_t onehot_width, std::size_t latent_dim, std::vector<std::size_t> hidden, std::uint64_t seed);
  Evaluator(Mlp net, std::size_t latent_dim);

  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  std::size_t latent_dim() const { return latent_dim_; }

  double score(std::span<const double> arch_onehot, std::span<const double> z) const;

 private:
  Mlp net_;
  std::size_t latent_dim_ = 0;
};

/// With probability 1 - epsilon the highest score (lowest index on ties),
/// otherwise a uniformly random candidate.
std::size_t choose_best(std::span<const double> scores, double epsilon, Rng& rng);
std::size_t choose_best(const Evaluator& evaluator, std::span<const std::vector<double>> candidates,
                        std::span<const double> z, double epsilon, Rng& rng);

struct EvaluatorReport {
  double loss = 0.0;
  std::size_t batch = 0;
  bool updated = false;
};

/// PER state (annealed beta) plus the evaluator's optimizer.
class EvaluatorTrainer {
 public:
  EvaluatorTrainer() = default;
  EvaluatorTrainer(PerConfig config, std::size_t param_count);

  double beta() const { return beta_; }
  const PerConfig& config() const { return config_; }

  /// Importance-weighted mean Huber loss over `batch` and its gradient.
  /// dL/dz for entries tagged `z_tag` accumulates into `dz` when non-empty.
  static EvaluatorReport loss(const Evaluator& evaluator, const ReplayBuffer& buffer, const PerBatch& batch,
                              std::span<double> param_grad, std::int64_t z_tag = -1, std::span<double> dz = {},
                              std::vector<double>* errors = nullptr);

  /// One Adam step on a batch; refreshes sampled priorities to |error| + floor and anneals beta.
  EvaluatorReport update(Evaluator& evaluator, ReplayBuffer& buffer, const PerBatch& batch, std::int64_t z_tag = -1,
                         std::span<double> dz = {});
  /// Samples a batch with the current beta and updates.
  EvaluatorReport update(Evaluator& evaluator, ReplayBuffer& buffer, Rng& rng, std::int64_t z_tag = -1,
                         std::span<double> dz = {});

 private:
  PerConfig config_;
  Adam adam_;
  double beta_ = 0.575;
};

}  // namespace catchnas
