#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "catchnas/common.hpp"
#include "catchnas/numkit.hpp"
#include "catchnas/oracles.hpp"
#include "catchnas/spaces.hpp"
#include "catchnas/trace.hpp"

namespace catchnas {

/// Where a baseline draws its rewards from.
struct BaselineTask {
  const TaskOracle* oracle = nullptr;
  std::size_t task = 0;
  RewardSpec search_reward;
  RewardSpec report_reward;
};

struct BaselineResult {
  Actions best_actions;
  double best_reward = 0.0;
  double best_report = 0.0;
  std::vector<TraceRow> trace;
  std::size_t evaluations = 0;
};

/// `budget` i.i.d. uniform valid architectures.
BaselineResult run_random(const BaselineTask& task, std::size_t budget, Rng& rng);

struct ReaConfig {
  std::size_t population = 10;
  std::size_t tournament = 3;
};

struct EvoMember {
  Actions actions;
  double reward = 0.0;
};

/// Aging population: inserting into a full population evicts the oldest member.
class EvoPopulation {
 public:
  explicit EvoPopulation(std::size_t capacity) : capacity_(capacity) {}

  void insert(EvoMember member);
  std::size_t size() const { return members_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<EvoMember>& members() const { return members_; }
  /// Best of `sample_size` members drawn without replacement; oldest wins ties.
  std::size_t tournament(std::size_t sample_size, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<EvoMember> members_;
};

/// Resamples one slot to a different value keeping the architecture valid.
/// The slot is uniform among those that admit a valid alternative; returns the
/// input unchanged only if no slot does.
Actions mutate_one_slot(const ActionSchema& schema, std::span<const int> actions, Rng& rng);

BaselineResult run_rea(const BaselineTask& task, std::size_t budget, const ReaConfig& config, Rng& rng);

struct ReinforceConfig {
  double lr = 0.01;
  double baseline_decay = 0.9;  ///< b <- decay * b + (1 - decay) * R; first reward initializes b
};

/// Independent logits per slot laid out like the one-hot encoding. Sampling
/// respects the validity mask of the current prefix.
class ReinforcePolicy {
 public:
  explicit ReinforcePolicy(const ActionSchema& schema);

  const ActionSchema& schema() const { return *schema_; }
  std::span<double> logits() { return logits_; }
  std::span<const double> logits() const { return logits_; }

  std::vector<double> probabilities(std::span<const int> prefix) const;
  Actions sample(Rng& rng) const;
  /// Gradient of  -advantage * log pi(actions)  with respect to the logits.
  std::vector<double> loss_gradient(std::span<const int> actions, double advantage) const;

 private:
  const ActionSchema* schema_;
  std::vector<double> logits_;
};

/// `final_policy`, when given, receives the policy after the last update.
BaselineResult run_reinforce(const BaselineTask& task, std::size_t budget, const ReinforceConfig& config, Rng& rng,
                             ReinforcePolicy* final_policy = nullptr);

}  // namespace catchnas
