#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catchnas/controller.hpp"
#include "catchnas/encoder.hpp"
#include "catchnas/evaluator.hpp"
#include "catchnas/oracles.hpp"
#include "catchnas/spaces.hpp"
#include "catchnas/trace.hpp"

namespace catchnas {

/// full: the complete agent. zero_z: z fixed at 0. random_z: z drawn from the
/// unit prior. no_evaluator: uniform choice among candidates. gt_evaluator:
/// candidates ranked by the oracle itself. sfs: full agent from untrained weights.
enum class AblationMode { full, zero_z, random_z, no_evaluator, gt_evaluator, sfs };

std::string to_string(AblationMode mode);
AblationMode parse_ablation_mode(const std::string& name);

struct AgentConfig {
  std::size_t latent_dim = kLatentDim;
  std::vector<std::size_t> encoder_hidden{64, 64};
  std::vector<std::size_t> controller_hidden{64, 64};
  std::vector<std::size_t> evaluator_hidden{64, 64};
  double encoder_lr = 0.01;
  double kl_weight = 0.1;
  std::size_t candidates = 25;         ///< M
  std::size_t contexts = 0;            ///< C; 0 uses the whole history
  std::size_t seed_networks = 1;
  std::size_t evaluator_updates = 10;  ///< PER minibatch steps per search epoch
  PerConfig per;
  EpsilonConfig epsilon;
  double meta_epsilon = 1.0;
  double adapt_epsilon = 0.5;
  PpoConfig meta_ppo;
  PpoConfig adapt_ppo;
};

/// Controller defaults for adaptation: entropy 0.03 / lr 1e-3 on cell-like
/// spaces, entropy 0.05 / lr 1e-4 on the residual macro space.
PpoConfig default_adapt_ppo(SpaceKind kind);
AgentConfig default_agent_config(SpaceKind kind);

struct RunConfig {
  AgentConfig agent;
  std::size_t meta_epochs = 25;
  std::size_t meta_search_epochs = 20;
  std::size_t adapt_search_epochs = 50;
  std::vector<std::size_t> meta_tasks;
  std::size_t target_task = 0;
  RewardSpec search_reward;
  RewardSpec report_reward;
  AblationMode mode = AblationMode::full;
  std::uint64_t seed = 0;
  std::optional<double> time_budget_seconds;  ///< adaptation wall-clock cap; breaks bit-determinism when set
};

/// The three learned components plus the schema they were built for.
struct AgentBundle {
  ActionSchema schema;
  ContextEncoder encoder;
  Controller controller;
  Evaluator evaluator;

  static AgentBundle init(const ActionSchema& schema, const AgentConfig& config, std::uint64_t seed);

  /// Layout: 8-byte magic "CNASCKPT", u32 version, u64 + schema JSON,
  /// u64 latent dim, then encoder, controller, evaluator MLP records.
  void save(const std::filesystem::path& path) const;
  static AgentBundle load(const std::filesystem::path& path);

  double parameter_distance(const AgentBundle& other) const;
};

struct HistoryEntry {
  Actions actions;
  std::vector<double> z;
  double reward = 0.0;
  double report = 0.0;
};

/// Append-only per-task log of evaluated networks.
class SearchHistory {
 public:
  void add(HistoryEntry entry);
  void clear() { entries_.clear(); best_ = 0; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<HistoryEntry>& entries() const { return entries_; }
  /// Highest reward; the earliest entry wins ties.
  const HistoryEntry& best_model() const;
  /// All entries when count is 0 or covers the history, else a uniform subset.
  std::vector<std::size_t> sample_contexts(std::size_t count, Rng& rng) const;

 private:
  std::vector<HistoryEntry> entries_;
  std::size_t best_ = 0;
};

struct JointReport {
  PpoReport controller;
  EvaluatorReport evaluator;
  double kl = 0.0;
  double total = 0.0;  ///< L_c + L_e + beta * KL
};

/// Value and encoder gradient of  L_c + L_e + beta * KL  at fixed noise, with
/// controller and evaluator held fixed. Steps and replay entries tagged `z_tag`
/// see the z produced by the encoder; the others keep their stored z.
JointReport joint_objective(const ContextEncoder& encoder, std::span<const ContextPair> contexts,
                            std::span<const double> noise, const Controller& controller,
                            std::span<const StepRecord> steps, std::span<const double> advantages,
                            const PpoConfig& ppo, const Evaluator& evaluator, const ReplayBuffer& buffer,
                            const PerBatch& batch, double beta, std::int64_t z_tag, std::span<double> encoder_grad);

struct EpochResult {
  Actions actions;
  double reward = 0.0;
  double report = 0.0;
  TraceRow row;
  LatentRow latent;
};

enum class Phase { meta, adapt };

/// Runs the per-task search loop (encode, sample, select, evaluate, record,
/// optimize) on a bundle it owns.
class Searcher {
 public:
  Searcher(AgentBundle bundle, const TaskOracle& oracle, RunConfig config, Phase phase);

  /// Resets history, epsilon and PPO memory (and replay, during adaptation),
  /// then evaluates the configured number of seed networks.
  void begin_task(std::size_t task);

  /// One search epoch. If the oracle throws, the exception propagates and the
  /// history, memories and parameters are unchanged.
  EpochResult search_epoch();

  const AgentBundle& bundle() const { return bundle_; }
  AgentBundle release() && { return std::move(bundle_); }
  const SearchHistory& history() const { return history_; }
  const ReplayBuffer& replay() const { return replay_; }
  const PpoTrainer& ppo() const { return ppo_; }
  const EpsilonSchedule& epsilon() const { return epsilon_; }
  std::size_t evaluations() const { return evaluations_; }
  std::size_t seed_evaluations() const { return seed_evaluations_; }
  std::size_t epoch() const { return epoch_; }
  const std::vector<double>& last_encoder_gradient() const { return last_encoder_grad_; }

 private:
  bool encoder_trained() const;
  HistoryEntry evaluate(const Actions& actions, std::vector<double> z);

  AgentBundle bundle_;
  const TaskOracle* oracle_;
  RunConfig config_;
  Phase phase_;
  Rng rng_;
  PpoTrainer ppo_;
  EvaluatorTrainer evaluator_trainer_;
  Adam encoder_adam_;
  ReplayBuffer replay_;
  SearchHistory history_;
  EpsilonSchedule epsilon_;
  std::size_t task_ = 0;
  std::size_t epoch_ = 0;
  std::int64_t tag_ = 0;
  std::size_t evaluations_ = 0;
  std::size_t seed_evaluations_ = 0;
  std::vector<double> last_encoder_grad_;
};

struct MetaResult {
  AgentBundle bundle;
  std::vector<TraceRow> trace;
  std::vector<LatentRow> latents;
  std::size_t evaluations = 0;
};

struct AdaptResult {
  Actions best_actions;
  double best_reward = 0.0;
  double best_report = 0.0;
  std::vector<TraceRow> trace;
  std::vector<LatentRow> latents;
  std::size_t evaluations = 0;
};

/// Meta-training: for each meta epoch draw a task from config.meta_tasks and
/// search it for meta_search_epochs; parameters carry across tasks.
MetaResult meta_train(const TaskOracle& oracle, const RunConfig& config);
MetaResult meta_train(AgentBundle initial, const TaskOracle& oracle, const RunConfig& config);

/// Adaptation on config.target_task from a checkpoint (ignored in sfs mode,
/// which starts from freshly initialized components).
AdaptResult adapt(const AgentBundle& checkpoint, const TaskOracle& oracle, const RunConfig& config);

}  // namespace catchnas
