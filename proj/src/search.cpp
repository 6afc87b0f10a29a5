#include "catchnas/search.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <numeric>

namespace catchnas {

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'N', 'A', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

bool uses_encoder(AblationMode mode) { return mode != AblationMode::zero_z && mode != AblationMode::random_z; }
bool uses_evaluator(AblationMode mode) {
  return mode != AblationMode::no_evaluator && mode != AblationMode::gt_evaluator;
}

bool same_spec(const RewardSpec& a, const RewardSpec& b) {
  return a.fidelity_epoch == b.fidelity_epoch && a.latency_target == b.latency_target &&
         a.latency_exponent == b.latency_exponent;
}

}  // namespace

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::full: return "full";
    case AblationMode::zero_z: return "zero-z";
    case AblationMode::random_z: return "random-z";
    case AblationMode::no_evaluator: return "no-evaluator";
    case AblationMode::gt_evaluator: return "gt-evaluator";
    case AblationMode::sfs: return "sfs";
  }
  return "full";
}

AblationMode parse_ablation_mode(const std::string& name) {
  for (auto m : {AblationMode::full, AblationMode::zero_z, AblationMode::random_z, AblationMode::no_evaluator,
                 AblationMode::gt_evaluator, AblationMode::sfs})
    if (to_string(m) == name) return m;
  throw std::invalid_argument(fmt::format("unknown ablation mode '{}'", name));
}

PpoConfig default_adapt_ppo(SpaceKind kind) {
  PpoConfig c;
  if (kind == SpaceKind::macro) {
    c.entropy_coeff = 0.05;
    c.lr = 1e-4;
  } else {
    c.entropy_coeff = 0.03;
    c.lr = 1e-3;
  }
  return c;
}

AgentConfig default_agent_config(SpaceKind kind) {
  AgentConfig c;
  c.adapt_ppo = default_adapt_ppo(kind);
  return c;
}

// ---------------------------------------------------------------------------

AgentBundle AgentBundle::init(const ActionSchema& schema, const AgentConfig& config, std::uint64_t seed) {
  return AgentBundle{
      schema,
      ContextEncoder(schema.onehot_width(), config.encoder_hidden, mix64(seed ^ 0xE1), config.latent_dim),
      Controller(schema, config.latent_dim, config.controller_hidden, mix64(seed ^ 0xC2)),
      Evaluator(schema.onehot_width(), config.latent_dim, config.evaluator_hidden, mix64(seed ^ 0xE3)),
  };
}

void AgentBundle::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(fmt::format("cannot write checkpoint '{}'", path.string()));
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  binio::write<std::uint32_t>(out, kCheckpointVersion);
  const std::string schema_text = schema_to_json(schema).dump();
  binio::write<std::uint64_t>(out, schema_text.size());
  out.write(schema_text.data(), static_cast<std::streamsize>(schema_text.size()));
  binio::write<std::uint64_t>(out, encoder.latent_dim());
  write_mlp(out, encoder.net());
  write_mlp(out, controller.net());
  write_mlp(out, evaluator.net());
  if (!out) throw FormatError(fmt::format("failed writing checkpoint '{}'", path.string()));
}

AgentBundle AgentBundle::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open checkpoint '{}'", path.string()));
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw FormatError(fmt::format("'{}' is not an agent checkpoint", path.string()));
  const auto version = binio::read<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw FormatError(fmt::format("unsupported checkpoint version {}", version));
  const auto len = binio::read<std::uint64_t>(in);
  if (len > (1u << 20)) throw FormatError("checkpoint schema record is implausibly large");
  std::string schema_text(len, '\0');
  in.read(schema_text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("truncated checkpoint schema");
  ActionSchema schema = schema_from_json(nlohmann::json::parse(schema_text));
  const auto d = binio::read<std::uint64_t>(in);
  ContextEncoder enc(read_mlp(in), d);
  Controller ctl(schema, read_mlp(in), d);
  Evaluator ev(read_mlp(in), d);
  if (enc.net().input_dim() != schema.onehot_width() + 1 || ev.net().input_dim() != schema.onehot_width() + d)
    throw FormatError("checkpoint networks do not match the stored schema");
  return AgentBundle{std::move(schema), std::move(enc), std::move(ctl), std::move(ev)};
}

double AgentBundle::parameter_distance(const AgentBundle& other) const {
  auto sq = [](std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("bundles differ in shape");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  };
  return std::sqrt(sq(encoder.net().params(), other.encoder.net().params()) +
                   sq(controller.net().params(), other.controller.net().params()) +
                   sq(evaluator.net().params(), other.evaluator.net().params()));
}

// ---------------------------------------------------------------------------

void SearchHistory::add(HistoryEntry entry) {
  entries_.push_back(std::move(entry));
  if (entries_.back().reward > entries_[best_].reward) best_ = entries_.size() - 1;
}

const HistoryEntry& SearchHistory::best_model() const {
  if (entries_.empty()) throw std::logic_error("search history is empty");
  return entries_[best_];
}

std::vector<std::size_t> SearchHistory::sample_contexts(std::size_t count, Rng& rng) const {
  std::vector<std::size_t> idx(entries_.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (count == 0 || count >= idx.size()) return idx;
  std::vector<std::size_t> out;
  std::sample(idx.begin(), idx.end(), std::back_inserter(out), count, rng);
  return out;
}

// ---------------------------------------------------------------------------

JointReport joint_objective(const ContextEncoder& encoder, std::span<const ContextPair> contexts,
                            std::span<const double> noise, const Controller& controller,
                            std::span<const StepRecord> steps, std::span<const double> advantages,
                            const PpoConfig& ppo, const Evaluator& evaluator, const ReplayBuffer& buffer,
                            const PerBatch& batch, double beta, std::int64_t z_tag, std::span<double> encoder_grad) {
  const auto pass = encoder.encode(contexts, noise);
  const auto& z = pass.sample.z;

  std::vector<StepRecord> local_steps(steps.begin(), steps.end());
  for (auto& s : local_steps)
    if (s.tag == z_tag) s.z = z;
  ReplayBuffer local_buffer = buffer;
  for (std::size_t i = 0; i < local_buffer.size(); ++i)
    if (local_buffer[i].tag == z_tag) local_buffer.entry(i).z = z;

  std::vector<double> dz(z.size(), 0.0);
  JointReport report;
  report.controller = ppo_objective(controller, local_steps, advantages, ppo, {}, z_tag, dz);
  report.evaluator = EvaluatorTrainer::loss(evaluator, local_buffer, batch, {}, z_tag, dz);
  report.kl = pass.kl;
  report.total = report.controller.total + report.evaluator.loss + beta * report.kl;
  if (!encoder_grad.empty()) encoder.backward(pass, dz, beta, encoder_grad);
  return report;
}

// ---------------------------------------------------------------------------

Searcher::Searcher(AgentBundle bundle, const TaskOracle& oracle, RunConfig config, Phase phase)
    : bundle_(std::move(bundle)),
      oracle_(&oracle),
      config_(std::move(config)),
      phase_(phase),
      rng_(mix64(config_.seed ^ (phase == Phase::meta ? 0x3E7A : 0xADA9))),
      replay_(config_.agent.per.capacity),
      epsilon_(config_.agent.epsilon) {
  if (bundle_.schema.fingerprint() != oracle.schema().fingerprint())
    throw std::invalid_argument("checkpoint schema does not match the oracle's search space");
  if (config_.agent.candidates == 0) throw std::invalid_argument("candidate count M must be at least 1");
  const AgentConfig& a = config_.agent;
  ppo_ = PpoTrainer(phase == Phase::meta ? a.meta_ppo : a.adapt_ppo, bundle_.controller.net().param_count());
  evaluator_trainer_ = EvaluatorTrainer(a.per, bundle_.evaluator.net().param_count());
  encoder_adam_ = Adam(AdamConfig{a.encoder_lr, 0.9, 0.999, 1e-8, 0, 1.0}, bundle_.encoder.net().param_count());
  config_.search_reward.validate();
  config_.report_reward.validate();
}

bool Searcher::encoder_trained() const { return uses_encoder(config_.mode); }

HistoryEntry Searcher::evaluate(const Actions& actions, std::vector<double> z) {
  const Evaluation eval = oracle_->query(actions, task_, config_.search_reward);
  HistoryEntry entry;
  entry.actions = actions;
  entry.z = std::move(z);
  entry.reward = agent_reward(*oracle_, eval, config_.search_reward);
  entry.report = same_spec(config_.search_reward, config_.report_reward)
                     ? eval.performance
                     : oracle_->query(actions, task_, config_.report_reward).performance;
  return entry;
}

void Searcher::begin_task(std::size_t task) {
  if (task >= oracle_->tasks().size()) throw LookupError(fmt::format("unknown task #{}", task));
  task_ = task;
  epoch_ = 0;
  history_.clear();
  ppo_.clear();
  if (phase_ == Phase::adapt) replay_.clear();
  epsilon_.reset(phase_ == Phase::meta ? config_.agent.meta_epsilon : config_.agent.adapt_epsilon);
  for (std::size_t i = 0; i < std::max<std::size_t>(config_.agent.seed_networks, 1); ++i) {
    Actions seed = sample_valid_actions(bundle_.schema, rng_);
    history_.add(evaluate(seed, std::vector<double>(bundle_.encoder.latent_dim(), 0.0)));
    ++seed_evaluations_;
  }
}

EpochResult Searcher::search_epoch() {
  if (history_.empty()) throw std::logic_error("begin_task must run before search_epoch");
  const ActionSchema& schema = bundle_.schema;
  const AgentConfig& a = config_.agent;
  const std::size_t d = bundle_.encoder.latent_dim();

  std::optional<ContextEncoder::Pass> pass;
  std::vector<double> z(d, 0.0);
  if (config_.mode == AblationMode::random_z) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : z) v = normal(rng_);
  } else if (uses_encoder(config_.mode)) {
    const auto idx = history_.sample_contexts(a.contexts, rng_);
    std::vector<double> rewards;
    for (auto i : idx) rewards.push_back(history_.entries()[i].reward);
    const auto norm = normalize_rewards(rewards);
    std::vector<ContextPair> contexts;
    for (std::size_t j = 0; j < idx.size(); ++j)
      contexts.push_back(ContextPair{arch_onehot(schema, history_.entries()[idx[j]].actions), norm[j]});
    pass = bundle_.encoder.encode(contexts, rng_);
    z = pass->sample.z;
  }

  auto candidates = bundle_.controller.sample_networks(z, a.candidates, rng_);
  std::vector<std::vector<double>> onehots;
  for (auto& c : candidates) onehots.push_back(arch_onehot(schema, c.actions));

  const double eps = epsilon_.value();
  std::size_t choice = 0;
  if (config_.mode == AblationMode::no_evaluator) {
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    choice = pick(rng_);
  } else if (config_.mode == AblationMode::gt_evaluator) {
    std::vector<double> truth;
    for (auto& c : candidates)
      truth.push_back(agent_reward(*oracle_, oracle_->query(c.actions, task_, config_.search_reward), config_.search_reward));
    choice = choose_best(truth, 0.0, rng_);
  } else {
    std::vector<double> scores;
    for (auto& h : onehots) scores.push_back(bundle_.evaluator.score(h, z));
    choice = choose_best(scores, eps, rng_);
  }

  HistoryEntry entry = evaluate(candidates[choice].actions, z);

  // Commit: nothing above mutated the search state besides the rng.
  if (uses_evaluator(config_.mode)) epsilon_.on_selection();
  ++epoch_;
  ++evaluations_;
  const std::int64_t tag = ++tag_;
  std::vector<StepRecord> steps = std::move(candidates[choice].steps);
  finish_trajectory(steps, entry.reward, ppo_.config());
  for (auto& s : steps) s.tag = tag;
  ppo_.add(std::move(steps));
  if (uses_evaluator(config_.mode)) replay_.push(ReplayEntry{onehots[choice], z, entry.reward, 1.0, tag});
  EpochResult result;
  result.actions = entry.actions;
  result.reward = entry.reward;
  result.report = entry.report;
  history_.add(std::move(entry));

  // Controller, then evaluator, then encoder from the captured dL/dz.
  const bool train_encoder = encoder_trained() && pass.has_value();
  std::vector<double> dz(d, 0.0);
  const std::span<double> dz_sink = train_encoder ? std::span<double>(dz) : std::span<double>();
  PpoReport ppo_report;
  EvaluatorReport eval_report;
  try {
    ppo_report = ppo_.update(bundle_.controller, tag, dz_sink);
  } catch (const NumericError& e) {
    std::cerr << "warning: controller update skipped: " << e.what() << '\n';
  }
  if (uses_evaluator(config_.mode)) {
    for (std::size_t k = 0; k < a.evaluator_updates; ++k) {
      try {
        auto r = evaluator_trainer_.update(bundle_.evaluator, replay_, rng_, tag, k == 0 ? dz_sink : std::span<double>());
        if (k == 0) eval_report = r;
      } catch (const NumericError& e) {
        std::cerr << "warning: evaluator update skipped: " << e.what() << '\n';
      }
    }
  }
  const double kl = pass ? pass->kl : 0.0;
  if (train_encoder) {
    std::vector<double> grad(bundle_.encoder.net().param_count(), 0.0);
    bundle_.encoder.backward(*pass, dz, a.kl_weight, grad);
    try {
      encoder_adam_.step(bundle_.encoder.net().params(), grad);
    } catch (const NumericError& e) {
      std::cerr << "warning: encoder update skipped: " << e.what() << '\n';
    }
    last_encoder_grad_ = std::move(grad);
  } else {
    last_encoder_grad_.assign(bundle_.encoder.net().param_count(), 0.0);
  }

  const HistoryEntry& best = history_.best_model();
  result.row = TraceRow{oracle_->tasks()[task_],
                        epoch_,
                        arch_key(schema, result.actions),
                        result.reward,
                        best.reward,
                        best.report,
                        ppo_report.total,
                        eval_report.loss,
                        kl,
                        uses_evaluator(config_.mode) ? eps : 0.0};
  result.latent = LatentRow{oracle_->tasks()[task_], epoch_, pass ? pass->posterior.mean : z, z};
  return result;
}

// ---------------------------------------------------------------------------

MetaResult meta_train(const TaskOracle& oracle, const RunConfig& config) {
  return meta_train(AgentBundle::init(oracle.schema(), config.agent, config.seed), oracle, config);
}

MetaResult meta_train(AgentBundle initial, const TaskOracle& oracle, const RunConfig& config) {
  if (config.meta_tasks.empty()) throw std::invalid_argument("meta-training needs a non-empty task pool");
  Searcher searcher(std::move(initial), oracle, config, Phase::meta);
  Rng task_rng(mix64(config.seed ^ 0x7A5C));
  MetaResult result;
  for (std::size_t m = 0; m < config.meta_epochs; ++m) {
    searcher.begin_task(sample_meta_task(config.meta_tasks, task_rng));
    for (std::size_t n = 0; n < config.meta_search_epochs; ++n) {
      auto epoch = searcher.search_epoch();
      result.trace.push_back(std::move(epoch.row));
      result.latents.push_back(std::move(epoch.latent));
    }
  }
  result.evaluations = searcher.evaluations();
  result.bundle = std::move(searcher).release();
  return result;
}

AdaptResult adapt(const AgentBundle& checkpoint, const TaskOracle& oracle, const RunConfig& config) {
  if (checkpoint.schema.fingerprint() != oracle.schema().fingerprint())
    throw std::invalid_argument("checkpoint schema does not match the target task's search space");
  AgentBundle bundle = config.mode == AblationMode::sfs
                           ? AgentBundle::init(checkpoint.schema, config.agent, mix64(config.seed ^ 0x5F5))
                           : checkpoint;
  Searcher searcher(std::move(bundle), oracle, config, Phase::adapt);
  searcher.begin_task(config.target_task);
  AdaptResult result;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t n = 0; n < config.adapt_search_epochs; ++n) {
    if (config.time_budget_seconds) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      if (elapsed.count() >= *config.time_budget_seconds) break;
    }
    auto epoch = searcher.search_epoch();
    result.trace.push_back(std::move(epoch.row));
    result.latents.push_back(std::move(epoch.latent));
  }
  const auto& best = searcher.history().best_model();
  result.best_actions = best.actions;
  result.best_reward = best.reward;
  result.best_report = best.report;
  result.evaluations = searcher.evaluations();
  return result;
}

}  // namespace catchnas
