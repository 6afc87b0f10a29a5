#include "catchnas/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace catchnas {

namespace {

/// Evaluates architectures and keeps the best-so-far trace.
class Recorder {
 public:
  explicit Recorder(const BaselineTask& task) : task_(task) {
    if (!task.oracle) throw std::invalid_argument("baseline task has no oracle");
    same_spec_ = task.search_reward.fidelity_epoch == task.report_reward.fidelity_epoch &&
                 task.search_reward.latency_target == task.report_reward.latency_target &&
                 task.search_reward.latency_exponent == task.report_reward.latency_exponent;
  }

  double evaluate(const Actions& actions) {
    const TaskOracle& oracle = *task_.oracle;
    const Evaluation eval = oracle.query(actions, task_.task, task_.search_reward);
    const double reward = agent_reward(oracle, eval, task_.search_reward);
    const double report =
        same_spec_ ? eval.performance : oracle.query(actions, task_.task, task_.report_reward).performance;
    if (result_.trace.empty() || reward > result_.best_reward) {
      result_.best_actions = actions;
      result_.best_reward = reward;
      result_.best_report = report;
    }
    ++result_.evaluations;
    TraceRow row;
    row.task = oracle.tasks().at(task_.task);
    row.epoch = result_.evaluations;
    row.arch = arch_key(oracle.schema(), actions);
    row.reward = reward;
    row.best_reward = result_.best_reward;
    row.best_report = result_.best_report;
    result_.trace.push_back(std::move(row));
    return reward;
  }

  BaselineResult take() { return std::move(result_); }

 private:
  const BaselineTask& task_;
  bool same_spec_ = true;
  BaselineResult result_;
};

}  // namespace

BaselineResult run_random(const BaselineTask& task, std::size_t budget, Rng& rng) {
  if (budget == 0) throw std::invalid_argument("budget must be at least 1");
  Recorder rec(task);
  const ActionSchema& schema = task.oracle->schema();
  for (std::size_t i = 0; i < budget; ++i) rec.evaluate(sample_valid_actions(schema, rng));
  return rec.take();
}

// ---------------------------------------------------------------------------

void EvoPopulation::insert(EvoMember member) {
  if (capacity_ == 0) throw std::invalid_argument("population capacity must be positive");
  if (members_.size() == capacity_) members_.pop_front();
  members_.push_back(std::move(member));
}

std::size_t EvoPopulation::tournament(std::size_t sample_size, Rng& rng) const {
  if (members_.empty()) throw std::logic_error("tournament on an empty population");
  const std::size_t s = std::clamp<std::size_t>(sample_size, 1, members_.size());
  std::vector<std::size_t> idx(members_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::size_t> picked;
  std::sample(idx.begin(), idx.end(), std::back_inserter(picked), s, rng);
  std::size_t best = picked.front();
  for (auto i : picked)
    if (members_[i].reward > members_[best].reward || (members_[i].reward == members_[best].reward && i < best))
      best = i;
  return best;
}

Actions mutate_one_slot(const ActionSchema& schema, std::span<const int> actions, Rng& rng) {
  Actions base(actions.begin(), actions.end());
  std::vector<std::pair<std::size_t, std::vector<int>>> choices;
  for (std::size_t l = 0; l < schema.size(); ++l) {
    std::vector<int> alternatives;
    Actions trial = base;
    for (int v = 0; v < static_cast<int>(schema.option_count(l)); ++v) {
      if (v == base[l]) continue;
      trial[l] = v;
      if (is_valid(schema, trial)) alternatives.push_back(v);
    }
    if (!alternatives.empty()) choices.emplace_back(l, std::move(alternatives));
  }
  if (choices.empty()) return base;
  std::uniform_int_distribution<std::size_t> pick_slot(0, choices.size() - 1);
  const auto& [slot, alternatives] = choices[pick_slot(rng)];
  std::uniform_int_distribution<std::size_t> pick_value(0, alternatives.size() - 1);
  base[slot] = alternatives[pick_value(rng)];
  return base;
}

BaselineResult run_rea(const BaselineTask& task, std::size_t budget, const ReaConfig& config, Rng& rng) {
  if (config.population == 0 || config.tournament == 0) throw std::invalid_argument("R-EA sizes must be positive");
  if (config.population > budget) throw std::invalid_argument("R-EA population exceeds the budget");
  Recorder rec(task);
  const ActionSchema& schema = task.oracle->schema();
  EvoPopulation pop(config.population);
  for (std::size_t i = 0; i < config.population; ++i) {
    Actions a = sample_valid_actions(schema, rng);
    const double r = rec.evaluate(a);
    pop.insert({std::move(a), r});
  }
  for (std::size_t i = config.population; i < budget; ++i) {
    const auto& parent = pop.members()[pop.tournament(config.tournament, rng)];
    Actions child = mutate_one_slot(schema, parent.actions, rng);
    const double r = rec.evaluate(child);
    pop.insert({std::move(child), r});
  }
  return rec.take();
}

// ---------------------------------------------------------------------------

ReinforcePolicy::ReinforcePolicy(const ActionSchema& schema)
    : schema_(&schema), logits_(schema.onehot_width(), 0.0) {}

std::vector<double> ReinforcePolicy::probabilities(std::span<const int> prefix) const {
  const std::size_t l = prefix.size();
  const auto mask = valid_action_mask(*schema_, prefix);
  return masked_softmax(std::span<const double>(logits_).subspan(schema_->offset(l), schema_->option_count(l)), mask);
}

Actions ReinforcePolicy::sample(Rng& rng) const {
  Actions actions;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t l = 0; l < schema_->size(); ++l) {
    const auto p = probabilities(actions);
    const double u = unif(rng);
    double acc = 0.0;
    int chosen = -1;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p[k] <= 0.0) continue;
      acc += p[k];
      chosen = static_cast<int>(k);
      if (u < acc) break;
    }
    actions.push_back(chosen);
  }
  return actions;
}

std::vector<double> ReinforcePolicy::loss_gradient(std::span<const int> actions, double advantage) const {
  std::vector<double> grad(logits_.size(), 0.0);
  if (advantage == 0.0) return grad;
  for (std::size_t l = 0; l < actions.size(); ++l) {
    const auto p = probabilities(actions.first(l));
    const std::size_t off = schema_->offset(l);
    // d(-A log p_a)/d logit_k = A (p_k - [k == a]); masked options stay at 0.
    for (std::size_t k = 0; k < p.size(); ++k)
      grad[off + k] = advantage * (p[k] - (static_cast<int>(k) == actions[l] ? 1.0 : 0.0));
  }
  return grad;
}

BaselineResult run_reinforce(const BaselineTask& task, std::size_t budget, const ReinforceConfig& config, Rng& rng,
                             ReinforcePolicy* final_policy) {
  if (budget == 0) throw std::invalid_argument("budget must be at least 1");
  Recorder rec(task);
  ReinforcePolicy policy(task.oracle->schema());
  Adam adam(AdamConfig{config.lr, 0.9, 0.999, 1e-8, 0, 1.0}, policy.logits().size());
  std::optional<double> baseline;
  for (std::size_t i = 0; i < budget; ++i) {
    const Actions a = policy.sample(rng);
    const double r = rec.evaluate(a);
    baseline = baseline ? config.baseline_decay * *baseline + (1.0 - config.baseline_decay) * r : r;
    const auto grad = policy.loss_gradient(a, r - *baseline);
    adam.step(policy.logits(), grad);
  }
  if (final_policy) *final_policy = policy;
  return rec.take();
}

}  // namespace catchnas
