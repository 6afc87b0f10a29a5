#include "catchnas/config.hpp"

#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <set>

namespace catchnas {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Reads optional keys of one object and rejects the ones nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", where_));
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(fmt::format("{}: unknown key '{}'", where_, key));
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("{}.{}: {}", where_, key, e.what()));
    }
  }
  template <class T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }
  bool has(const char* key) const { return j_.contains(key); }
  Reader sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Reader(j_.contains(key) ? j_.at(key) : empty, where_ + "." + key);
  }
  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read(Reader r, PpoConfig& c) {
  r.get("clip", c.clip);
  r.get("gamma", c.gamma);
  r.get("lambda", c.lambda);
  r.get("value_coeff", c.value_coeff);
  r.get("entropy_coeff", c.entropy_coeff);
  r.get("lr", c.lr);
  r.get("scheduler_step", c.scheduler_step);
  r.get("scheduler_gamma", c.scheduler_gamma);
  r.get("memory_size", c.memory_size);
  r.get("epochs", c.epochs);
  r.get("terminal_reward_only", c.terminal_reward_only);
}

json write(const PpoConfig& c) {
  return {{"clip", c.clip},
          {"gamma", c.gamma},
          {"lambda", c.lambda},
          {"value_coeff", c.value_coeff},
          {"entropy_coeff", c.entropy_coeff},
          {"lr", c.lr},
          {"scheduler_step", c.scheduler_step},
          {"scheduler_gamma", c.scheduler_gamma},
          {"memory_size", c.memory_size},
          {"epochs", c.epochs},
          {"terminal_reward_only", c.terminal_reward_only}};
}

void read(Reader r, RewardSpec& s) {
  r.get("fidelity_epoch", s.fidelity_epoch);
  r.get("latency_target", s.latency_target);
  r.get("latency_exponent", s.latency_exponent);
}

json write(const RewardSpec& s) {
  json j = {{"latency_exponent", s.latency_exponent}};
  j["fidelity_epoch"] = s.fidelity_epoch ? json(*s.fidelity_epoch) : json(nullptr);
  j["latency_target"] = s.latency_target ? json(*s.latency_target) : json(nullptr);
  return j;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Reader root(j, "config");
  {
    Reader o = root.sub("oracle");
    o.get("kind", c.oracle.kind);
    if (o.has("space")) c.oracle.space = o.raw("space");
    o.get("bench_path", c.oracle.bench_path);
    o.get("planted_optimum", c.oracle.planted_optimum);
    Reader s = o.sub("synthetic");
    s.get("family_seed", c.oracle.synthetic.family_seed);
    s.get("task_count", c.oracle.synthetic.task_count);
    s.get("group_spread", c.oracle.synthetic.group_spread);
    s.get("task_spread", c.oracle.synthetic.task_spread);
    s.get("interaction", c.oracle.synthetic.interaction);
    s.get("noise_scale", c.oracle.synthetic.noise_scale);
    s.get("max_epoch", c.oracle.synthetic.max_epoch);
    s.get("latency_base", c.oracle.synthetic.latency_base);
  }
  const SpaceKind kind = c.oracle.kind == "tabular" ? SpaceKind::cell : schema_from_json(c.oracle.space).kind();
  c.run.agent = default_agent_config(kind);
  {
    Reader a = root.sub("agent");
    AgentConfig& ag = c.run.agent;
    a.get("latent_dim", ag.latent_dim);
    a.get("encoder_hidden", ag.encoder_hidden);
    a.get("controller_hidden", ag.controller_hidden);
    a.get("evaluator_hidden", ag.evaluator_hidden);
    a.get("encoder_lr", ag.encoder_lr);
    a.get("kl_weight", ag.kl_weight);
    a.get("candidates", ag.candidates);
    a.get("contexts", ag.contexts);
    a.get("seed_networks", ag.seed_networks);
    a.get("evaluator_updates", ag.evaluator_updates);
    a.get("meta_epsilon", ag.meta_epsilon);
    a.get("adapt_epsilon", ag.adapt_epsilon);
    Reader per = a.sub("per");
    per.get("alpha", ag.per.alpha);
    per.get("beta", ag.per.beta);
    per.get("beta_step", ag.per.beta_step);
    per.get("capacity", ag.per.capacity);
    per.get("batch_fraction", ag.per.batch_fraction);
    per.get("lr", ag.per.lr);
    per.get("priority_floor", ag.per.priority_floor);
    Reader eps = a.sub("epsilon");
    eps.get("decay", ag.epsilon.decay);
    eps.get("decay_every", ag.epsilon.decay_every);
    read(a.sub("meta_ppo"), ag.meta_ppo);
    read(a.sub("adapt_ppo"), ag.adapt_ppo);
  }
  {
    Reader r = root.sub("run");
    r.get("meta_epochs", c.run.meta_epochs);
    r.get("meta_search_epochs", c.run.meta_search_epochs);
    r.get("adapt_search_epochs", c.run.adapt_search_epochs);
    r.get("meta_tasks", c.meta_tasks);
    r.get("target_task", c.target_task);
    std::string mode = to_string(c.run.mode);
    r.get("mode", mode);
    c.run.mode = parse_ablation_mode(mode);
    r.get("seed", c.run.seed);
    r.get("time_budget_seconds", c.run.time_budget_seconds);
    read(r.sub("search_reward"), c.run.search_reward);
    read(r.sub("report_reward"), c.run.report_reward);
  }
  {
    Reader b = root.sub("baselines");
    Reader rea = b.sub("rea");
    rea.get("population", c.rea.population);
    rea.get("tournament", c.rea.tournament);
    Reader rf = b.sub("reinforce");
    rf.get("lr", c.reinforce.lr);
    rf.get("baseline_decay", c.reinforce.baseline_decay);
  }
  {
    Reader k = root.sub("campaign");
    k.get("trials", c.trials);
    k.get("workers", c.workers);
    k.get("budget", c.budget);
  }
  c.run.agent.per.validate();
  c.run.agent.meta_ppo.validate();
  c.run.agent.adapt_ppo.validate();
  c.run.search_reward.validate();
  c.run.report_reward.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  const AgentConfig& ag = c.run.agent;
  json j;
  j["oracle"] = {{"kind", c.oracle.kind},
                 {"space", c.oracle.space},
                 {"bench_path", c.oracle.bench_path},
                 {"planted_optimum", c.oracle.planted_optimum},
                 {"synthetic",
                  {{"family_seed", c.oracle.synthetic.family_seed},
                   {"task_count", c.oracle.synthetic.task_count},
                   {"group_spread", c.oracle.synthetic.group_spread},
                   {"task_spread", c.oracle.synthetic.task_spread},
                   {"interaction", c.oracle.synthetic.interaction},
                   {"noise_scale", c.oracle.synthetic.noise_scale},
                   {"max_epoch", c.oracle.synthetic.max_epoch},
                   {"latency_base", c.oracle.synthetic.latency_base}}}};
  j["agent"] = {{"latent_dim", ag.latent_dim},
                {"encoder_hidden", ag.encoder_hidden},
                {"controller_hidden", ag.controller_hidden},
                {"evaluator_hidden", ag.evaluator_hidden},
                {"encoder_lr", ag.encoder_lr},
                {"kl_weight", ag.kl_weight},
                {"candidates", ag.candidates},
                {"contexts", ag.contexts},
                {"seed_networks", ag.seed_networks},
                {"evaluator_updates", ag.evaluator_updates},
                {"meta_epsilon", ag.meta_epsilon},
                {"adapt_epsilon", ag.adapt_epsilon},
                {"per",
                 {{"alpha", ag.per.alpha},
                  {"beta", ag.per.beta},
                  {"beta_step", ag.per.beta_step},
                  {"capacity", ag.per.capacity},
                  {"batch_fraction", ag.per.batch_fraction},
                  {"lr", ag.per.lr},
                  {"priority_floor", ag.per.priority_floor}}},
                {"epsilon", {{"decay", ag.epsilon.decay}, {"decay_every", ag.epsilon.decay_every}}},
                {"meta_ppo", write(ag.meta_ppo)},
                {"adapt_ppo", write(ag.adapt_ppo)}};
  j["run"] = {{"meta_epochs", c.run.meta_epochs},
              {"meta_search_epochs", c.run.meta_search_epochs},
              {"adapt_search_epochs", c.run.adapt_search_epochs},
              {"meta_tasks", c.meta_tasks},
              {"target_task", c.target_task},
              {"mode", to_string(c.run.mode)},
              {"seed", c.run.seed},
              {"time_budget_seconds", c.run.time_budget_seconds ? json(*c.run.time_budget_seconds) : json(nullptr)},
              {"search_reward", write(c.run.search_reward)},
              {"report_reward", write(c.run.report_reward)}};
  j["baselines"] = {{"rea", {{"population", c.rea.population}, {"tournament", c.rea.tournament}}},
                    {"reinforce", {{"lr", c.reinforce.lr}, {"baseline_decay", c.reinforce.baseline_decay}}}};
  j["campaign"] = {{"trials", c.trials}, {"workers", c.workers}, {"budget", c.budget}};
  return j;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config '{}'", path.string()));
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return config_from_json(j);
}

fs::path resolve_data_path(const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p;
  if (const char* dir = std::getenv(kDataDirEnv); dir && *dir) return fs::path(dir) / p;
  return p;
}

std::unique_ptr<TaskOracle> make_oracle(const OracleConfig& config) {
  if (config.kind == "tabular") {
    if (config.bench_path.empty()) throw ConfigError("tabular oracle needs oracle.bench_path");
    return std::make_unique<TabularBenchmark>(TabularBenchmark::load(resolve_data_path(config.bench_path)));
  }
  ActionSchema schema = schema_from_json(config.space);
  if (config.kind == "synthetic") return std::make_unique<SyntheticOracle>(std::move(schema), config.synthetic);
  if (config.kind == "planted") {
    Actions optimum = config.planted_optimum;
    if (optimum.empty()) {
      Rng rng(mix64(config.synthetic.family_seed ^ 0x9A7));
      optimum = sample_valid_actions(schema, rng);
    }
    return std::make_unique<PlantedOracle>(std::move(schema), std::move(optimum));
  }
  throw ConfigError(fmt::format("unknown oracle kind '{}'", config.kind));
}

void resolve_tasks(ExperimentConfig& config, const TaskOracle& oracle) {
  const auto& names = oracle.tasks();
  if (names.empty()) throw ConfigError("oracle has no tasks");
  config.run.target_task = config.target_task.empty() ? names.size() - 1 : oracle.task_index(config.target_task);
  config.run.meta_tasks.clear();
  if (config.meta_tasks.empty()) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (i != config.run.target_task || names.size() == 1) config.run.meta_tasks.push_back(i);
  } else {
    for (const auto& n : config.meta_tasks) config.run.meta_tasks.push_back(oracle.task_index(n));
  }
}

}  // namespace catchnas
