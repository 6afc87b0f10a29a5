#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "catchnas/search.hpp"

using namespace catchnas;

namespace {

/// Forwards to another oracle, counting queries; throws once `fail_at` queries have succeeded.
class ProbeOracle final : public TaskOracle {
 public:
  explicit ProbeOracle(const TaskOracle& inner) : inner_(inner) {}
  const ActionSchema& schema() const override { return inner_.schema(); }
  const std::vector<std::string>& tasks() const override { return inner_.tasks(); }
  Evaluation query(std::span<const int> actions, std::size_t task, const RewardSpec& spec) const override {
    if (fail_at && queries >= *fail_at) throw std::runtime_error("oracle offline");
    ++queries;
    return inner_.query(actions, task, spec);
  }
  mutable std::size_t queries = 0;
  std::optional<std::size_t> fail_at;

 private:
  const TaskOracle& inner_;
};

RunConfig small_config(AblationMode mode = AblationMode::full, std::uint64_t seed = 3) {
  RunConfig c;
  c.agent.encoder_hidden = {16};
  c.agent.controller_hidden = {16};
  c.agent.evaluator_hidden = {16};
  c.agent.candidates = 8;
  c.agent.evaluator_updates = 3;
  c.meta_epochs = 3;
  c.meta_search_epochs = 5;
  c.adapt_search_epochs = 12;
  c.meta_tasks = {0, 1, 2, 3};
  c.target_task = 4;
  c.mode = mode;
  c.seed = seed;
  return c;
}

class SearchTest : public ::testing::Test {
 protected:
  SyntheticOracle oracle{cell_schema(), SyntheticConfig{}};
};

bool same_params(const AgentBundle& a, const AgentBundle& b) {
  return a.encoder.net() == b.encoder.net() && a.controller.net() == b.controller.net() &&
         a.evaluator.net() == b.evaluator.net();
}

}  // namespace

TEST(AblationNames, RoundTrip) {
  for (auto m : {AblationMode::full, AblationMode::zero_z, AblationMode::random_z, AblationMode::no_evaluator,
                 AblationMode::gt_evaluator, AblationMode::sfs})
    EXPECT_EQ(parse_ablation_mode(to_string(m)), m);
  EXPECT_THROW(parse_ablation_mode("half"), std::invalid_argument);
}

TEST(History, BestIsMaxRewardEarliestOnTies) {
  SearchHistory h;
  h.add({{0}, {}, 0.3, 1.0});
  h.add({{1}, {}, 0.7, 2.0});
  h.add({{2}, {}, 0.7, 3.0});
  h.add({{3}, {}, 0.1, 4.0});
  EXPECT_EQ(h.best_model().actions, Actions{1});
  EXPECT_EQ(h.size(), 4u);
}

TEST(History, ContextSamplingIsDistinctSubset) {
  SearchHistory h;
  for (int i = 0; i < 10; ++i) h.add({{i}, {}, 0.1 * i, 0.0});
  Rng rng(1);
  EXPECT_EQ(h.sample_contexts(0, rng).size(), 10u);
  EXPECT_EQ(h.sample_contexts(50, rng).size(), 10u);
  auto idx = h.sample_contexts(4, rng);
  ASSERT_EQ(idx.size(), 4u);
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(std::unique(idx.begin(), idx.end()), idx.end());
  EXPECT_LT(idx.back(), 10u);
}

TEST_F(SearchTest, SingleMetaEpochPerformsOneSearchEvaluation) {
  ProbeOracle probe(oracle);
  auto cfg = small_config();
  cfg.meta_epochs = 1;
  cfg.meta_search_epochs = 1;
  const auto result = meta_train(probe, cfg);
  EXPECT_EQ(result.evaluations, 1u);
  EXPECT_EQ(result.trace.size(), 1u);
  // The seed network that opens the task is the only other query.
  EXPECT_EQ(probe.queries, 1u + cfg.agent.seed_networks);
}

TEST_F(SearchTest, MetaTrainingMovesEveryComponent) {
  const auto cfg = small_config();
  const auto init = AgentBundle::init(oracle.schema(), cfg.agent, cfg.seed);
  const auto result = meta_train(init, oracle, cfg);
  EXPECT_GT(result.bundle.parameter_distance(init), 0.0);
  EXPECT_NE(result.bundle.encoder.net(), init.encoder.net());
  EXPECT_NE(result.bundle.controller.net(), init.controller.net());
  EXPECT_NE(result.bundle.evaluator.net(), init.evaluator.net());
  EXPECT_EQ(result.trace.size(), cfg.meta_epochs * cfg.meta_search_epochs);
  EXPECT_THROW(
      [&] {
        auto bad = cfg;
        bad.meta_tasks.clear();
        meta_train(oracle, bad);
      }(),
      std::invalid_argument);
}

TEST_F(SearchTest, ZeroZModeNeverTouchesTheEncoder) {
  const auto cfg = small_config(AblationMode::zero_z);
  const auto init = AgentBundle::init(oracle.schema(), cfg.agent, cfg.seed);
  Searcher s(init, oracle, cfg, Phase::meta);
  s.begin_task(0);
  for (int i = 0; i < 10; ++i) {
    const auto r = s.search_epoch();
    for (double v : r.latent.z) ASSERT_EQ(v, 0.0);
    for (double g : s.last_encoder_gradient()) ASSERT_EQ(g, 0.0);
  }
  EXPECT_EQ(s.bundle().encoder.net(), init.encoder.net());
  EXPECT_NE(s.bundle().controller.net(), init.controller.net());
}

TEST_F(SearchTest, RandomZDrawsFreshLatents) {
  const auto cfg = small_config(AblationMode::random_z);
  Searcher s(AgentBundle::init(oracle.schema(), cfg.agent, cfg.seed), oracle, cfg, Phase::meta);
  s.begin_task(0);
  const auto a = s.search_epoch().latent.z;
  const auto b = s.search_epoch().latent.z;
  EXPECT_NE(a, b);
  EXPECT_EQ(a.size(), kLatentDim);
}

TEST_F(SearchTest, HistoryGrowsByOnePerEpoch) {
  const auto cfg = small_config();
  Searcher s(AgentBundle::init(oracle.schema(), cfg.agent, cfg.seed), oracle, cfg, Phase::adapt);
  EXPECT_THROW(s.search_epoch(), std::logic_error);
  s.begin_task(4);
  const std::size_t start = s.history().size();
  EXPECT_EQ(start, cfg.agent.seed_networks);
  for (std::size_t i = 1; i <= 15; ++i) {
    s.search_epoch();
    ASSERT_EQ(s.history().size(), start + i);
    ASSERT_EQ(s.evaluations(), i);
  }
  EXPECT_EQ(s.replay().size(), 15u);
}

TEST_F(SearchTest, ZeroSearchEpochsReturnsTheSeedNetwork) {
  auto cfg = small_config();
  cfg.adapt_search_epochs = 0;
  const auto ckpt = AgentBundle::init(oracle.schema(), cfg.agent, cfg.seed);
  const auto r = adapt(ckpt, oracle, cfg);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(r.evaluations, 0u);
  EXPECT_TRUE(is_valid(oracle.schema(), r.best_actions));
  EXPECT_DOUBLE_EQ(r.best_reward, oracle.final_reward(r.best_actions, cfg.target_task));
}

TEST_F(SearchTest, BestSoFarIsNondecreasingAndMatchesHistory) {
  auto cfg = small_config();
  cfg.adapt_search_epochs = 40;
  const auto r = adapt(AgentBundle::init(oracle.schema(), cfg.agent, cfg.seed), oracle, cfg);
  ASSERT_EQ(r.trace.size(), 40u);
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    ASSERT_GE(r.trace[i].best_reward, r.trace[i - 1].best_reward);
    ASSERT_GE(r.trace[i].best_reward, r.trace[i].reward);
    ASSERT_EQ(r.trace[i].epoch, i + 1);
  }
  EXPECT_EQ(r.trace.back().best_reward, r.best_reward);
  // Adaptation epsilon starts at 0.5 and decays by 0.025 after 20 selections.
  EXPECT_EQ(r.trace[0].epsilon, 0.5);
  EXPECT_EQ(r.trace[20].epsilon, 0.5 - 0.025);
}

TEST_F(SearchTest, SchemaMismatchIsRejected) {
  const auto cfg = small_config();
  const auto macro = AgentBundle::init(macro_schema(), cfg.agent, 1);
  EXPECT_THROW(adapt(macro, oracle, cfg), std::invalid_argument);
  EXPECT_THROW(Searcher(macro, oracle, cfg, Phase::meta), std::invalid_argument);
}

TEST_F(SearchTest, AdaptationLeavesCheckpointUntouchedAndTasksIsolated) {
  auto cfg = small_config();
  const auto ckpt = meta_train(oracle, cfg).bundle;
  const auto snapshot = ckpt;
  cfg.target_task = 5;
  const auto alone = adapt(ckpt, oracle, cfg);
  cfg.target_task = 4;
  adapt(ckpt, oracle, cfg);
  EXPECT_TRUE(same_params(ckpt, snapshot));
  cfg.target_task = 5;
  const auto after = adapt(ckpt, oracle, cfg);
  EXPECT_EQ(after.trace, alone.trace);
  EXPECT_EQ(after.best_actions, alone.best_actions);
}

TEST_F(SearchTest, RunsAreBitDeterministic) {
  for (auto mode : {AblationMode::full, AblationMode::random_z, AblationMode::no_evaluator, AblationMode::sfs}) {
    const auto cfg = small_config(mode, 11);
    const auto m1 = meta_train(oracle, cfg), m2 = meta_train(oracle, cfg);
    EXPECT_EQ(m1.trace, m2.trace);
    EXPECT_TRUE(same_params(m1.bundle, m2.bundle));
    const auto a1 = adapt(m1.bundle, oracle, cfg), a2 = adapt(m2.bundle, oracle, cfg);
    EXPECT_EQ(a1.trace, a2.trace) << to_string(mode);
    EXPECT_EQ(a1.latents.size(), a2.latents.size());
    for (std::size_t i = 0; i < a1.latents.size(); ++i) EXPECT_EQ(a1.latents[i].z, a2.latents[i].z);
  }
  const auto c1 = small_config(AblationMode::full, 11), c2 = small_config(AblationMode::full, 12);
  const auto ckpt = AgentBundle::init(oracle.schema(), c1.agent, 0);
  EXPECT_NE(adapt(ckpt, oracle, c1).trace, adapt(ckpt, oracle, c2).trace);
}

TEST_F(SearchTest, OracleFailureLeavesStateUnchanged) {
  ProbeOracle probe(oracle);
  const auto cfg = small_config();
  Searcher s(AgentBundle::init(oracle.schema(), cfg.agent, cfg.seed), probe, cfg, Phase::adapt);
  s.begin_task(4);
  for (int i = 0; i < 5; ++i) s.search_epoch();
  const auto bundle = s.bundle();
  const auto history = s.history().entries();
  const auto replay_size = s.replay().size();
  const auto memory = s.ppo().memory().size();
  const auto eps = s.epsilon().value();
  const auto selections = s.epsilon().selections();
  const auto evals = s.evaluations();
  probe.fail_at = probe.queries;
  EXPECT_THROW(s.search_epoch(), std::runtime_error);
  EXPECT_TRUE(same_params(s.bundle(), bundle));
  EXPECT_EQ(s.history().size(), history.size());
  EXPECT_EQ(s.replay().size(), replay_size);
  EXPECT_EQ(s.ppo().memory().size(), memory);
  EXPECT_EQ(s.epsilon().value(), eps);
  EXPECT_EQ(s.epsilon().selections(), selections);
  EXPECT_EQ(s.evaluations(), evals);
  probe.fail_at.reset();
  s.search_epoch();
  EXPECT_EQ(s.history().size(), history.size() + 1);
}

TEST_F(SearchTest, BeginTaskScopesMemories) {
  const auto cfg = small_config();
  Searcher meta(AgentBundle::init(oracle.schema(), cfg.agent, cfg.seed), oracle, cfg, Phase::meta);
  meta.begin_task(0);
  for (int i = 0; i < 4; ++i) meta.search_epoch();
  meta.begin_task(1);
  EXPECT_EQ(meta.replay().size(), 4u);  // persists across meta tasks
  EXPECT_TRUE(meta.ppo().memory().empty());
  EXPECT_EQ(meta.epsilon().value(), 1.0);
  EXPECT_EQ(meta.history().size(), 1u);

  Searcher ad(AgentBundle::init(oracle.schema(), cfg.agent, cfg.seed), oracle, cfg, Phase::adapt);
  ad.begin_task(0);
  for (int i = 0; i < 4; ++i) ad.search_epoch();
  ad.begin_task(1);
  EXPECT_EQ(ad.replay().size(), 0u);
  EXPECT_EQ(ad.epsilon().value(), 0.5);
  EXPECT_THROW(ad.begin_task(99), LookupError);
}

TEST_F(SearchTest, CheckpointRoundTrip) {
  const auto cfg = small_config();
  const auto bundle = AgentBundle::init(oracle.schema(), cfg.agent, 5);
  const auto dir = std::filesystem::temp_directory_path() / "catchnas_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "agent.bin";
  bundle.save(path);
  const auto back = AgentBundle::load(path);
  EXPECT_TRUE(same_params(back, bundle));
  EXPECT_EQ(back.schema.fingerprint(), bundle.schema.fingerprint());
  EXPECT_EQ(back.parameter_distance(bundle), 0.0);

  std::ofstream(dir / "junk.bin", std::ios::binary) << "not a checkpoint at all";
  EXPECT_THROW(AgentBundle::load(dir / "junk.bin"), FormatError);
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  }
  EXPECT_THROW(AgentBundle::load(dir / "short.bin"), FormatError);
  std::filesystem::remove_all(dir);
}

// ---------------------------------------------------------------------------

namespace {

/// Small, fully wired joint objective: encoder over three contexts, controller
/// steps and replay entries partly tagged with the live z.
struct JointFixture {
  ActionSchema schema = cell_schema();
  std::size_t d = 3;
  ContextEncoder encoder{schema.onehot_width(), {6}, 101, 3};
  Controller controller{schema, 3, {6}, 102};
  Evaluator evaluator{schema.onehot_width(), 3, {6}, 103};
  std::vector<ContextPair> contexts;
  std::vector<double> noise;
  std::vector<StepRecord> steps;
  std::vector<double> adv;
  ReplayBuffer buffer{64};
  PerBatch batch;
  PpoConfig ppo;
  std::int64_t tag = 7;

  JointFixture() {
    Rng rng(104);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> rewards;
    for (int i = 0; i < 3; ++i) {
      const auto a = sample_valid_actions(schema, rng);
      contexts.push_back({arch_onehot(schema, a), 0.0});
      rewards.push_back(u(rng));
    }
    const auto norm = normalize_rewards(rewards);
    for (int i = 0; i < 3; ++i) contexts[static_cast<std::size_t>(i)].reward_norm = norm[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < d; ++k) noise.push_back(n(rng));
    const auto z = encoder.encode(contexts, noise).sample.z;
    for (int t = 0; t < 4; ++t) {
      std::vector<double> zt = z;
      if (t % 2) for (auto& v : zt) v = n(rng);
      auto net = controller.sample(zt, rng);
      finish_trajectory(net.steps, u(rng), ppo);
      for (auto& s : net.steps) s.tag = t % 2 ? -1 : tag;
      steps.insert(steps.end(), net.steps.begin(), net.steps.end());
      buffer.push(ReplayEntry{arch_onehot(schema, net.actions), zt, u(rng), 1.0, t % 2 ? -1 : tag});
    }
    for (std::size_t i = 0; i < buffer.size(); ++i) buffer.set_priority(i, 0.5 + static_cast<double>(i));
    adv = normalized_advantages(steps);
    batch = per_sample(buffer, 3, 0.5, 0.6, rng);
  }

  JointReport eval(const ContextEncoder& enc, double beta, std::span<double> grad) const {
    return joint_objective(enc, contexts, noise, controller, steps, adv, ppo, evaluator, buffer, batch, beta, tag,
                           grad);
  }
};

}  // namespace

TEST(JointObjective, TotalIsSumOfParts) {
  const JointFixture f;
  const auto r = f.eval(f.encoder, 0.1, {});
  // Parts recomputed independently with the live z substituted by hand.
  const auto pass = f.encoder.encode(f.contexts, f.noise);
  auto steps = f.steps;
  for (auto& s : steps)
    if (s.tag == f.tag) s.z = pass.sample.z;
  ReplayBuffer buf = f.buffer;
  for (std::size_t i = 0; i < buf.size(); ++i)
    if (buf[i].tag == f.tag) buf.entry(i).z = pass.sample.z;
  const double lc = ppo_objective(f.controller, steps, f.adv, f.ppo, {}).total;
  const double le = EvaluatorTrainer::loss(f.evaluator, buf, f.batch, {}).loss;
  EXPECT_NEAR(r.total, lc + le + 0.1 * kl_to_unit_prior(pass.posterior), 1e-12);
  EXPECT_NEAR(r.total, r.controller.total + r.evaluator.loss + 0.1 * r.kl, 1e-12);
}

TEST(JointObjective, EncoderGradientMatchesFiniteDifferences) {
  const JointFixture f;
  std::vector<double> grad(f.encoder.net().param_count(), 0.0);
  f.eval(f.encoder, 0.1, grad);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t p = 0; p < grad.size(); ++p) {
    ContextEncoder plus = f.encoder, minus = f.encoder;
    plus.net().params()[p] += h;
    minus.net().params()[p] -= h;
    const double fd = (f.eval(plus, 0.1, {}).total - f.eval(minus, 0.1, {}).total) / (2 * h);
    const double rel = std::abs(fd - grad[p]) / std::max(1e-4, std::abs(fd) + std::abs(grad[p]));
    worst = std::max(worst, rel);
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(JointObjective, NoDownstreamSignalAndNoKlGivesZeroGradient) {
  JointFixture f;
  f.controller = Controller(f.schema, Mlp::zeros({f.d + f.schema.onehot_width(), 6, f.schema.onehot_width() + 1},
                                                 Activation::tanh), f.d);
  f.evaluator = Evaluator(Mlp::zeros({f.schema.onehot_width() + f.d, 6, 1}, Activation::relu), f.d);
  std::vector<double> grad(f.encoder.net().param_count(), 0.0);
  f.eval(f.encoder, 0.0, grad);
  for (double g : grad) ASSERT_EQ(g, 0.0);
  f.eval(f.encoder, 0.1, grad);
  double norm = 0.0;
  for (double g : grad) norm += g * g;
  EXPECT_GT(norm, 0.0);  // the KL term alone still moves the encoder
}

// ---------------------------------------------------------------------------

TEST(PlantedOptimum, FullAgentFindsItWithinTwoHundredEpochs) {
  const auto schema = cell_schema();
  const PlantedOracle oracle(schema, Actions{3, 1, 4, 1, 0, 2});
  RunConfig cfg;
  cfg.target_task = 0;
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    cfg.seed = seed;
    Searcher s(AgentBundle::init(schema, cfg.agent, mix64(seed ^ 0x77)), oracle, cfg, Phase::adapt);
    s.begin_task(0);
    // Stopping at the optimum does not change whether it is reached within the budget.
    while (s.history().best_model().reward < 1.0 && s.evaluations() < 200) s.search_epoch();
    hits += s.history().best_model().reward == 1.0;
  }
  EXPECT_GE(hits, 95);
}
