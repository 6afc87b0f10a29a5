// catchnas: meta-train, adapt, baselines, campaigns and benchmark checks.
#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "catchnas/config.hpp"

namespace fs = std::filesystem;
using namespace catchnas;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string oracle_file;
  std::string mode;
  std::optional<std::size_t> budget;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("-c,--config", c.config, "JSON config file (defaults apply to missing keys)");
  cmd->add_option("-s,--seed", c.seed, "Random seed");
  cmd->add_option("--oracle", c.oracle_file, "Tabular benchmark file; relative paths resolve against $CATCHNAS_DATA_DIR");
  cmd->add_option("-m,--mode", c.mode, "Ablation mode: full, zero-z, random-z, no-evaluator, gt-evaluator, sfs");
  cmd->add_option("-b,--budget", c.budget, "Search epochs per trial");
  if (with_out) cmd->add_option("-o,--out", c.out, "Output directory")->required();
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? config_from_json(nlohmann::json::object()) : load_config(c.config);
  if (!c.oracle_file.empty()) {
    cfg.oracle.kind = "tabular";
    cfg.oracle.bench_path = c.oracle_file;
  }
  if (c.seed) cfg.run.seed = *c.seed;
  if (!c.mode.empty()) cfg.run.mode = parse_ablation_mode(c.mode);
  if (c.budget) {
    cfg.budget = *c.budget;
    cfg.run.adapt_search_epochs = *c.budget;
  }
  return cfg;
}

void snapshot(const fs::path& dir, const ExperimentConfig& cfg) {
  fs::create_directories(dir);
  std::ofstream(dir / "config.json", std::ios::trunc) << config_to_json(cfg).dump(2) << '\n';
}

int meta_train_cmd(const Common& c) {
  ExperimentConfig cfg = resolve(c);
  auto oracle = make_oracle(cfg.oracle);
  resolve_tasks(cfg, *oracle);
  const fs::path dir(c.out);
  snapshot(dir, cfg);
  auto result = meta_train(*oracle, cfg.run);
  result.bundle.save(dir / "checkpoint.bin");
  write_trace_csv(dir / "metrics.csv", result.trace);
  write_latent_csv(dir / "latent.csv", result.latents);
  fmt::print("meta-trained on {} tasks, {} evaluations; checkpoint {}\n", cfg.run.meta_tasks.size(),
             result.evaluations, (dir / "checkpoint.bin").string());
  return 0;
}

int adapt_cmd(const Common& c, const std::string& checkpoint) {
  ExperimentConfig cfg = resolve(c);
  auto oracle = make_oracle(cfg.oracle);
  resolve_tasks(cfg, *oracle);
  const fs::path dir(c.out);
  snapshot(dir, cfg);
  std::optional<AgentBundle> bundle;
  if (!checkpoint.empty()) bundle = AgentBundle::load(checkpoint);
  AlgorithmSpec spec;
  spec.run = cfg.run;
  const auto out = run_trial(spec, *oracle, bundle ? &*bundle : nullptr, cfg.run.target_task,
                             cfg.run.adapt_search_epochs, cfg.run.seed);
  write_trace_csv(dir / "metrics.csv", out.trace);
  write_latent_csv(dir / "latent.csv", out.latents);
  if (!out.trace.empty())
    fmt::print("task {}: best reward {} (report {}) after {} epochs\n", out.trace.back().task,
               out.trace.back().best_reward, out.trace.back().best_report, out.trace.size());
  return 0;
}

int baseline_cmd(const Common& c, const std::string& algorithm) {
  ExperimentConfig cfg = resolve(c);
  auto oracle = make_oracle(cfg.oracle);
  resolve_tasks(cfg, *oracle);
  const fs::path dir(c.out);
  snapshot(dir, cfg);
  AlgorithmSpec spec;
  spec.algorithm = parse_algorithm(algorithm);
  if (spec.algorithm == Algorithm::catch_agent) throw CLI::ValidationError("--algorithm", "use the adapt verb for CATCH");
  spec.run = cfg.run;
  spec.rea = cfg.rea;
  spec.reinforce = cfg.reinforce;
  const auto out = run_trial(spec, *oracle, nullptr, cfg.run.target_task, cfg.budget, cfg.run.seed);
  write_trace_csv(dir / "metrics.csv", out.trace);
  fmt::print("{} on {}: best reward {} (report {})\n", algorithm, out.trace.back().task, out.trace.back().best_reward,
             out.trace.back().best_report);
  return 0;
}

int campaign_cmd(const Common& c, const std::string& algorithm, const std::string& checkpoint,
                 std::optional<std::size_t> trials, std::optional<std::size_t> workers, const std::string& label) {
  ExperimentConfig cfg = resolve(c);
  auto oracle = make_oracle(cfg.oracle);
  resolve_tasks(cfg, *oracle);
  snapshot(c.out, cfg);
  Campaign camp;
  camp.spec.algorithm = parse_algorithm(algorithm);
  camp.spec.run = cfg.run;
  camp.spec.rea = cfg.rea;
  camp.spec.reinforce = cfg.reinforce;
  camp.label = label;
  camp.task = cfg.run.target_task;
  camp.trials = trials.value_or(cfg.trials);
  camp.workers = workers.value_or(cfg.workers);
  camp.base_seed = cfg.run.seed;
  camp.budget = cfg.budget;
  camp.out_dir = c.out;
  std::optional<AgentBundle> bundle;
  if (!checkpoint.empty()) bundle = AgentBundle::load(checkpoint);
  const auto summary = run_campaign(camp, *oracle, bundle ? &*bundle : nullptr);
  for (const auto& f : summary.failures) std::cerr << fmt::format("trial seed {} failed: {}\n", f.seed, f.error);
  fmt::print("{} trials, {} failed; aggregates in {}\n", summary.trials, summary.failures.size(), c.out);
  return summary.ok() ? 0 : 2;
}

int compare_cmd(const std::vector<std::string>& dirs, const std::vector<std::size_t>& ks, const std::string& csv,
                const Common& c) {
  std::vector<LoadedCampaign> camps;
  for (const auto& d : dirs) camps.push_back(load_campaign(d));
  std::optional<double> gmax;
  if (!c.config.empty() || !c.oracle_file.empty()) {
    ExperimentConfig cfg = resolve(c);
    auto oracle = make_oracle(cfg.oracle);
    gmax = oracle->global_max(oracle->task_index(camps.front().task), cfg.run.report_reward);
  }
  const auto table = compare(camps, ks, gmax);
  std::cout << to_text(table);
  if (!csv.empty()) std::ofstream(csv, std::ios::trunc) << to_csv(table);
  return 0;
}

int ingest_check_cmd(const std::string& file) {
  const auto check = check_bench_file(resolve_data_path(file));
  for (std::size_t d = 0; d < check.datasets.size(); ++d)
    fmt::print("{}: max final val acc {}\n", check.datasets[d], check.max_final_val[d]);
  for (const auto& [i, j, rho] : check.correlations)
    fmt::print("spearman {} vs {}: {:.4f}\n", check.datasets[i], check.datasets[j], rho);
  for (const auto& p : check.problems) fmt::print("problem: {}\n", p);
  fmt::print("{}\n", check.ok ? "PASS" : "FAIL");
  return check.ok ? 0 : 1;
}

int synth_bench_cmd(const std::string& out, std::uint64_t seed, std::size_t epochs) {
  SyntheticConfig fam;
  fam.family_seed = seed;
  auto bench = synthetic_tabular_bench(fam, {"cifar10-like", "cifar100-like", "imagenet16-like"},
                                       {91.719, 73.45, 47.19}, epochs);
  bench.save(out);
  fmt::print("wrote {}\n", out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transferable architecture search on tabular and synthetic oracles"};
  app.require_subcommand(1);

  Common c;
  auto* meta = app.add_subcommand("meta-train", "Meta-train encoder, controller and evaluator on the meta task pool");
  add_common(meta, c);

  std::string checkpoint;
  auto* ad = app.add_subcommand("adapt", "Adapt a checkpoint to the target task");
  add_common(ad, c);
  ad->add_option("--checkpoint", checkpoint, "Checkpoint from meta-train (omit in sfs mode)");

  std::string algorithm = "random";
  auto* base = app.add_subcommand("baseline", "Run one baseline trial");
  add_common(base, c);
  base->add_option("-a,--algorithm", algorithm, "random, rea or reinforce");

  std::string camp_algorithm = "catch", label;
  std::optional<std::size_t> trials, workers;
  auto* camp = app.add_subcommand("campaign", "Run seeded trials and write aggregates");
  add_common(camp, c);
  camp->add_option("-a,--algorithm", camp_algorithm, "catch, random, rea or reinforce");
  camp->add_option("--checkpoint", checkpoint, "Checkpoint for CATCH trials");
  camp->add_option("-n,--trials", trials, "Trial count");
  camp->add_option("-j,--workers", workers, "Worker threads");
  camp->add_option("--label", label, "Name shown by compare");

  std::vector<std::string> dirs;
  std::vector<std::size_t> ks{10, 25, 50};
  std::string csv;
  auto* cmp = app.add_subcommand("compare", "Summarize campaigns run on the same task");
  cmp->add_option("dirs", dirs, "Campaign directories")->required()->expected(2, -1);
  cmp->add_option("-k,--best-at", ks, "Epochs for best-found@k columns")->delimiter(',');
  cmp->add_option("--csv", csv, "Also write the table as CSV");
  add_common(cmp, c, false);

  std::string bench_file;
  auto* ing = app.add_subcommand("ingest-check", "Verify a portable benchmark file");
  ing->add_option("file", bench_file)->required();

  std::string synth_out;
  std::uint64_t synth_seed = 1;
  std::size_t synth_epochs = 200;
  auto* syn = app.add_subcommand("synth-bench", "Write a synthetic benchmark file in the portable format");
  syn->add_option("-o,--out", synth_out)->required();
  syn->add_option("-s,--seed", synth_seed);
  syn->add_option("--epochs", synth_epochs);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*meta) return meta_train_cmd(c);
    if (*ad) return adapt_cmd(c, checkpoint);
    if (*base) return baseline_cmd(c, algorithm);
    if (*camp) return campaign_cmd(c, camp_algorithm, checkpoint, trials, workers, label);
    if (*cmp) return compare_cmd(dirs, ks, csv, c);
    if (*ing) return ingest_check_cmd(bench_file);
    if (*syn) return synth_bench_cmd(synth_out, synth_seed, synth_epochs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
