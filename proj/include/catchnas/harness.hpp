#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catchnas/baselines.hpp"
#include "catchnas/search.hpp"

namespace catchnas {

enum class Algorithm { catch_agent, random, rea, reinforce };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);

/// Everything but the seed, task and budget of one trial.
struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::catch_agent;
  RunConfig run;  ///< agent settings, ablation mode and reward specs; baselines use only the reward specs
  ReaConfig rea;
  ReinforceConfig reinforce;
};

struct TrialOutput {
  std::vector<TraceRow> trace;
  std::vector<LatentRow> latents;
};

/// One seeded trial. CATCH trials adapt from `checkpoint`, which may be null
/// only in sfs mode. Identical arguments give identical output.
TrialOutput run_trial(const AlgorithmSpec& spec, const TaskOracle& oracle, const AgentBundle* checkpoint,
                      std::size_t task, std::size_t budget, std::uint64_t seed);

struct Campaign {
  std::string label;
  AlgorithmSpec spec;
  std::size_t task = 0;
  std::size_t trials = 1;
  std::uint64_t base_seed = 0;
  std::vector<std::uint64_t> seeds;  ///< explicit seeds; empty means base_seed + i
  std::size_t budget = 50;
  std::filesystem::path out_dir;
  std::size_t workers = 1;

  std::vector<std::uint64_t> resolved_seeds() const;
  void validate() const;
};

struct FinalEntry {
  std::uint64_t seed = 0;
  double best_report = 0.0;
  double best_reward = 0.0;
};

struct CurvePoint {
  std::size_t epoch = 0;
  std::size_t n = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;  ///< population standard deviation
  double mean_report = 0.0;
  double std_report = 0.0;
};

struct Aggregate {
  std::vector<FinalEntry> sorted_final;  ///< ascending final best_report, ties by seed
  std::vector<CurvePoint> curve;         ///< best-so-far statistics per epoch
};

/// Pure function of the traces. Traces shorter than the longest one carry
/// their last best-so-far forward.
Aggregate aggregate_trials(std::span<const std::uint64_t> seeds, std::span<const std::vector<TraceRow>> traces);

struct TrialFailure {
  std::uint64_t seed = 0;
  std::string error;
};

struct CampaignSummary {
  std::vector<std::uint64_t> seeds;            ///< successful trials, campaign order
  std::vector<std::vector<TraceRow>> traces;   ///< parallel to seeds
  std::vector<TrialFailure> failures;
  Aggregate aggregate;
  std::size_t trials = 0;

  /// At most 1% of trials failed.
  bool ok() const { return failures.size() * 100 <= trials; }
};

/// Runs all trials on a pool of `workers` threads, then writes
///   trials/seed_<seed>.csv, sorted_final.csv, curve.csv, campaign.json
/// under out_dir (when set). Failed trials are recorded and skipped.
CampaignSummary run_campaign(const Campaign& campaign, const TaskOracle& oracle, const AgentBundle* checkpoint);

void write_aggregate(const std::filesystem::path& dir, const Aggregate& aggregate);

struct LoadedCampaign {
  std::string label;
  std::string task;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<TraceRow>> traces;
};

/// Reads campaign.json and the per-trial CSVs it lists.
LoadedCampaign load_campaign(const std::filesystem::path& dir);

struct CompareRow {
  std::string label;
  std::size_t trials = 0;
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
  std::vector<double> best_at;  ///< mean best-so-far report at each k
};

struct CompareTable {
  std::string task;
  std::vector<std::size_t> ks;
  std::vector<CompareRow> rows;
};

/// Final-best report statistics per campaign. Throws std::invalid_argument if
/// the campaigns ran on different tasks. A known global maximum adds a "max" row.
CompareTable compare(std::span<const LoadedCampaign> campaigns, std::span<const std::size_t> ks,
                     std::optional<double> global_max = std::nullopt);

std::string to_csv(const CompareTable& table);
std::string to_text(const CompareTable& table);

double median(std::vector<double> values);

}  // namespace catchnas
