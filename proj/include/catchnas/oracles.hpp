#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "catchnas/common.hpp"
#include "catchnas/spaces.hpp"

namespace catchnas {

class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Which value of an architecture to read and how to fold in latency.
struct RewardSpec {
  std::optional<int> fidelity_epoch;       ///< nullopt = final (fully trained) value
  std::optional<double> latency_target;    ///< ms; absent = accuracy-only reward
  double latency_exponent = -0.05;

  void validate() const;
};

struct Evaluation {
  double performance = 0.0;  ///< oracle-native units (percent for tabular data)
  std::optional<double> latency;
};

/// Abstract reward source over one action schema and a set of tasks.
class TaskOracle {
 public:
  virtual ~TaskOracle() = default;

  virtual const ActionSchema& schema() const = 0;
  virtual const std::vector<std::string>& tasks() const = 0;
  virtual Evaluation query(std::span<const int> actions, std::size_t task, const RewardSpec& spec) const = 0;

  /// Divides native performance into [0, 1].
  virtual double performance_scale() const { return 1.0; }

  /// Best native performance over the whole space, when known.
  virtual std::optional<double> global_max(std::size_t task, const RewardSpec& spec) const;

  std::size_t task_index(const std::string& name) const;
};

/// P * (LAT / T_target)^w, or P when no latency target is set.
double multiobjective_reward(double performance, std::optional<double> latency, const RewardSpec& spec);

/// Reward as seen by the agent: native performance scaled into [0, 1], then
/// the latency transform.
double agent_reward(const TaskOracle& oracle, const Evaluation& eval, const RewardSpec& spec);

/// Uniform draw from a non-empty pool of task indices.
std::size_t sample_meta_task(std::span<const std::size_t> pool, Rng& rng);

struct BenchRecord {
  std::vector<double> val_acc_by_epoch;
  double final_val_acc = 0.0;
  double final_test_acc = 0.0;
};

struct BenchHeader {
  std::vector<std::string> datasets;
  std::vector<std::string> ops;
  std::size_t arch_count = kCellCount;
  std::size_t epochs = 0;
  std::string source;
};

/// Tabular benchmark over the cell space, indexed by (dataset, cell index).
/// Values are float32 percent accuracies as stored in the portable container.
class TabularBenchmark final : public TaskOracle {
 public:
  TabularBenchmark(BenchHeader header, std::vector<float> payload);

  static TabularBenchmark load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const BenchHeader& header() const { return header_; }
  std::size_t metrics_per_arch() const { return header_.epochs + 2; }
  std::span<const float> payload() const { return payload_; }

  float val_acc(std::size_t dataset, int index, int epoch) const;
  float final_val_acc(std::size_t dataset, int index) const;
  float final_test_acc(std::size_t dataset, int index) const;
  BenchRecord record(std::size_t dataset, int index) const;

  const ActionSchema& schema() const override { return schema_; }
  const std::vector<std::string>& tasks() const override { return header_.datasets; }
  Evaluation query(std::span<const int> actions, std::size_t task, const RewardSpec& spec) const override;
  double performance_scale() const override { return 100.0; }
  std::optional<double> global_max(std::size_t task, const RewardSpec& spec) const override;

 private:
  std::size_t at(std::size_t dataset, int index, std::size_t metric) const;

  BenchHeader header_;
  std::vector<float> payload_;
  ActionSchema schema_;
};

/// Structural check of a portable benchmark file (checksum, counts, ranges).
struct BenchCheck {
  bool ok = false;
  std::vector<std::string> problems;
  std::vector<std::string> datasets;
  std::vector<double> max_final_val;
  /// Spearman correlation of final validation accuracy for each dataset pair (i < j).
  std::vector<std::tuple<std::size_t, std::size_t, double>> correlations;
};
BenchCheck check_bench_file(const std::filesystem::path& path);

double spearman(std::span<const double> a, std::span<const double> b);

struct SyntheticConfig {
  std::uint64_t family_seed = 1;
  std::size_t task_count = 9;
  double group_spread = 1.0;   ///< scale of the weight shift shared by tasks of one difficulty group
  double task_spread = 0.3;    ///< scale of per-task weight deviations, times X / 20
  double interaction = 0.3;    ///< scale of shared adjacent-slot interactions
  double noise_scale = 0.05;   ///< deterministic noise on partial-fidelity values
  int max_epoch = 200;
  double latency_base = 1.0;   ///< ms
};

/// Family of tasks over one schema that share a feature basis and differ in
/// weights. Task k has difficulty X in {10, 20, 30} (k mod 3); its weights are
/// the family's shared weights plus the shift of its difficulty group plus a
/// private deviation scaled by X. Rewards lie in [0, 1];
/// for enumerable spaces they are min-max normalized exactly, so each task's
/// optimum scores 1.
class SyntheticOracle final : public TaskOracle {
 public:
  SyntheticOracle(ActionSchema schema, SyntheticConfig config);

  const ActionSchema& schema() const override { return schema_; }
  const std::vector<std::string>& tasks() const override { return names_; }
  Evaluation query(std::span<const int> actions, std::size_t task, const RewardSpec& spec) const override;
  std::optional<double> global_max(std::size_t task, const RewardSpec& spec) const override;

  const SyntheticConfig& config() const { return config_; }
  int difficulty(std::size_t task) const;
  double final_reward(std::span<const int> actions, std::size_t task) const;
  double latency(std::span<const int> actions) const;
  /// Highest-scoring architecture of an enumerable task.
  Actions optimum(std::size_t task) const;

 private:
  struct Task {
    std::vector<std::vector<double>> weights;  // [slot][option]
    double lo = 0.0;
    double hi = 1.0;
    std::vector<float> table;  // enumerable spaces only, indexed by mixed-radix position
  };
  double raw_score(std::span<const int> actions, const Task& task) const;
  std::size_t flat_index(std::span<const int> actions) const;

  ActionSchema schema_;
  SyntheticConfig config_;
  std::vector<std::string> names_;
  std::vector<Task> tasks_;
  std::vector<std::vector<std::vector<double>>> interactions_;  // [slot][option][next option]
  std::vector<std::vector<double>> latency_cost_;
  bool enumerable_ = false;
};

/// Tabular file built from a synthetic cell family: dataset k has accuracies in
/// [floor, ceilings[k]] percent, the maximum final validation accuracy equals
/// ceilings[k] exactly, and epoch curves follow the synthetic fidelity model.
TabularBenchmark synthetic_tabular_bench(const SyntheticConfig& family, std::vector<std::string> datasets,
                                         std::vector<double> ceilings, std::size_t epochs = 200, double floor = 10.0);

/// Single-task landscape with one planted optimum scoring 1; every other
/// architecture scores 0.5 * (matching slots) / L < 0.5.
class PlantedOracle final : public TaskOracle {
 public:
  PlantedOracle(ActionSchema schema, Actions optimum);

  const ActionSchema& schema() const override { return schema_; }
  const std::vector<std::string>& tasks() const override { return names_; }
  Evaluation query(std::span<const int> actions, std::size_t task, const RewardSpec& spec) const override;
  std::optional<double> global_max(std::size_t, const RewardSpec&) const override { return 1.0; }

 private:
  ActionSchema schema_;
  Actions optimum_;
  std::vector<std::string> names_{"planted"};
};

}  // namespace catchnas
