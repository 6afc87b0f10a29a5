#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "catchnas/harness.hpp"

namespace catchnas {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Environment variable naming the directory that relative benchmark paths resolve against.
inline constexpr const char* kDataDirEnv = "CATCHNAS_DATA_DIR";

struct OracleConfig {
  std::string kind = "synthetic";  ///< synthetic | planted | tabular
  nlohmann::json space = {{"kind", "cell"}};
  SyntheticConfig synthetic;
  std::string bench_path;          ///< tabular only
  Actions planted_optimum;         ///< planted only; empty draws one from synthetic.family_seed
};

/// Whole experiment description. Every hyperparameter has a default, so `{}`
/// is a valid config file.
struct ExperimentConfig {
  OracleConfig oracle;
  RunConfig run;
  ReaConfig rea;
  ReinforceConfig reinforce;
  std::vector<std::string> meta_tasks;  ///< task names; empty means every task except the target
  std::string target_task;              ///< empty means the oracle's last task
  std::size_t trials = 100;
  std::size_t workers = 1;
  std::size_t budget = 50;
};

/// Unknown keys are rejected. Without an explicit agent.adapt_ppo block the
/// adaptation controller takes the defaults for the oracle's space kind.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Absolute paths pass through; relative ones resolve against $CATCHNAS_DATA_DIR when set.
std::filesystem::path resolve_data_path(const std::string& path);

std::unique_ptr<TaskOracle> make_oracle(const OracleConfig& config);

/// Fills run.meta_tasks and run.target_task from the task names.
void resolve_tasks(ExperimentConfig& config, const TaskOracle& oracle);

}  // namespace catchnas
