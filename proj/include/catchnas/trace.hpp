#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace catchnas {

/// One search epoch of any algorithm. Baselines leave the loss columns and
/// epsilon at zero.
struct TraceRow {
  std::string task;
  std::size_t epoch = 0;
  std::string arch;
  double reward = 0.0;       ///< agent reward in [0, 1] at search fidelity
  double best_reward = 0.0;  ///< best reward so far
  double best_report = 0.0;  ///< report-fidelity performance of the best-so-far architecture (native units)
  double loss_c = 0.0;
  double loss_e = 0.0;
  double kl = 0.0;
  double epsilon = 0.0;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

inline constexpr const char* kTraceHeader = "task,epoch,arch,reward,best_reward,best_report,loss_c,loss_e,kl,epsilon";

void write_trace_csv(std::ostream& os, std::span<const TraceRow> rows);
void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> rows);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

/// Per-epoch latent export row for offline visualization.
struct LatentRow {
  std::string task;
  std::size_t epoch = 0;
  std::vector<double> mean;
  std::vector<double> z;
};

void write_latent_csv(const std::filesystem::path& path, std::span<const LatentRow> rows, bool append = false);

}  // namespace catchnas
