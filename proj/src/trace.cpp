#include "catchnas/trace.hpp"

#include <fmt/format.h>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace catchnas {

void write_trace_csv(std::ostream& os, std::span<const TraceRow> rows) {
  os << kTraceHeader << '\n';
  for (const auto& r : rows)
    os << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.task, r.epoch, r.arch, r.reward, r.best_reward, r.best_report,
                      r.loss_c, r.loss_e, r.kl, r.epsilon);
}

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write trace '{}'", path.string()));
  write_trace_csv(out, rows);
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot read trace '{}'", path.string()));
  std::string line;
  std::getline(in, line);
  if (line != kTraceHeader) throw std::runtime_error(fmt::format("'{}' does not have the trace header", path.string()));
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw std::runtime_error(fmt::format("malformed trace row in '{}'", path.string()));
    TraceRow r;
    r.task = cells[0];
    r.epoch = std::stoul(cells[1]);
    r.arch = cells[2];
    r.reward = std::stod(cells[3]);
    r.best_reward = std::stod(cells[4]);
    r.best_report = std::stod(cells[5]);
    r.loss_c = std::stod(cells[6]);
    r.loss_e = std::stod(cells[7]);
    r.kl = std::stod(cells[8]);
    r.epsilon = std::stod(cells[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_latent_csv(const std::filesystem::path& path, std::span<const LatentRow> rows, bool append) {
  const bool header = !append || !std::filesystem::exists(path);
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write latent trace '{}'", path.string()));
  const std::size_t d = rows.empty() ? 0 : rows.front().mean.size();
  if (header) {
    out << "task,epoch";
    for (std::size_t i = 0; i < d; ++i) out << ",z_mean_" << i;
    for (std::size_t i = 0; i < d; ++i) out << ",z_" << i;
    out << '\n';
  }
  for (const auto& r : rows) {
    out << r.task << ',' << r.epoch;
    for (double v : r.mean) out << fmt::format(",{}", v);
    for (double v : r.z) out << fmt::format(",{}", v);
    out << '\n';
  }
}

}  // namespace catchnas
