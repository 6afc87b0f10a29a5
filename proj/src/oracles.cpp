#include "catchnas/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numeric>

namespace catchnas {

namespace {

constexpr std::size_t kMaxEnumerable = 2'000'000;

double op_latency(const std::string& label) {
  if (label == "none") return 0.0;
  if (label == "skip_connect") return 0.05;
  if (label == "nor_conv_1x1") return 0.5;
  if (label == "nor_conv_3x3") return 1.5;
  if (label == "avg_pool_3x3") return 0.3;
  return -1.0;
}

// Deterministic value in [-1, 1] keyed by its arguments.
double hash_noise(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const std::uint64_t h = mix64(a ^ mix64(b ^ mix64(c)));
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

void RewardSpec::validate() const {
  if (latency_exponent > 0.0) throw std::invalid_argument("latency exponent must be <= 0");
  if (latency_target && !(*latency_target > 0.0)) throw std::invalid_argument("latency target must be positive");
  if (fidelity_epoch && *fidelity_epoch < 1) throw std::invalid_argument("fidelity epoch must be >= 1");
}

std::optional<double> TaskOracle::global_max(std::size_t, const RewardSpec&) const { return std::nullopt; }

std::size_t TaskOracle::task_index(const std::string& name) const {
  const auto& names = tasks();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw LookupError(fmt::format("unknown task '{}'", name));
  return static_cast<std::size_t>(it - names.begin());
}

double multiobjective_reward(double performance, std::optional<double> latency, const RewardSpec& spec) {
  spec.validate();
  if (!(performance >= 0.0)) throw std::invalid_argument("performance must be non-negative");
  if (!spec.latency_target) return performance;
  if (!latency) throw std::invalid_argument("latency target set but the oracle reported no latency");
  if (!(*latency > 0.0)) throw std::invalid_argument("latency must be positive");
  if (spec.latency_exponent == 0.0) return performance;
  return performance * std::pow(*latency / *spec.latency_target, spec.latency_exponent);
}

double agent_reward(const TaskOracle& oracle, const Evaluation& eval, const RewardSpec& spec) {
  return multiobjective_reward(eval.performance / oracle.performance_scale(), eval.latency, spec);
}

std::size_t sample_meta_task(std::span<const std::size_t> pool, Rng& rng) {
  if (pool.empty()) throw std::invalid_argument("meta task pool is empty");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman needs two equal-length samples");
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------

TabularBenchmark::TabularBenchmark(BenchHeader header, std::vector<float> payload)
    : header_(std::move(header)), payload_(std::move(payload)) {
  if (header_.arch_count != static_cast<std::size_t>(kCellCount))
    throw FormatError(fmt::format("benchmark holds {} architectures, expected {}", header_.arch_count, kCellCount));
  if (header_.epochs < 12) throw FormatError(fmt::format("epoch curves have {} entries, need at least 12", header_.epochs));
  if (header_.datasets.empty()) throw FormatError("benchmark lists no datasets");
  if (header_.ops.empty()) header_.ops = default_cell_ops();
  if (header_.ops.size() != kCellOps) throw FormatError("benchmark op vocabulary must have 5 entries");
  const std::size_t expected = header_.datasets.size() * header_.arch_count * metrics_per_arch();
  if (payload_.size() != expected)
    throw FormatError(fmt::format("payload holds {} values, header implies {}", payload_.size(), expected));
  schema_ = cell_schema(header_.ops);
}

std::size_t TabularBenchmark::at(std::size_t dataset, int index, std::size_t metric) const {
  if (dataset >= header_.datasets.size()) throw LookupError(fmt::format("unknown dataset #{}", dataset));
  if (index < 0 || index >= kCellCount) throw LookupError(fmt::format("unknown architecture index {}", index));
  return (dataset * header_.arch_count + static_cast<std::size_t>(index)) * metrics_per_arch() + metric;
}

float TabularBenchmark::val_acc(std::size_t dataset, int index, int epoch) const {
  if (epoch < 1 || static_cast<std::size_t>(epoch) > header_.epochs)
    throw LookupError(fmt::format("epoch {} beyond the stored curve (1..{})", epoch, header_.epochs));
  return payload_[at(dataset, index, static_cast<std::size_t>(epoch - 1))];
}

float TabularBenchmark::final_val_acc(std::size_t dataset, int index) const {
  return payload_[at(dataset, index, header_.epochs)];
}

float TabularBenchmark::final_test_acc(std::size_t dataset, int index) const {
  return payload_[at(dataset, index, header_.epochs + 1)];
}

BenchRecord TabularBenchmark::record(std::size_t dataset, int index) const {
  BenchRecord r;
  const std::size_t base = at(dataset, index, 0);
  r.val_acc_by_epoch.assign(payload_.begin() + static_cast<std::ptrdiff_t>(base),
                            payload_.begin() + static_cast<std::ptrdiff_t>(base + header_.epochs));
  r.final_val_acc = payload_[base + header_.epochs];
  r.final_test_acc = payload_[base + header_.epochs + 1];
  return r;
}

Evaluation TabularBenchmark::query(std::span<const int> actions, std::size_t task, const RewardSpec& spec) const {
  if (actions.size() != kCellEdges) throw LookupError("tabular benchmark expects a 6-edge cell architecture");
  CellArch arch;
  for (std::size_t i = 0; i < kCellEdges; ++i) {
    if (actions[i] < 0 || actions[i] >= static_cast<int>(kCellOps))
      throw LookupError(fmt::format("cell op {} out of range", actions[i]));
    arch.edge_ops[i] = actions[i];
  }
  const int index = cell_index(arch);
  const float v = spec.fidelity_epoch ? val_acc(task, index, *spec.fidelity_epoch) : final_val_acc(task, index);
  return Evaluation{static_cast<double>(v), std::nullopt};
}

std::optional<double> TabularBenchmark::global_max(std::size_t task, const RewardSpec& spec) const {
  float best = -std::numeric_limits<float>::infinity();
  for (int i = 0; i < kCellCount; ++i)
    best = std::max(best, spec.fidelity_epoch ? val_acc(task, i, *spec.fidelity_epoch) : final_val_acc(task, i));
  return static_cast<double>(best);
}

// ---------------------------------------------------------------------------

SyntheticOracle::SyntheticOracle(ActionSchema schema, SyntheticConfig config)
    : schema_(std::move(schema)), config_(config) {
  if (config_.task_count == 0) throw std::invalid_argument("synthetic family needs at least one task");
  const std::size_t L = schema_.size();

  Rng family(mix64(config_.family_seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> shared(L);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t k = 0; k < schema_.option_count(l); ++k) shared[l].push_back(normal(family));
  interactions_.resize(L);
  for (std::size_t l = 0; l + 1 < L; ++l) {
    interactions_[l].resize(schema_.option_count(l));
    for (auto& row : interactions_[l])
      for (std::size_t k = 0; k < schema_.option_count(l + 1); ++k) row.push_back(config_.interaction * normal(family));
  }

  // One shared shift per difficulty group: tasks with equal X resemble each other.
  std::vector<std::vector<std::vector<double>>> group_shift(3, std::vector<std::vector<double>>(L));
  for (auto& g : group_shift)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t k = 0; k < schema_.option_count(l); ++k) g[l].push_back(normal(family));

  latency_cost_.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    const Slot& s = schema_.slot(l);
    const double top = static_cast<double>(*std::max_element(s.values.begin(), s.values.end()));
    for (std::size_t k = 0; k < s.options.size(); ++k) {
      double c = op_latency(s.options[k]);
      if (c < 0.0) c = top > 0.0 ? static_cast<double>(s.values[k]) / top : 0.0;
      latency_cost_[l].push_back(c);
    }
  }

  std::size_t space = 1;
  enumerable_ = schema_.kind() != SpaceKind::macro;
  for (std::size_t l = 0; l < L && enumerable_; ++l) {
    space *= schema_.option_count(l);
    if (space > kMaxEnumerable) enumerable_ = false;
  }

  for (std::size_t t = 0; t < config_.task_count; ++t) {
    const int x = difficulty(t);
    names_.push_back(fmt::format("synthetic-{}-x{}", t, x));
    Rng task_rng(mix64(config_.family_seed ^ mix64(t + 1)));
    Task task;
    const double spread = config_.task_spread * static_cast<double>(x) / 20.0;
    task.weights = shared;
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t k = 0; k < task.weights[l].size(); ++k)
        task.weights[l][k] += config_.group_spread * group_shift[t % 3][l][k] + spread * normal(task_rng);

    if (enumerable_) {
      task.table.resize(space);
      Actions a(L, 0);
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      std::vector<double> raw(space);
      for (std::size_t i = 0; i < space; ++i) {
        std::size_t rest = i;
        for (std::size_t l = 0; l < L; ++l) {
          a[l] = static_cast<int>(rest % schema_.option_count(l));
          rest /= schema_.option_count(l);
        }
        raw[i] = raw_score(a, task);
        lo = std::min(lo, raw[i]);
        hi = std::max(hi, raw[i]);
      }
      task.lo = lo;
      task.hi = hi;
      for (std::size_t i = 0; i < space; ++i)
        task.table[i] = static_cast<float>(hi > lo ? (raw[i] - lo) / (hi - lo) : 1.0);
    } else {
      // Bound the score by per-term extremes; the optimum may then sit below 1.
      double lo = 0.0, hi = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        lo += *std::min_element(task.weights[l].begin(), task.weights[l].end());
        hi += *std::max_element(task.weights[l].begin(), task.weights[l].end());
      }
      for (std::size_t l = 0; l + 1 < L; ++l) {
        double rlo = std::numeric_limits<double>::infinity(), rhi = -rlo;
        for (auto& row : interactions_[l]) {
          rlo = std::min(rlo, *std::min_element(row.begin(), row.end()));
          rhi = std::max(rhi, *std::max_element(row.begin(), row.end()));
        }
        lo += rlo;
        hi += rhi;
      }
      task.lo = lo;
      task.hi = hi;
    }
    tasks_.push_back(std::move(task));
  }
}

int SyntheticOracle::difficulty(std::size_t task) const {
  static constexpr int classes[] = {10, 20, 30};
  return classes[task % 3];
}

double SyntheticOracle::raw_score(std::span<const int> actions, const Task& task) const {
  double s = 0.0;
  for (std::size_t l = 0; l < actions.size(); ++l) {
    s += task.weights[l][static_cast<std::size_t>(actions[l])];
    if (l + 1 < actions.size())
      s += interactions_[l][static_cast<std::size_t>(actions[l])][static_cast<std::size_t>(actions[l + 1])];
  }
  return s;
}

std::size_t SyntheticOracle::flat_index(std::span<const int> actions) const {
  std::size_t index = 0, scale = 1;
  for (std::size_t l = 0; l < actions.size(); ++l) {
    index += static_cast<std::size_t>(actions[l]) * scale;
    scale *= schema_.option_count(l);
  }
  return index;
}

double SyntheticOracle::final_reward(std::span<const int> actions, std::size_t task) const {
  if (task >= tasks_.size()) throw LookupError(fmt::format("unknown synthetic task #{}", task));
  if (!is_valid(schema_, actions)) throw LookupError("architecture is not valid for this oracle's schema");
  const Task& t = tasks_[task];
  if (enumerable_) return static_cast<double>(t.table[flat_index(actions)]);
  const double r = (raw_score(actions, t) - t.lo) / (t.hi - t.lo);
  return std::clamp(r, 0.0, 1.0);
}

double SyntheticOracle::latency(std::span<const int> actions) const {
  double lat = config_.latency_base;
  for (std::size_t l = 0; l < actions.size(); ++l) lat += latency_cost_[l][static_cast<std::size_t>(actions[l])];
  return lat;
}

Evaluation SyntheticOracle::query(std::span<const int> actions, std::size_t task, const RewardSpec& spec) const {
  const double final = final_reward(actions, task);
  double perf = final;
  if (spec.fidelity_epoch) {
    const int e = *spec.fidelity_epoch;
    if (e < 1 || e > config_.max_epoch)
      throw LookupError(fmt::format("epoch {} beyond the synthetic curve (1..{})", e, config_.max_epoch));
    const double noise = hash_noise(config_.family_seed ^ (task + 1), flat_index(actions), static_cast<std::uint64_t>(e));
    perf = final * (1.0 - 0.5 * std::exp(-e / 4.0)) + config_.noise_scale * noise / std::sqrt(static_cast<double>(e));
    perf = std::clamp(perf, 0.0, 1.0);
  }
  return Evaluation{perf, latency(actions)};
}

std::optional<double> SyntheticOracle::global_max(std::size_t task, const RewardSpec& spec) const {
  if (!enumerable_ || spec.fidelity_epoch) return std::nullopt;
  if (task >= tasks_.size()) throw LookupError(fmt::format("unknown synthetic task #{}", task));
  return static_cast<double>(*std::max_element(tasks_[task].table.begin(), tasks_[task].table.end()));
}

Actions SyntheticOracle::optimum(std::size_t task) const {
  if (!enumerable_) throw std::logic_error("optimum is only tracked for enumerable spaces");
  const auto& table = tasks_.at(task).table;
  std::size_t rest = static_cast<std::size_t>(std::max_element(table.begin(), table.end()) - table.begin());
  Actions a(schema_.size());
  for (std::size_t l = 0; l < a.size(); ++l) {
    a[l] = static_cast<int>(rest % schema_.option_count(l));
    rest /= schema_.option_count(l);
  }
  return a;
}

// ---------------------------------------------------------------------------

PlantedOracle::PlantedOracle(ActionSchema schema, Actions optimum)
    : schema_(std::move(schema)), optimum_(std::move(optimum)) {
  if (!is_valid(schema_, optimum_)) throw InvalidArchitecture("planted optimum is not a valid architecture");
}

Evaluation PlantedOracle::query(std::span<const int> actions, std::size_t task, const RewardSpec&) const {
  if (task != 0) throw LookupError(fmt::format("unknown task #{}", task));
  if (!is_valid(schema_, actions)) throw LookupError("architecture is not valid for this oracle's schema");
  std::size_t matches = 0;
  for (std::size_t l = 0; l < actions.size(); ++l) matches += actions[l] == optimum_[l];
  if (matches == actions.size()) return Evaluation{1.0, std::nullopt};
  return Evaluation{0.5 * static_cast<double>(matches) / static_cast<double>(actions.size()), std::nullopt};
}

}  // namespace catchnas
