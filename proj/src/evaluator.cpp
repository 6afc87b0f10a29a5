#include "catchnas/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <istream>
#include <ostream>

namespace catchnas {

namespace {
constexpr std::uint32_t kReplayMagic = 0x4C505243;  // "CRPL"
constexpr std::uint32_t kReplayVersion = 1;
}  // namespace

void PerConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("PER alpha must lie in [0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("PER beta must lie in [0, 1]");
  if (!(batch_fraction > 0.0 && batch_fraction <= 1.0)) throw std::invalid_argument("batch fraction must lie in (0, 1]");
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void EpsilonSchedule::reset(double initial) {
  if (!(initial >= 0.0 && initial <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  value_ = initial;
  selections_ = 0;
}

void EpsilonSchedule::on_selection() {
  ++selections_;
  if (config_.decay_every > 0 && selections_ % config_.decay_every == 0)
    value_ = std::max(0.0, value_ - config_.decay);
}

void ReplayBuffer::push(ReplayEntry entry) {
  entry.priority = entries_.empty() ? 1.0 : max_priority();
  entries_.push_back(std::move(entry));
  while (entries_.size() > capacity_) entries_.pop_front();
}

void ReplayBuffer::set_priority(std::size_t i, double priority) {
  if (!(priority > 0.0) || !std::isfinite(priority)) throw std::invalid_argument("priority must be finite and positive");
  entries_.at(i).priority = priority;
}

double ReplayBuffer::max_priority() const {
  double m = 0.0;
  for (auto& e : entries_) m = std::max(m, e.priority);
  return m;
}

void ReplayBuffer::write(std::ostream& os) const {
  binio::write<std::uint32_t>(os, kReplayMagic);
  binio::write<std::uint32_t>(os, kReplayVersion);
  binio::write<std::uint64_t>(os, capacity_);
  binio::write<std::uint64_t>(os, entries_.size());
  for (auto& e : entries_) {
    binio::write<std::uint64_t>(os, e.arch_onehot.size());
    binio::write_array(os, e.arch_onehot);
    binio::write<std::uint64_t>(os, e.z.size());
    binio::write_array(os, e.z);
    binio::write<double>(os, e.reward);
    binio::write<double>(os, e.priority);
    binio::write<std::int64_t>(os, e.tag);
  }
}

ReplayBuffer ReplayBuffer::read(std::istream& is) {
  if (binio::read<std::uint32_t>(is) != kReplayMagic) throw FormatError("not a replay snapshot (bad magic)");
  const auto version = binio::read<std::uint32_t>(is);
  if (version != kReplayVersion) throw FormatError(fmt::format("unsupported replay snapshot version {}", version));
  ReplayBuffer buffer(binio::read<std::uint64_t>(is));
  const auto count = binio::read<std::uint64_t>(is);
  if (count > buffer.capacity_) throw FormatError("replay snapshot exceeds its capacity");
  for (std::uint64_t i = 0; i < count; ++i) {
    ReplayEntry e;
    e.arch_onehot = binio::read_array<double>(is, binio::read<std::uint64_t>(is));
    e.z = binio::read_array<double>(is, binio::read<std::uint64_t>(is));
    e.reward = binio::read<double>(is);
    e.priority = binio::read<double>(is);
    e.tag = binio::read<std::int64_t>(is);
    buffer.entries_.push_back(std::move(e));
  }
  return buffer;
}

PerBatch per_sample(const ReplayBuffer& buffer, std::size_t batch_size, double alpha, double beta, Rng& rng) {
  PerBatch batch;
  const std::size_t n = buffer.size();
  if (n == 0 || batch_size == 0) return batch;
  batch_size = std::min(batch_size, n);
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::pow(buffer[i].priority, alpha);
    total += w[i];
  }
  std::vector<double> prob(n);
  for (std::size_t i = 0; i < n; ++i) prob[i] = w[i] / total;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::uint8_t> taken(n, 0);
  double remaining = total;
  for (std::size_t draw = 0; draw < batch_size; ++draw) {
    const double u = unit(rng) * remaining;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      pick = i;
      acc += w[i];
      if (u < acc) break;
    }
    taken[pick] = 1;
    remaining -= w[pick];
    batch.indices.push_back(pick);
  }

  double wmax = 0.0;
  for (auto i : batch.indices) {
    const double iw = std::pow(static_cast<double>(n) * prob[i], -beta);
    batch.weights.push_back(iw);
    wmax = std::max(wmax, iw);
  }
  for (auto& iw : batch.weights) iw /= wmax;
  return batch;
}

PerBatch per_sample_fraction(const ReplayBuffer& buffer, double fraction, double alpha, double beta, Rng& rng) {
  const auto size = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(buffer.size()) - 1e-9));
  return per_sample(buffer, std::max<std::size_t>(size, 1), alpha, beta, rng);
}

double huber_loss(double diff) {
  const double a = std::abs(diff);
  return a < 1.0 ? 0.5 * diff * diff : a - 0.5;
}

double huber_grad(double diff) {
  if (diff >= 1.0) return 1.0;
  if (diff <= -1.0) return -1.0;
  return diff;
}

Evaluator::Evaluator(std::size_t onehot_width, std::size_t latent_dim, std::vector<std::size_t> hidden,
                     std::uint64_t seed)
    : latent_dim_(latent_dim) {
  std::vector<std::size_t> dims{onehot_width + latent_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  net_ = Mlp(dims, Activation::relu, seed);
}

Evaluator::Evaluator(Mlp net, std::size_t latent_dim) : net_(std::move(net)), latent_dim_(latent_dim) {
  if (net_.output_dim() != 1) throw ShapeError("evaluator network must emit a single score");
}

namespace {
std::vector<double> evaluator_input(std::span<const double> onehot, std::span<const double> z) {
  std::vector<double> x(onehot.begin(), onehot.end());
  x.insert(x.end(), z.begin(), z.end());
  return x;
}
}  // namespace

double Evaluator::score(std::span<const double> arch_onehot, std::span<const double> z) const {
  if (z.size() != latent_dim_) throw ShapeError(fmt::format("z has {} entries, expected {}", z.size(), latent_dim_));
  return net_.forward(evaluator_input(arch_onehot, z))[0];
}

std::size_t choose_best(std::span<const double> scores, double epsilon, Rng& rng) {
  if (scores.empty()) throw std::invalid_argument("choose_best needs at least one candidate");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, scores.size() - 1);
    return pick(rng);
  }
  return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

std::size_t choose_best(const Evaluator& evaluator, std::span<const std::vector<double>> candidates,
                        std::span<const double> z, double epsilon, Rng& rng) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (auto& c : candidates) scores.push_back(evaluator.score(c, z));
  return choose_best(scores, epsilon, rng);
}

EvaluatorTrainer::EvaluatorTrainer(PerConfig config, std::size_t param_count)
    : config_(config), adam_(AdamConfig{config.lr, 0.9, 0.999, 1e-8, 0, 1.0}, param_count), beta_(config.beta) {
  config_.validate();
}

EvaluatorReport EvaluatorTrainer::loss(const Evaluator& evaluator, const ReplayBuffer& buffer, const PerBatch& batch,
                                       std::span<double> param_grad, std::int64_t z_tag, std::span<double> dz,
                                       std::vector<double>* errors) {
  EvaluatorReport report;
  report.batch = batch.indices.size();
  if (batch.indices.empty()) return report;
  const double inv_n = 1.0 / static_cast<double>(batch.indices.size());
  const Mlp& net = evaluator.net();
  const std::size_t d = evaluator.latent_dim();
  MlpCache cache;
  std::vector<double> scratch;
  for (std::size_t j = 0; j < batch.indices.size(); ++j) {
    const ReplayEntry& e = buffer[batch.indices[j]];
    const double pred = net.forward(evaluator_input(e.arch_onehot, e.z), cache)[0];
    const double diff = pred - e.reward;
    if (errors) errors->push_back(diff);
    report.loss += batch.weights[j] * huber_loss(diff) * inv_n;
    const bool route_z = !dz.empty() && e.tag == z_tag;
    if (param_grad.empty() && !route_z) continue;
    const double up = batch.weights[j] * huber_grad(diff) * inv_n;
    std::span<double> target = param_grad;
    if (target.empty()) {
      scratch.assign(net.param_count(), 0.0);
      target = scratch;
    }
    const auto g_in = net.backward(cache, std::span<const double>(&up, 1), target);
    if (route_z)
      for (std::size_t k = 0; k < d; ++k) dz[k] += g_in[e.arch_onehot.size() + k];
  }
  return report;
}

EvaluatorReport EvaluatorTrainer::update(Evaluator& evaluator, ReplayBuffer& buffer, const PerBatch& batch,
                                         std::int64_t z_tag, std::span<double> dz) {
  if (batch.indices.empty()) return {};
  std::vector<double> grad(evaluator.net().param_count(), 0.0);
  std::vector<double> errors;
  auto report = loss(evaluator, buffer, batch, grad, z_tag, dz, &errors);
  if (!std::isfinite(report.loss)) throw NumericError("non-finite evaluator loss");
  adam_.step(evaluator.net().params(), grad);
  for (std::size_t j = 0; j < batch.indices.size(); ++j)
    buffer.set_priority(batch.indices[j], std::abs(errors[j]) + config_.priority_floor);
  beta_ = std::min(1.0, beta_ + config_.beta_step);
  report.updated = true;
  return report;
}

EvaluatorReport EvaluatorTrainer::update(Evaluator& evaluator, ReplayBuffer& buffer, Rng& rng, std::int64_t z_tag,
                                         std::span<double> dz) {
  if (buffer.empty()) return {};
  const auto batch = per_sample_fraction(buffer, config_.batch_fraction, config_.alpha, beta_, rng);
  return update(evaluator, buffer, batch, z_tag, dz);
}

}  // namespace catchnas
