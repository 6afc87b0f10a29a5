#include "catchnas/controller.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <iostream>
#include <limits>
#include <numeric>

namespace catchnas {

void PpoConfig::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("PPO clip must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("discount must lie in (0, 1]");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("GAE lambda must lie in (0, 1]");
  if (memory_size == 0) throw std::invalid_argument("PPO memory size must be positive");
}

Controller::Controller(ActionSchema schema, std::size_t latent_dim, std::vector<std::size_t> hidden, std::uint64_t seed)
    : schema_(std::move(schema)), latent_dim_(latent_dim) {
  std::vector<std::size_t> dims{latent_dim + schema_.onehot_width()};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(schema_.onehot_width() + 1);
  net_ = Mlp(dims, Activation::tanh, seed);
}

Controller::Controller(ActionSchema schema, Mlp net, std::size_t latent_dim)
    : schema_(std::move(schema)), net_(std::move(net)), latent_dim_(latent_dim) {
  if (net_.input_dim() != latent_dim_ + schema_.onehot_width() || net_.output_dim() != schema_.onehot_width() + 1)
    throw ShapeError("controller network does not match the schema");
}

std::vector<double> Controller::state_input(std::span<const double> z, std::span<const int> prefix) const {
  if (z.size() != latent_dim_) throw ShapeError(fmt::format("z has {} entries, expected {}", z.size(), latent_dim_));
  std::vector<double> x(latent_dim_ + schema_.onehot_width());
  std::copy(z.begin(), z.end(), x.begin());
  write_onehot(schema_, prefix, std::span<double>(x).subspan(latent_dim_));
  return x;
}

PolicyOutput Controller::policy_step(std::span<const double> z, std::span<const int> prefix, const ActionMask& mask) const {
  const std::size_t l = prefix.size();
  if (l >= schema_.size()) throw ShapeError("policy step past the last slot");
  const auto out = net_.forward(state_input(z, prefix));
  const std::span<const double> logits(out.data() + schema_.offset(l), schema_.option_count(l));
  return PolicyOutput{masked_softmax(logits, mask), out.back()};
}

SampledNetwork Controller::sample(std::span<const double> z, Rng& rng) const {
  SampledNetwork net;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t l = 0; l < schema_.size(); ++l) {
    StepRecord step;
    step.z.assign(z.begin(), z.end());
    step.prefix = net.actions;
    step.mask = valid_action_mask(schema_, net.actions);
    const PolicyOutput out = policy_step(z, net.actions, step.mask);
    // Inverse-CDF draw restricted to allowed options.
    const double u = unit(rng);
    double acc = 0.0;
    int choice = -1;
    for (std::size_t k = 0; k < out.probs.size(); ++k) {
      if (!step.mask[k] || out.probs[k] <= 0.0) continue;
      choice = static_cast<int>(k);
      acc += out.probs[k];
      if (u < acc) break;
    }
    step.action = choice;
    step.old_log_prob = std::log(out.probs[static_cast<std::size_t>(choice)]);
    step.value = out.value;
    net.log_prob += step.old_log_prob;
    net.actions.push_back(choice);
    net.steps.push_back(std::move(step));
  }
  return net;
}

std::vector<SampledNetwork> Controller::sample_networks(std::span<const double> z, std::size_t count, Rng& rng) const {
  if (count == 0) throw std::invalid_argument("must sample at least one network");
  std::vector<SampledNetwork> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample(z, rng));
  return out;
}

std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values, double gamma,
                                   double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n && values.size() != n + 1)
    throw ShapeError(fmt::format("GAE got {} values for {} rewards", values.size(), n));
  const double bootstrap = values.size() == n + 1 ? values[n] : 0.0;
  std::vector<double> adv(n);
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next = t + 1 < n ? values[t + 1] : bootstrap;
    const double delta = rewards[t] + gamma * next - values[t];
    running = delta + gamma * lambda * running;
    adv[t] = running;
  }
  return adv;
}

void finish_trajectory(std::vector<StepRecord>& steps, double reward, const PpoConfig& config) {
  std::vector<double> rewards(steps.size(), config.terminal_reward_only ? 0.0 : reward);
  if (!rewards.empty()) rewards.back() = reward;
  std::vector<double> values(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) values[i] = steps[i].value;
  const auto adv = gae_advantages(rewards, values, config.gamma, config.lambda);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    steps[i].reward = rewards[i];
    steps[i].advantage = adv[i];
    steps[i].ret = adv[i] + values[i];
  }
}

std::vector<double> normalized_advantages(std::span<const StepRecord> steps) {
  std::vector<double> a(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) a[i] = steps[i].advantage;
  if (a.size() < 2) return std::vector<double>(a.size(), a.empty() ? 0.0 : a[0]);
  const double n = static_cast<double>(a.size());
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : a) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  for (double& v : a) v = (v - mean) / (sd + 1e-8);
  return a;
}

PpoReport ppo_objective(const Controller& controller, std::span<const StepRecord> steps,
                        std::span<const double> advantages, const PpoConfig& config, std::span<double> param_grad,
                        std::int64_t z_tag, std::span<double> dz) {
  if (advantages.size() != steps.size()) throw ShapeError("one advantage per step required");
  PpoReport report;
  report.steps = steps.size();
  if (steps.empty()) return report;
  const ActionSchema& schema = controller.schema();
  const Mlp& net = controller.net();
  const bool want_grad = !param_grad.empty();
  const double inv_n = 1.0 / static_cast<double>(steps.size());
  const std::size_t d = controller.latent_dim();

  MlpCache cache;
  std::vector<double> upstream(net.output_dim());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const StepRecord& s = steps[i];
    const std::size_t l = s.prefix.size();
    const auto out = net.forward(controller.state_input(s.z, s.prefix), cache);
    const std::size_t off = schema.offset(l);
    const std::span<const double> logits(out.data() + off, schema.option_count(l));
    const auto p = masked_softmax(logits, s.mask);
    const auto a = static_cast<std::size_t>(s.action);
    const double log_p = std::log(p[a]);
    const double ratio = std::exp(log_p - s.old_log_prob);
    const double A = advantages[i];
    const double clipped = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
    const double unclipped_term = ratio * A;
    const double clipped_term = clipped * A;
    const bool unclipped_active = unclipped_term <= clipped_term;
    const double surrogate = unclipped_active ? unclipped_term : clipped_term;

    double entropy = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
      if (s.mask[k] && p[k] > 0.0) entropy -= p[k] * std::log(p[k]);
    const double v = out.back();

    report.clip_loss -= surrogate * inv_n;
    report.value_loss += (v - s.ret) * (v - s.ret) * inv_n;
    report.entropy += entropy * inv_n;

    const bool route_z = !dz.empty() && s.tag == z_tag;
    if (!want_grad && !route_z) continue;
    std::fill(upstream.begin(), upstream.end(), 0.0);
    const double d_logp = unclipped_active ? -ratio * A * inv_n : 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (!s.mask[k]) continue;
      const double ind = k == a ? 1.0 : 0.0;
      double g = d_logp * (ind - p[k]);
      if (p[k] > 0.0) g += config.entropy_coeff * inv_n * p[k] * (std::log(p[k]) + entropy);
      upstream[off + k] = g;
    }
    upstream.back() = 2.0 * config.value_coeff * (v - s.ret) * inv_n;
    std::vector<double> scratch;
    std::span<double> target = param_grad;
    if (!want_grad) {
      scratch.assign(net.param_count(), 0.0);
      target = scratch;
    }
    const auto g_in = net.backward(cache, upstream, target);
    if (route_z)
      for (std::size_t k = 0; k < d; ++k) dz[k] += g_in[k];
  }
  report.total = report.clip_loss + config.value_coeff * report.value_loss - config.entropy_coeff * report.entropy;
  return report;
}

PpoTrainer::PpoTrainer(PpoConfig config, std::size_t param_count)
    : config_(config),
      adam_(AdamConfig{config.lr, 0.9, 0.999, 1e-8, config.scheduler_step, config.scheduler_gamma}, param_count) {
  config_.validate();
}

void PpoTrainer::add(std::vector<StepRecord> steps) {
  for (auto& s : steps) memory_.push_back(std::move(s));
  while (memory_.size() > config_.memory_size) memory_.pop_front();
}

PpoReport PpoTrainer::update(Controller& controller, std::int64_t z_tag, std::span<double> dz) {
  if (memory_.empty()) {
    std::cerr << "warning: PPO update skipped, memory is empty\n";
    return {};
  }
  const std::vector<StepRecord> batch(memory_.begin(), memory_.end());
  const auto adv = normalized_advantages(batch);
  std::vector<double> grad(controller.net().param_count());
  PpoReport first;
  for (std::size_t pass = 0; pass < std::max<std::size_t>(config_.epochs, 1); ++pass) {
    std::fill(grad.begin(), grad.end(), 0.0);
    const auto report = pass == 0 ? ppo_objective(controller, batch, adv, config_, grad, z_tag, dz)
                                  : ppo_objective(controller, batch, adv, config_, grad);
    if (pass == 0) first = report;
    if (!std::isfinite(report.total)) throw NumericError("non-finite PPO loss");
    adam_.step(controller.net().params(), grad);
  }
  first.updated = true;
  return first;
}

}  // namespace catchnas
