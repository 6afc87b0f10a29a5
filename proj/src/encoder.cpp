#include "catchnas/encoder.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numeric>

namespace catchnas {

std::vector<double> context_input(const ContextPair& context) {
  std::vector<double> x(context.arch_onehot);
  x.push_back(context.reward_norm);
  return x;
}

namespace {

Gaussian split_output(std::span<const double> out, std::size_t d) {
  if (out.size() != 2 * d) throw ShapeError(fmt::format("encoder emits {} values, expected {}", out.size(), 2 * d));
  Gaussian g;
  g.mean.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(d));
  g.var.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::isfinite(out[i]) || !std::isfinite(out[d + i])) throw NumericError("encoder produced a non-finite output");
    g.var[i] = softplus(out[d + i]);
  }
  return g;
}

}  // namespace

Gaussian encode_factor(const Mlp& encoder, const ContextPair& context, std::size_t latent_dim) {
  return split_output(encoder.forward(context_input(context)), latent_dim);
}

Gaussian product_of_gaussians(std::span<const Gaussian> factors) {
  if (factors.empty()) throw std::invalid_argument("product of Gaussians needs at least one factor");
  const std::size_t d = factors.front().mean.size();
  Gaussian out{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  std::vector<double> precision(d, 0.0);
  for (const auto& f : factors) {
    if (f.mean.size() != d || f.var.size() != d) throw ShapeError("Gaussian factors disagree in dimension");
    for (std::size_t i = 0; i < d; ++i) {
      if (!(f.var[i] > 0.0)) throw std::invalid_argument("Gaussian factor variance must be positive");
      precision[i] += 1.0 / f.var[i];
      out.mean[i] += f.mean[i] / f.var[i];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    out.var[i] = 1.0 / precision[i];
    out.mean[i] *= out.var[i];
  }
  return out;
}

LatentSample sample_latent(const LatentPosterior& posterior, std::span<const double> noise) {
  if (noise.size() != posterior.mean.size()) throw ShapeError("noise and posterior differ in dimension");
  LatentSample s{std::vector<double>(noise.size()), std::vector<double>(noise.begin(), noise.end())};
  for (std::size_t i = 0; i < noise.size(); ++i) s.z[i] = posterior.mean[i] + std::sqrt(posterior.var[i]) * noise[i];
  return s;
}

LatentSample sample_latent(const LatentPosterior& posterior, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(posterior.mean.size());
  for (auto& e : noise) e = normal(rng);
  return sample_latent(posterior, noise);
}

double kl_to_unit_prior(const LatentPosterior& posterior) {
  double kl = 0.0;
  for (std::size_t i = 0; i < posterior.mean.size(); ++i) {
    const double v = posterior.var[i];
    const double m = posterior.mean[i];
    kl += 0.5 * (v + m * m - 1.0 - std::log(v));
  }
  return kl;
}

std::vector<double> normalize_rewards(std::span<const double> rewards) {
  if (rewards.empty()) throw std::invalid_argument("cannot normalize an empty reward list");
  for (double r : rewards)
    if (!std::isfinite(r)) throw NumericError("non-finite reward in context batch");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / n);
  std::vector<double> out(rewards.size(), 0.0);
  if (rewards.size() < 2 || !(sd > 1e-12)) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

ContextEncoder::ContextEncoder(std::size_t onehot_width, std::vector<std::size_t> hidden, std::uint64_t seed,
                               std::size_t latent_dim)
    : latent_dim_(latent_dim) {
  std::vector<std::size_t> dims{onehot_width + 1};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(2 * latent_dim);
  net_ = Mlp(dims, Activation::tanh, seed);
}

ContextEncoder::ContextEncoder(Mlp net, std::size_t latent_dim) : net_(std::move(net)), latent_dim_(latent_dim) {
  if (net_.output_dim() != 2 * latent_dim_) throw ShapeError("encoder output width must be twice the latent dimension");
}

ContextEncoder::Pass ContextEncoder::forward_factors(std::span<const ContextPair> contexts) const {
  if (contexts.empty()) throw std::invalid_argument("encoder needs at least one context");
  Pass pass;
  pass.caches.resize(contexts.size());
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    pass.raw.push_back(net_.forward(context_input(contexts[i]), pass.caches[i]));
    pass.factors.push_back(split_output(pass.raw.back(), latent_dim_));
  }
  pass.posterior = product_of_gaussians(pass.factors);
  pass.kl = kl_to_unit_prior(pass.posterior);
  return pass;
}

ContextEncoder::Pass ContextEncoder::encode(std::span<const ContextPair> contexts, Rng& rng) const {
  Pass pass = forward_factors(contexts);
  pass.sample = sample_latent(pass.posterior, rng);
  return pass;
}

ContextEncoder::Pass ContextEncoder::encode(std::span<const ContextPair> contexts, std::span<const double> noise) const {
  Pass pass = forward_factors(contexts);
  pass.sample = sample_latent(pass.posterior, noise);
  return pass;
}

void ContextEncoder::backward(const Pass& pass, std::span<const double> dz, double beta,
                              std::span<double> param_grad) const {
  const std::size_t d = latent_dim_;
  if (dz.size() != d) throw ShapeError("dL/dz has the wrong dimension");
  const auto& mu = pass.posterior.mean;
  const auto& var = pass.posterior.var;

  // Gradients with respect to the product posterior's mean and variance.
  std::vector<double> d_mean(d), d_var(d);
  for (std::size_t k = 0; k < d; ++k) {
    d_mean[k] = dz[k] + beta * mu[k];
    d_var[k] = dz[k] * pass.sample.noise[k] / (2.0 * std::sqrt(var[k])) + beta * 0.5 * (1.0 - 1.0 / var[k]);
  }

  std::vector<double> upstream(2 * d);
  for (std::size_t i = 0; i < pass.factors.size(); ++i) {
    const Gaussian& f = pass.factors[i];
    for (std::size_t k = 0; k < d; ++k) {
      const double vi = f.var[k];
      const double dmu_i = d_mean[k] * var[k] / vi;
      const double dvar_i = d_var[k] * var[k] * var[k] / (vi * vi) + d_mean[k] * var[k] * (mu[k] - f.mean[k]) / (vi * vi);
      upstream[k] = dmu_i;
      upstream[d + k] = dvar_i * sigmoid(pass.raw[i][d + k]);
    }
    net_.backward(pass.caches[i], upstream, param_grad);
  }
}

}  // namespace catchnas
