#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "catchnas/common.hpp"
#include "catchnas/numkit.hpp"

namespace catchnas {

inline constexpr std::size_t kLatentDim = 10;

/// One (architecture, reward) observation fed to the encoder.
struct ContextPair {
  std::vector<double> arch_onehot;
  double reward_norm = 0.0;
};

/// Diagonal Gaussian; `var` is the variance, strictly positive.
struct Gaussian {
  std::vector<double> mean;
  std::vector<double> var;
};

using LatentPosterior = Gaussian;

/// z = mean + sqrt(var) * noise. The noise is kept for the reparameterized backward pass.
struct LatentSample {
  std::vector<double> z;
  std::vector<double> noise;
};

/// Per-context factor: the first D outputs are the mean, softplus of the last D the variance.
Gaussian encode_factor(const Mlp& encoder, const ContextPair& context, std::size_t latent_dim = kLatentDim);

/// Precision-weighted product: var = 1 / sum(1/var_i), mean = var * sum(mean_i / var_i).
Gaussian product_of_gaussians(std::span<const Gaussian> factors);

LatentSample sample_latent(const LatentPosterior& posterior, Rng& rng);
LatentSample sample_latent(const LatentPosterior& posterior, std::span<const double> noise);

/// KL(q || N(0, I)) = sum 0.5 (var + mean^2 - 1 - ln var).
double kl_to_unit_prior(const LatentPosterior& posterior);

/// z-score; constant or single-element input maps to zeros.
std::vector<double> normalize_rewards(std::span<const double> rewards);

/// Encoder network input: arch one-hot followed by the normalized reward.
std::vector<double> context_input(const ContextPair& context);

/// Probabilistic context encoder q(z | c_1..N) built on an MLP.
class ContextEncoder {
 public:
  /// Everything the backward pass needs from one encoding.
  struct Pass {
    std::vector<MlpCache> caches;
    std::vector<std::vector<double>> raw;  // network outputs per context
    std::vector<Gaussian> factors;
    LatentPosterior posterior;
    LatentSample sample;
    double kl = 0.0;
  };

  ContextEncoder() = default;
  ContextEncoder(std::size_t onehot_width, std::vector<std::size_t> hidden, std::uint64_t seed,
                 std::size_t latent_dim = kLatentDim);
  explicit ContextEncoder(Mlp net, std::size_t latent_dim = kLatentDim);

  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  std::size_t latent_dim() const { return latent_dim_; }

  Pass encode(std::span<const ContextPair> contexts, Rng& rng) const;
  Pass encode(std::span<const ContextPair> contexts, std::span<const double> noise) const;

  /// Accumulates into `param_grad` the gradient of  L_down(z) + beta * KL,
  /// given dL_down/dz, through the reparameterized sample and the product of factors.
  void backward(const Pass& pass, std::span<const double> dz, double beta, std::span<double> param_grad) const;

 private:
  Pass forward_factors(std::span<const ContextPair> contexts) const;

  Mlp net_;
  std::size_t latent_dim_ = kLatentDim;
};

}  // namespace catchnas
