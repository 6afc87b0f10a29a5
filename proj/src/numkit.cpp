#include "catchnas/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <istream>
#include <limits>
#include <ostream>

namespace catchnas {

namespace {

constexpr std::uint32_t kMlpMagic = 0x504C4D43;  // "CMLP"
constexpr std::uint32_t kMlpVersion = 1;

double activate(Activation act, double x) {
  switch (act) {
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::identity: return x;
  }
  return x;
}

// Derivative expressed through the activation output.
double activate_grad(Activation act, double out) {
  switch (act) {
    case Activation::tanh: return 1.0 - out * out;
    case Activation::relu: return out > 0.0 ? 1.0 : 0.0;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

}  // namespace

std::size_t mlp_param_count(std::span<const std::size_t> dims) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) n += dims[i] * dims[i + 1] + dims[i + 1];
  return n;
}

void Mlp::layout() {
  if (dims_.size() < 2) throw ShapeError("Mlp needs at least an input and an output dimension");
  for (auto d : dims_)
    if (d == 0) throw ShapeError("Mlp layer dimensions must be positive");
  offsets_.clear();
  std::size_t off = 0;
  for (std::size_t k = 0; k < layer_count(); ++k) {
    offsets_.push_back(off);
    off += dims_[k] * dims_[k + 1] + dims_[k + 1];
  }
  params_.assign(off, 0.0);
}

Mlp::Mlp(std::vector<std::size_t> dims, Activation hidden, std::uint64_t seed)
    : dims_(std::move(dims)), hidden_(hidden) {
  layout();
  Rng rng(seed);
  for (std::size_t k = 0; k < layer_count(); ++k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[k]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : weights(k)) w = dist(rng);
    for (auto& b : biases(k)) b = dist(rng);
  }
}

Mlp Mlp::zeros(std::vector<std::size_t> dims, Activation hidden) {
  Mlp net;
  net.dims_ = std::move(dims);
  net.hidden_ = hidden;
  net.layout();
  return net;
}

std::span<double> Mlp::weights(std::size_t layer) {
  return std::span<double>(params_).subspan(offsets_.at(layer), dims_[layer] * dims_[layer + 1]);
}

std::span<double> Mlp::biases(std::size_t layer) {
  return std::span<double>(params_).subspan(offsets_.at(layer) + dims_[layer] * dims_[layer + 1],
                                            dims_[layer + 1]);
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  MlpCache cache;
  return forward(input, cache);
}

std::vector<double> Mlp::forward(std::span<const double> input, MlpCache& cache) const {
  if (input.size() != input_dim())
    throw ShapeError(fmt::format("Mlp input has {} entries, expected {}", input.size(), input_dim()));
  const std::size_t layers = layer_count();
  cache.inputs.resize(layers);
  cache.outputs.resize(layers);
  cache.inputs[0].assign(input.begin(), input.end());
  for (std::size_t k = 0; k < layers; ++k) {
    const std::size_t in = dims_[k];
    const std::size_t out = dims_[k + 1];
    const double* w = params_.data() + offsets_[k];
    const double* b = w + in * out;
    const std::vector<double>& x = cache.inputs[k];
    std::vector<double>& y = cache.outputs[k];
    y.resize(out);
    const bool last = (k + 1 == layers);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = w + o * in;
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
      y[o] = last ? acc : activate(hidden_, acc);
    }
    if (!last) cache.inputs[k + 1] = y;
  }
  return cache.outputs.back();
}

std::vector<double> Mlp::backward(const MlpCache& cache, std::span<const double> upstream,
                                  std::span<double> param_grad) const {
  const std::size_t layers = layer_count();
  if (cache.inputs.size() != layers || cache.outputs.size() != layers)
    throw ShapeError("Mlp::backward called without a matching forward pass");
  if (upstream.size() != output_dim())
    throw ShapeError(fmt::format("upstream gradient has {} entries, expected {}", upstream.size(),
                                 output_dim()));
  if (param_grad.size() != param_count())
    throw ShapeError(fmt::format("parameter gradient buffer has {} entries, expected {}",
                                 param_grad.size(), param_count()));

  std::vector<double> g(upstream.begin(), upstream.end());
  for (std::size_t k = layers; k-- > 0;) {
    const std::size_t in = dims_[k];
    const std::size_t out = dims_[k + 1];
    if (k + 1 != layers) {
      const std::vector<double>& y = cache.outputs[k];
      for (std::size_t o = 0; o < out; ++o) g[o] *= activate_grad(hidden_, y[o]);
    }
    const std::vector<double>& x = cache.inputs[k];
    const double* w = params_.data() + offsets_[k];
    double* gw = param_grad.data() + offsets_[k];
    double* gb = gw + in * out;
    std::vector<double> g_in(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double go = g[o];
      gb[o] += go;
      if (go == 0.0) continue;
      const double* row = w + o * in;
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        grow[i] += go * x[i];
        g_in[i] += go * row[i];
      }
    }
    g = std::move(g_in);
  }
  return g;
}

Adam::Adam(AdamConfig config, std::size_t param_count)
    : config_(config), m_(param_count, 0.0), v_(param_count, 0.0) {}

double Adam::current_lr() const {
  if (config_.scheduler_step == 0) return config_.lr;
  const auto decays = static_cast<double>(steps_ / config_.scheduler_step);
  return config_.lr * std::pow(config_.scheduler_gamma, decays);
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ShapeError(fmt::format("Adam state has {} entries; got {} params and {} grads", m_.size(),
                                 params.size(), grads.size()));
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw NumericError(fmt::format("non-finite gradient at index {} ({}); update rejected", i, grads[i]));

  const double lr = current_lr();
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

std::vector<double> softplus(std::span<const double> x) {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [](double v) { return softplus(v); });
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> masked_softmax(std::span<const double> logits, std::span<const std::uint8_t> mask) {
  if (logits.size() != mask.size())
    throw ShapeError(fmt::format("softmax mask has {} entries for {} logits", mask.size(), logits.size()));
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) hi = std::max(hi, logits[i]);
  if (hi == -std::numeric_limits<double>::infinity())
    throw std::invalid_argument("masked softmax: no allowed action");
  std::vector<double> p(logits.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    p[i] = std::exp(logits[i] - hi);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

void write_mlp(std::ostream& os, const Mlp& net) {
  binio::write<std::uint32_t>(os, kMlpMagic);
  binio::write<std::uint32_t>(os, kMlpVersion);
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(net.hidden_activation()));
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(net.dims().size()));
  for (auto d : net.dims()) binio::write<std::uint64_t>(os, d);
  binio::write<std::uint64_t>(os, net.param_count());
  os.write(reinterpret_cast<const char*>(net.params().data()),
           static_cast<std::streamsize>(net.param_count() * sizeof(double)));
}

Mlp read_mlp(std::istream& is) {
  if (binio::read<std::uint32_t>(is) != kMlpMagic) throw FormatError("not an MLP checkpoint (bad magic)");
  const auto version = binio::read<std::uint32_t>(is);
  if (version != kMlpVersion) throw FormatError(fmt::format("unsupported MLP checkpoint version {}", version));
  const auto act = binio::read<std::uint32_t>(is);
  if (act > 2) throw FormatError(fmt::format("unknown activation code {}", act));
  const auto n = binio::read<std::uint32_t>(is);
  if (n < 2 || n > 64) throw FormatError(fmt::format("implausible layer count {}", n));
  std::vector<std::size_t> dims;
  for (std::uint32_t i = 0; i < n; ++i) dims.push_back(binio::read<std::uint64_t>(is));
  Mlp net = Mlp::zeros(dims, static_cast<Activation>(act));
  const auto count = binio::read<std::uint64_t>(is);
  if (count != net.param_count())
    throw FormatError(fmt::format("checkpoint holds {} parameters, layer dims imply {}", count, net.param_count()));
  auto values = binio::read_array<double>(is, count);
  std::copy(values.begin(), values.end(), net.params().begin());
  for (double v : net.params())
    if (!std::isfinite(v)) throw FormatError("checkpoint contains non-finite parameters");
  return net;
}

}  // namespace catchnas
