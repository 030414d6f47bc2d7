#include "nrvc/network.hpp"

#include <cmath>
#include <random>

namespace nrvc {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::SirenPure: return "siren";
    case Variant::SirenReluLast: return "siren-relu";
    case Variant::MlpRelu: return "mlp-relu";
    case Variant::MlpTanh: return "mlp-tanh";
    case Variant::HybridSirenFirst: return "hybrid";
  }
  throw DomainError("unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "siren") return Variant::SirenPure;
  if (name == "siren-relu") return Variant::SirenReluLast;
  if (name == "mlp-relu") return Variant::MlpRelu;
  if (name == "mlp-tanh") return Variant::MlpTanh;
  if (name == "hybrid") return Variant::HybridSirenFirst;
  throw DomainError("unknown variant name: " + name);
}

namespace {

// Uniform double in [0, 1) from the top 53 bits; keeps init reproducible
// across standard libraries.
double uniform01(std::mt19937_64& rng) {
  return (rng() >> 11) * 0x1.0p-53;
}

}  // namespace

NetworkParams init_params(const NetworkSpec& spec, uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  NetworkParams params;
  params.layers.resize(spec.layer_count());
  for (int i = 0; i < spec.layer_count(); ++i) {
    const int fan_in = spec.fan_in(i);
    const int fan_out = spec.fan_out(i);
    const double bound =
        (i == 0) ? 1.0 / fan_in : std::sqrt(6.0 / fan_in);
    auto& layer = params.layers[i];
    layer.W.resize(fan_out, fan_in);
    // Row-major draw order so the stream is independent of Eigen's storage.
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c)
        layer.W(r, c) = bound * (2.0 * uniform01(rng) - 1.0);
    layer.b = Eigen::VectorXd::Zero(fan_out);
  }
  return params;
}

namespace detail {

bool hidden_is_sine(Variant v, int layer) {
  switch (v) {
    case Variant::SirenPure:
    case Variant::SirenReluLast:
      return true;
    case Variant::HybridSirenFirst:
      return layer == 0;
    default:
      return false;
  }
}

bool hidden_is_tanh(Variant v) { return v == Variant::MlpTanh; }

}  // namespace detail

Eigen::MatrixXd forward(const NetworkSpec& spec, const NetworkParams& params,
                        const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != spec.in_dim)
    throw ShapeError("forward: input dimension mismatch");
  if (params.layers.size() != static_cast<std::size_t>(spec.layer_count()))
    throw ShapeError("forward: layer count mismatch");

  Eigen::MatrixXd h = inputs;
  for (int i = 0; i < spec.hidden_layers; ++i) {
    const auto& layer = params.layers[i];
    Eigen::MatrixXd z =
        (h * layer.W.transpose()).rowwise() + layer.b.transpose();
    if (detail::hidden_is_sine(spec.variant, i)) {
      const double scale = (i == 0) ? spec.omega0 : 1.0;
      h = (scale * z).array().sin();
    } else if (detail::hidden_is_tanh(spec.variant)) {
      h = z.array().tanh();
    } else {
      h = z.array().max(0.0);
    }
  }
  const auto& out = params.layers.back();
  Eigen::MatrixXd y = (h * out.W.transpose()).rowwise() + out.b.transpose();
  if (spec.variant == Variant::SirenReluLast) y = y.array().max(0.0);
  return y;
}

std::size_t param_count(const NetworkSpec& spec) {
  std::size_t n = 0;
  for (int i = 0; i < spec.layer_count(); ++i)
    n += static_cast<std::size_t>(spec.fan_out(i)) * spec.fan_in(i) +
         spec.fan_out(i);
  return n;
}

}  // namespace nrvc
