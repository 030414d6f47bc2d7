#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "nrvc/errors.hpp"

namespace nrvc {

enum class Variant : uint8_t {
  SirenPure = 0,       // sine hidden layers, affine output
  SirenReluLast = 1,   // SirenPure with ReLU after the output affine
  MlpRelu = 2,
  MlpTanh = 3,
  HybridSirenFirst = 4 // sine on the first hidden layer, ReLU after
};

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct NetworkSpec {
  int in_dim = 2;
  int out_dim = 1;
  int hidden_layers = 3;
  int hidden_units = 256;
  Variant variant = Variant::SirenPure;
  double omega0 = 30.0;  // frequency scale on the first layer's pre-activation

  void validate() const {
    if (in_dim < 1 || out_dim < 1 || hidden_layers < 1 || hidden_units < 1)
      throw DomainError("invalid network spec");
  }
  int layer_count() const { return hidden_layers + 1; }
  int fan_in(int layer) const { return layer == 0 ? in_dim : hidden_units; }
  int fan_out(int layer) const {
    return layer == hidden_layers ? out_dim : hidden_units;
  }
};

/// Trainable tensors, one affine layer per entry (hidden layers then output).
struct NetworkParams {
  struct Layer {
    Eigen::MatrixXd W;  // fan_out x fan_in
    Eigen::VectorXd b;  // fan_out
  };
  std::vector<Layer> layers;
};

/// Weights i.i.d. uniform on [-sqrt(6/n), sqrt(6/n)] with n the layer's
/// fan-in, except the first layer which uses [-1/n, 1/n] (the forward pass
/// supplies the omega0 factor). Biases zero. Deterministic per seed.
NetworkParams init_params(const NetworkSpec& spec, uint64_t seed);

/// Evaluates the network on a batch of coordinate rows (rows x in_dim),
/// returning rows x out_dim.
Eigen::MatrixXd forward(const NetworkSpec& spec, const NetworkParams& params,
                        const Eigen::MatrixXd& inputs);

std::size_t param_count(const NetworkSpec& spec);

namespace detail {
bool hidden_is_sine(Variant v, int layer);
bool hidden_is_tanh(Variant v);
}  // namespace detail

}  // namespace nrvc
