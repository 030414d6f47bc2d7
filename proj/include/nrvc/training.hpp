#pragma once

#include <string>
#include <vector>

#include "nrvc/network.hpp"
#include "nrvc/sampling.hpp"
#include "nrvc/volume.hpp"

namespace nrvc {

struct TrainConfig {
  int epochs = 2000;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  uint64_t seed = 0;
  int loss_log_stride = 1;

  void validate() const {
    if (epochs < 1) throw DomainError("epochs must be >= 1");
    if (learning_rate <= 0) throw DomainError("learning rate must be > 0");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
      throw DomainError("Adam betas must lie in [0, 1)");
    if (epsilon <= 0) throw DomainError("Adam epsilon must be > 0");
    if (loss_log_stride < 1) throw DomainError("log stride must be >= 1");
  }
};

struct TrainTrace {
  std::vector<int> epochs;
  std::vector<double> mse;
  std::vector<double> psnr;  // -10 log10(mse) at each logged point
  double wall_time_sec = 0.0;
};

struct AdamState {
  std::vector<NetworkParams::Layer> m;  // first moments, same shapes as params
  std::vector<NetworkParams::Layer> v;  // second moments
};

AdamState make_adam_state(const NetworkParams& params);

double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

/// Analytic gradients of mse_loss(forward(inputs), targets) w.r.t. every
/// weight and bias.
NetworkParams backward(const NetworkSpec& spec, const NetworkParams& params,
                       const Eigen::MatrixXd& inputs,
                       const Eigen::MatrixXd& targets);

/// One bias-corrected Adam update (t is 1-based), in place.
void adam_step(NetworkParams& params, const NetworkParams& grads,
               AdamState& state, const TrainConfig& config, int t);

/// Overfits one network to the given targets: full batch, one Adam step per
/// epoch, parameters after the last step returned (no checkpoint selection).
std::pair<NetworkParams, TrainTrace> encode_slice(
    const Eigen::MatrixXd& targets, const CoordinateGrid& grid,
    const NetworkSpec& spec, const TrainConfig& config);

struct EncodeResult {
  std::vector<NetworkParams> networks;  // one per slice, or one for 3D mode
  std::vector<TrainTrace> traces;
};

/// Slice2D: nz independent fits with per-slice seed = config.seed + z,
/// run on `jobs` threads. Volume3D: a single fit over the 3D grid.
EncodeResult encode_volume(const Volume4D& v, const NetworkSpec& spec,
                           const TrainConfig& config, GridMode mode,
                           int jobs = 1);

void write_trace_csv(const std::vector<TrainTrace>& traces,
                     const std::string& path);

}  // namespace nrvc
