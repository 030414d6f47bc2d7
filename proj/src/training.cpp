#include "nrvc/training.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

namespace nrvc {

AdamState make_adam_state(const NetworkParams& params) {
  AdamState state;
  state.m.resize(params.layers.size());
  state.v.resize(params.layers.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& layer = params.layers[i];
    state.m[i].W = Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols());
    state.m[i].b = Eigen::VectorXd::Zero(layer.b.size());
    state.v[i].W = Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols());
    state.v[i].b = Eigen::VectorXd::Zero(layer.b.size());
  }
  return state;
}

double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("mse_loss: shape mismatch");
  return (pred - target).array().square().mean();
}

namespace {

// Shared forward/backward pass; returns the loss and fills grads.
double forward_backward(const NetworkSpec& spec, const NetworkParams& params,
                        const Eigen::MatrixXd& inputs,
                        const Eigen::MatrixXd& targets, NetworkParams& grads) {
  if (inputs.cols() != spec.in_dim)
    throw ShapeError("backward: input dimension mismatch");
  if (inputs.rows() != targets.rows() || targets.cols() != spec.out_dim)
    throw ShapeError("backward: target shape mismatch");

  const int n_hidden = spec.hidden_layers;
  std::vector<Eigen::MatrixXd> acts(n_hidden + 1);  // layer inputs
  std::vector<Eigen::MatrixXd> pre(n_hidden);       // hidden pre-activations
  acts[0] = inputs;
  for (int i = 0; i < n_hidden; ++i) {
    const auto& layer = params.layers[i];
    pre[i] = (acts[i] * layer.W.transpose()).rowwise() + layer.b.transpose();
    if (detail::hidden_is_sine(spec.variant, i)) {
      const double scale = (i == 0) ? spec.omega0 : 1.0;
      acts[i + 1] = (scale * pre[i]).array().sin();
    } else if (detail::hidden_is_tanh(spec.variant)) {
      acts[i + 1] = pre[i].array().tanh();
    } else {
      acts[i + 1] = pre[i].array().max(0.0);
    }
  }
  const auto& out = params.layers.back();
  Eigen::MatrixXd y =
      (acts[n_hidden] * out.W.transpose()).rowwise() + out.b.transpose();
  Eigen::MatrixXd y_post =
      (spec.variant == Variant::SirenReluLast) ? y.array().max(0.0).matrix() : y;

  const double n_entries = static_cast<double>(y.rows()) * y.cols();
  const double loss = (y_post - targets).array().square().sum() / n_entries;

  Eigen::MatrixXd delta = 2.0 * (y_post - targets) / n_entries;
  if (spec.variant == Variant::SirenReluLast)
    delta = delta.array() * (y.array() > 0.0).cast<double>();

  grads.layers.resize(params.layers.size());
  grads.layers.back().W = delta.transpose() * acts[n_hidden];
  grads.layers.back().b = delta.colwise().sum().transpose();

  Eigen::MatrixXd dh = delta * out.W;
  for (int i = n_hidden - 1; i >= 0; --i) {
    Eigen::MatrixXd dz;
    if (detail::hidden_is_sine(spec.variant, i)) {
      const double scale = (i == 0) ? spec.omega0 : 1.0;
      dz = dh.array() * (scale * (scale * pre[i]).array().cos());
    } else if (detail::hidden_is_tanh(spec.variant)) {
      dz = dh.array() * (1.0 - acts[i + 1].array().square());
    } else {
      dz = dh.array() * (pre[i].array() > 0.0).cast<double>();
    }
    grads.layers[i].W = dz.transpose() * acts[i];
    grads.layers[i].b = dz.colwise().sum().transpose();
    if (i > 0) dh = dz * params.layers[i].W;
  }
  return loss;
}

double psnr_of(double mse) {
  return mse > 0 ? -10.0 * std::log10(mse)
                 : std::numeric_limits<double>::infinity();
}

}  // namespace

NetworkParams backward(const NetworkSpec& spec, const NetworkParams& params,
                       const Eigen::MatrixXd& inputs,
                       const Eigen::MatrixXd& targets) {
  NetworkParams grads;
  forward_backward(spec, params, inputs, targets, grads);
  return grads;
}

void adam_step(NetworkParams& params, const NetworkParams& grads,
               AdamState& state, const TrainConfig& config, int t) {
  if (t < 1) throw DomainError("adam_step: step index must be >= 1");
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v.array() = config.beta2 * v.array() + (1.0 - config.beta2) * g.array().square();
    theta.array() -= config.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + config.epsilon);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].W, grads.layers[i].W, state.m[i].W, state.v[i].W);
    update(params.layers[i].b, grads.layers[i].b, state.m[i].b, state.v[i].b);
  }
}

std::pair<NetworkParams, TrainTrace> encode_slice(
    const Eigen::MatrixXd& targets, const CoordinateGrid& grid,
    const NetworkSpec& spec, const TrainConfig& config) {
  config.validate();
  spec.validate();
  if (grid.rows() != targets.rows())
    throw ShapeError("encode_slice: grid rows != target rows");
  if (targets.cols() != spec.out_dim)
    throw ShapeError("encode_slice: target columns != out_dim");

  const auto t0 = std::chrono::steady_clock::now();
  NetworkParams params = init_params(spec, config.seed);
  AdamState state = make_adam_state(params);
  TrainTrace trace;
  NetworkParams grads;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double loss =
        forward_backward(spec, params, grid.coords, targets, grads);
    if (!std::isfinite(loss))
      throw DivergenceError(
          "loss diverged at epoch " + std::to_string(epoch), epoch);
    if ((epoch - 1) % config.loss_log_stride == 0) {
      trace.epochs.push_back(epoch - 1);
      trace.mse.push_back(loss);
      trace.psnr.push_back(psnr_of(loss));
    }
    adam_step(params, grads, state, config, epoch);
  }
  // Loss of the parameters actually returned.
  const double final_loss =
      mse_loss(forward(spec, params, grid.coords), targets);
  if (!std::isfinite(final_loss))
    throw DivergenceError("loss diverged after final step", config.epochs);
  trace.epochs.push_back(config.epochs);
  trace.mse.push_back(final_loss);
  trace.psnr.push_back(psnr_of(final_loss));
  trace.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return {std::move(params), std::move(trace)};
}

EncodeResult encode_volume(const Volume4D& v, const NetworkSpec& spec,
                           const TrainConfig& config, GridMode mode,
                           int jobs) {
  if (!v.normalized)
    throw DomainError("encode_volume: volume must be normalized first");
  EncodeResult result;
  if (mode == GridMode::Volume3D) {
    NetworkSpec s3 = spec;
    s3.in_dim = 3;
    const CoordinateGrid grid = make_grid(v.nx, v.ny, v.nz, mode);
    auto [params, trace] = encode_slice(volume_targets(v), grid, s3, config);
    result.networks.push_back(std::move(params));
    result.traces.push_back(std::move(trace));
    return result;
  }

  NetworkSpec s2 = spec;
  s2.in_dim = 2;
  const CoordinateGrid grid = make_grid(v.nx, v.ny, 1, GridMode::Slice2D);
  result.networks.resize(v.nz);
  result.traces.resize(v.nz);

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string error_msg;
  int error_epoch = 0, error_slice = -1;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const int z = next.fetch_add(1);
      if (z >= v.nz || failed.load()) break;
      TrainConfig slice_config = config;
      slice_config.seed = config.seed + static_cast<uint64_t>(z);
      try {
        auto [params, trace] =
            encode_slice(slice_targets(v, z), grid, s2, slice_config);
        result.networks[z] = std::move(params);
        result.traces[z] = std::move(trace);
      } catch (const DivergenceError& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) {
          error_msg = std::string(e.what()) + " (slice " + std::to_string(z) + ")";
          error_epoch = e.epoch;
          error_slice = z;
        }
      }
    }
  };

  const int n_threads = std::max(1, std::min(jobs, v.nz));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw DivergenceError(error_msg, error_epoch, error_slice);
  return result;
}

void write_trace_csv(const std::vector<TrainTrace>& traces,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace CSV: " + path);
  out << "network,epoch,mse,psnr\n";
  out.precision(17);
  for (std::size_t n = 0; n < traces.size(); ++n)
    for (std::size_t i = 0; i < traces[n].epochs.size(); ++i)
      out << n << ',' << traces[n].epochs[i] << ',' << traces[n].mse[i] << ','
          << traces[n].psnr[i] << '\n';
}

}  // namespace nrvc
