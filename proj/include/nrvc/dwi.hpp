#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "nrvc/volume.hpp"

namespace nrvc {

/// Log-linear least-squares diffusion tensor for one voxel.
struct TensorVoxel {
  double s0 = 0.0;                 // native units
  Eigen::Matrix3d D;               // mm^2/s, symmetric
  Eigen::Vector3d eigenvalues;     // descending
  bool negative_eigenvalue = false;
};

struct TensorField {
  int nx = 0, ny = 0, nz = 0;
  std::vector<TensorVoxel> voxels;  // x fastest
};

/// Solves ln S = ln S0 - b g^T D g per voxel. Requires >= 1 b=0 measurement
/// and >= 6 b>0 directions spanning a full-rank design; signals are clamped
/// at `clamp` before the log.
TensorVoxel fit_tensor(const Eigen::VectorXd& signals, const GradientTable& g,
                       double clamp = 1e-8);
TensorField fit_tensor_volume(const Volume4D& v, const GradientTable& g,
                              double clamp = 1e-8);

std::pair<double, double> fa_md(const TensorVoxel& fit);
std::vector<double> fa_map(const TensorField& field);
std::vector<double> md_map(const TensorField& field);

/// Real symmetric spherical harmonics fit, even orders l in {0,2,4},
/// 15 coefficients ordered (l ascending, m descending within l).
struct ShVoxel {
  Eigen::VectorXd coeffs;  // 15 entries for order 4
};

struct ShField {
  int nx = 0, ny = 0, nz = 0;
  int order = 4;
  std::string basis = "real-sym-mdesc";
  std::vector<ShVoxel> voxels;
};

constexpr int kShCoeffCount = 15;  // order 4, even l

/// Value of real SH basis function; idx indexes the (l, m) layout above.
double sh_basis(int idx, const std::array<double, 3>& direction);

ShVoxel fit_sh(const Eigen::VectorXd& signals, const GradientTable& g,
               int order = 4, double reg_weight = 0.0);
ShField fit_sh_volume(const Volume4D& v, const GradientTable& g,
                      int order = 4, double reg_weight = 0.0);

/// RISH_l = sum_m c_{l,m}^2.
double rish(const ShVoxel& fit, int l);
std::vector<double> rish_map(const ShField& field, int l);

/// Separable 3D Gaussian with sigma = fwhm / (2 sqrt(2 ln 2)) voxels,
/// truncated at 4 sigma, taps renormalized at the edges; applied per
/// measurement.
Volume4D gaussian_smooth(const Volume4D& v, double fwhm_voxels);

/// Deterministic well-spread unit vectors (spiral points on the hemisphere).
std::vector<std::array<double, 3>> spread_directions(int n);

/// b=0 rows followed by shells at the given b-values with spread directions.
GradientTable make_scheme(int n_b0, const std::vector<std::pair<double, int>>& shells);

struct Phantom {
  Volume4D volume;
  TissueMask mask;
  TensorField ground_truth;
};

/// Piecewise-smooth tissue phantom: anisotropic WM ring with tangentially
/// rotating principal direction, isotropic GM shell and CSF core, background
/// outside. Optional Rician noise; snr <= 0 means noise-free. SNR is defined
/// on the mean b=0 signal over tissue.
Phantom make_phantom(int nx, int ny, int nz, const GradientTable& scheme,
                     uint64_t seed, double snr);

}  // namespace nrvc
