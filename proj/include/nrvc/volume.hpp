#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nrvc/errors.hpp"

namespace nrvc {

/// Dense 4D image: spatial grid (nx, ny, nz) times m measurements.
/// Samples are stored x-fastest (NIfTI order): index = x + nx*(y + ny*(z + nz*m)).
struct Volume4D {
  int nx = 0, ny = 0, nz = 0, m = 0;
  std::array<float, 3> voxel_size{1.0f, 1.0f, 1.0f};
  std::vector<float> data;

  // Native-unit bounds recorded by normalize(); needed to restore native units.
  double norm_min = 0.0;
  double norm_max = 0.0;
  bool normalized = false;

  // Raw NIfTI header bytes from read_nifti, passed through untouched on write.
  std::vector<uint8_t> raw_header;

  std::size_t sample_count() const {
    return static_cast<std::size_t>(nx) * ny * nz * m;
  }
  std::size_t flat(int x, int y, int z, int meas) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(nx) *
               (static_cast<std::size_t>(y) +
                static_cast<std::size_t>(ny) *
                    (static_cast<std::size_t>(z) +
                     static_cast<std::size_t>(nz) * meas));
  }
  float& at(int x, int y, int z, int meas) { return data[flat(x, y, z, meas)]; }
  float at(int x, int y, int z, int meas) const { return data[flat(x, y, z, meas)]; }
};

/// Diffusion acquisition scheme (FSL bvals/bvecs convention).
struct GradientTable {
  std::vector<double> b_values;                   // s/mm^2
  std::vector<std::array<double, 3>> directions;  // unit vectors; zero allowed at b=0
  std::size_t size() const { return b_values.size(); }
};

enum class TissueLabel : uint8_t { Background = 0, WM = 1, GM = 2, CSF = 3 };

struct TissueMask {
  int nx = 0, ny = 0, nz = 0;
  std::vector<TissueLabel> labels;  // x fastest

  std::size_t flat(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(nx) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny) * z);
  }
  TissueLabel at(int x, int y, int z) const { return labels[flat(x, y, z)]; }
};

/// Maps all samples to [0,1] with one global (min, max) pair; a constant
/// volume maps to all zeros with the bounds still recorded.
Volume4D normalize(const Volume4D& v);

/// Inverse of normalize via the recorded bounds.
Volume4D denormalize(const Volume4D& v);

/// Sub-volume and sub-table of measurements with |b - b_target| <= tol.
std::pair<Volume4D, GradientTable> select_shell(const Volume4D& v,
                                                const GradientTable& g,
                                                double b_target, double tol);

GradientTable read_gradient_table(const std::string& bvals_path,
                                  const std::string& bvecs_path);

}  // namespace nrvc
