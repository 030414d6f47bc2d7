#pragma once

#include <Eigen/Dense>

#include "nrvc/volume.hpp"

namespace nrvc {

enum class GridMode : uint8_t { Slice2D = 0, Volume3D = 1 };

/// Full raster grid of network inputs. Each axis of length n > 1 is sampled
/// at n evenly spaced points from -1 to +1; a length-1 axis maps to 0.
/// Rows are flattened x-fastest: row k of a Slice2D grid is voxel
/// (k % nx, k / nx); Volume3D adds z as the slowest axis.
struct CoordinateGrid {
  GridMode mode;
  std::array<int, 3> dims;          // nx, ny, nz (nz unused for Slice2D)
  Eigen::MatrixXd coords;           // rows x in_dim, entries in [-1, 1]

  int in_dim() const { return mode == GridMode::Slice2D ? 2 : 3; }
  long rows() const { return coords.rows(); }
};

CoordinateGrid make_grid(int nx, int ny, int nz, GridMode mode);

/// Axis coordinate for index i of an axis of length n.
double axis_coord(int i, int n);

/// (nx*ny) x m matrix of slice z's samples, row order matching make_grid.
Eigen::MatrixXd slice_targets(const Volume4D& v, int z);

/// Full-volume targets, (nx*ny*nz) x m, row order matching the 3D grid.
Eigen::MatrixXd volume_targets(const Volume4D& v);

}  // namespace nrvc
