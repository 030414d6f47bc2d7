#include "nrvc/sampling.hpp"

namespace nrvc {

double axis_coord(int i, int n) {
  if (n <= 1) return 0.0;
  return -1.0 + 2.0 * i / (n - 1);
}

CoordinateGrid make_grid(int nx, int ny, int nz, GridMode mode) {
  if (nx <= 0 || ny <= 0 || nz <= 0)
    throw DomainError("make_grid: non-positive dimension");
  CoordinateGrid grid;
  grid.mode = mode;
  grid.dims = {nx, ny, nz};
  if (mode == GridMode::Slice2D) {
    grid.coords.resize(static_cast<long>(nx) * ny, 2);
    long row = 0;
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x, ++row) {
        grid.coords(row, 0) = axis_coord(x, nx);
        grid.coords(row, 1) = axis_coord(y, ny);
      }
  } else {
    grid.coords.resize(static_cast<long>(nx) * ny * nz, 3);
    long row = 0;
    for (int z = 0; z < nz; ++z)
      for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x, ++row) {
          grid.coords(row, 0) = axis_coord(x, nx);
          grid.coords(row, 1) = axis_coord(y, ny);
          grid.coords(row, 2) = axis_coord(z, nz);
        }
  }
  return grid;
}

Eigen::MatrixXd slice_targets(const Volume4D& v, int z) {
  if (z < 0 || z >= v.nz)
    throw IndexError("slice_targets: z=" + std::to_string(z) + " out of range");
  Eigen::MatrixXd t(static_cast<long>(v.nx) * v.ny, v.m);
  for (int meas = 0; meas < v.m; ++meas) {
    long row = 0;
    for (int y = 0; y < v.ny; ++y)
      for (int x = 0; x < v.nx; ++x, ++row) t(row, meas) = v.at(x, y, z, meas);
  }
  return t;
}

Eigen::MatrixXd volume_targets(const Volume4D& v) {
  Eigen::MatrixXd t(static_cast<long>(v.nx) * v.ny * v.nz, v.m);
  for (int meas = 0; meas < v.m; ++meas) {
    long row = 0;
    for (int z = 0; z < v.nz; ++z)
      for (int y = 0; y < v.ny; ++y)
        for (int x = 0; x < v.nx; ++x, ++row) t(row, meas) = v.at(x, y, z, meas);
  }
  return t;
}

}  // namespace nrvc
