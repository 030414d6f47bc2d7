#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nrvc/sampling.hpp"

using namespace nrvc;

TEST_CASE("axis coordinates span [-1, 1] with linspace endpoints") {
  CHECK(axis_coord(0, 3) == -1.0);
  CHECK(axis_coord(1, 3) == 0.0);
  CHECK(axis_coord(2, 3) == 1.0);
  CHECK(axis_coord(0, 1) == 0.0);  // degenerate axis
}

TEST_CASE("140x140 slice grid has 19600 rows") {
  CoordinateGrid g = make_grid(140, 140, 96, GridMode::Slice2D);
  CHECK(g.rows() == 19600);
  CHECK(g.in_dim() == 2);
}

TEST_CASE("3D grid covers nx*ny*nz rows with z slowest") {
  CoordinateGrid g = make_grid(3, 4, 5, GridMode::Volume3D);
  CHECK(g.rows() == 60);
  CHECK(g.coords(0, 2) == -1.0);
  CHECK(g.coords(59, 2) == 1.0);
  // x fastest: consecutive rows step x first
  CHECK(g.coords(1, 0) > g.coords(0, 0));
  CHECK(g.coords(1, 1) == g.coords(0, 1));
}

TEST_CASE("grid coordinates are symmetric under axis negation") {
  CoordinateGrid g = make_grid(5, 4, 1, GridMode::Slice2D);
  for (long r = 0; r < g.rows(); ++r) {
    const int x = static_cast<int>(r) % 5;
    const int y = static_cast<int>(r) / 5;
    const long mirror = (4 - x) + 5 * static_cast<long>(y);
    CHECK(g.coords(mirror, 0) == doctest::Approx(-g.coords(r, 0)));
  }
}

TEST_CASE("slice_targets matches the slice's samples") {
  Volume4D v;
  v.nx = v.ny = v.nz = 2;
  v.m = 3;
  v.data.resize(v.sample_count());
  for (std::size_t i = 0; i < v.data.size(); ++i)
    v.data[i] = static_cast<float>(i);
  Eigen::MatrixXd t = slice_targets(v, 0);
  REQUIRE(t.rows() == 4);
  REQUIRE(t.cols() == 3);
  for (int meas = 0; meas < 3; ++meas)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x)
        CHECK(t(x + 2 * y, meas) == v.at(x, y, 0, meas));
}

TEST_CASE("slice index out of range raises") {
  Volume4D v;
  v.nx = v.ny = v.nz = 2;
  v.m = 1;
  v.data.resize(v.sample_count());
  CHECK_THROWS_AS(slice_targets(v, 2), IndexError);
  CHECK_THROWS_AS(slice_targets(v, -1), IndexError);
}

TEST_CASE("grid row <-> voxel index map is a bijection (brute force)") {
  const int nx = 7, ny = 5;
  Volume4D v;
  v.nx = nx;
  v.ny = ny;
  v.nz = 2;
  v.m = 1;
  v.data.resize(v.sample_count());
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x)
        v.at(x, y, z, 0) = static_cast<float>(1000 * z + 10 * y + x);

  CoordinateGrid g = make_grid(nx, ny, 1, GridMode::Slice2D);
  Eigen::MatrixXd t = slice_targets(v, 1);
  std::vector<bool> seen(nx * ny, false);
  for (long k = 0; k < g.rows(); ++k) {
    // Recover the voxel from the coordinate pair and check row k matches it.
    const int x = static_cast<int>(std::lround((g.coords(k, 0) + 1) / 2 * (nx - 1)));
    const int y = static_cast<int>(std::lround((g.coords(k, 1) + 1) / 2 * (ny - 1)));
    REQUIRE(!seen[x + nx * y]);
    seen[x + nx * y] = true;
    CHECK(t(k, 0) == v.at(x, y, 1, 0));
  }
}
