#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nrvc/dwi.hpp"

using namespace nrvc;

namespace {

GradientTable tensor_scheme(int n_dirs) {
  return make_scheme(1, {{1000.0, n_dirs}});
}

Eigen::VectorXd synth_signals(const GradientTable& g, double s0,
                              const Eigen::Matrix3d& D) {
  Eigen::VectorXd s(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Eigen::Vector3d dir(g.directions[j][0], g.directions[j][1],
                              g.directions[j][2]);
    s(j) = s0 * std::exp(-g.b_values[j] * dir.dot(D * dir));
  }
  return s;
}

Eigen::Matrix3d random_rotation(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0, 1);
  Eigen::Matrix3d A;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) A(i, j) = gauss(rng);
  Eigen::HouseholderQR<Eigen::Matrix3d> qr(A);
  Eigen::Matrix3d Q = qr.householderQ();
  if (Q.determinant() < 0) Q.col(0) *= -1;
  return Q;
}

}  // namespace

TEST_CASE("noiseless tensor fit recovers D to 1e-9") {
  GradientTable g = tensor_scheme(30);
  Eigen::Matrix3d D = Eigen::Vector3d(1.7e-3, 0.3e-3, 0.3e-3).asDiagonal();
  Eigen::VectorXd s = synth_signals(g, 1200.0, D);
  TensorVoxel fit = fit_tensor(s, g);
  CHECK(fit.s0 == doctest::Approx(1200.0).epsilon(1e-9));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(fit.D(i, j) - D(i, j)) <= 1e-9);
  CHECK(fit.eigenvalues(0) == doctest::Approx(1.7e-3).epsilon(1e-7));
}

TEST_CASE("rotated tensor recovers off-diagonals too") {
  GradientTable g = tensor_scheme(30);
  Eigen::Matrix3d R = random_rotation(5);
  Eigen::Matrix3d D =
      R * Eigen::Vector3d(1.7e-3, 0.4e-3, 0.2e-3).asDiagonal() * R.transpose();
  Eigen::VectorXd s = synth_signals(g, 900.0, D);
  TensorVoxel fit = fit_tensor(s, g);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(fit.D(i, j) - D(i, j)) <= 1e-9);
}

TEST_CASE("isotropic signals give a diagonal tensor") {
  GradientTable g = tensor_scheme(20);
  Eigen::Matrix3d D = 1.1e-3 * Eigen::Matrix3d::Identity();
  Eigen::VectorXd s = synth_signals(g, 1000.0, D);
  TensorVoxel fit = fit_tensor(s, g);
  CHECK(std::abs(fit.D(0, 1)) < 1e-12);
  CHECK(std::abs(fit.D(0, 2)) < 1e-12);
  CHECK(std::abs(fit.D(1, 2)) < 1e-12);
  CHECK(fit.D(0, 0) == doctest::Approx(1.1e-3).epsilon(1e-9));
}

TEST_CASE("five directions are a degenerate scheme") {
  GradientTable g = tensor_scheme(5);
  Eigen::VectorXd s = Eigen::VectorXd::Ones(g.size());
  CHECK_THROWS_AS(fit_tensor(s, g), DomainError);
}

TEST_CASE("coplanar directions are rank deficient") {
  GradientTable g;
  g.b_values.assign(8, 1000.0);
  g.b_values.insert(g.b_values.begin(), 0.0);
  g.directions.push_back({0, 0, 0});
  for (int k = 0; k < 8; ++k) {
    const double a = k * std::numbers::pi / 8;
    g.directions.push_back({std::cos(a), std::sin(a), 0.0});
  }
  Eigen::VectorXd s = Eigen::VectorXd::Ones(g.size());
  CHECK_THROWS_AS(fit_tensor(s, g), DomainError);
}

TEST_CASE("fa/md hand values") {
  TensorVoxel fit;
  SUBCASE("isotropic") {
    fit.eigenvalues = Eigen::Vector3d(1e-3, 1e-3, 1e-3);
    auto [fa, md] = fa_md(fit);
    CHECK(fa == doctest::Approx(0.0));
    CHECK(md == doctest::Approx(1e-3));
  }
  SUBCASE("stick limit") {
    fit.eigenvalues = Eigen::Vector3d(1.0, 0.0, 0.0);
    auto [fa, md] = fa_md(fit);
    CHECK(fa == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(md == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("lambda (2,1,1)") {
    fit.eigenvalues = Eigen::Vector3d(2.0, 1.0, 1.0);
    auto [fa, md] = fa_md(fit);
    CHECK(fa == doctest::Approx(std::sqrt(1.0 / 6.0)).epsilon(1e-12));
    CHECK(md == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("zero tensor") {
    fit.eigenvalues = Eigen::Vector3d::Zero();
    auto [fa, md] = fa_md(fit);
    CHECK(fa == 0.0);
    CHECK(md == 0.0);
  }
}

TEST_CASE("FA stays in [0,1] for random non-negative eigenvalues") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(0.0, 3e-3);
  for (int k = 0; k < 200; ++k) {
    TensorVoxel fit;
    fit.eigenvalues = Eigen::Vector3d(dist(rng), dist(rng), dist(rng));
    auto [fa, md] = fa_md(fit);
    CHECK(fa >= 0.0);
    CHECK(fa <= 1.0 + 1e-12);
    CHECK(md == doctest::Approx(fit.eigenvalues.sum() / 3.0));
  }
}

TEST_CASE("constant unit signal projects onto c00 = sqrt(4 pi)") {
  GradientTable g = make_scheme(0, {{5000.0, 24}});
  Eigen::VectorXd s = Eigen::VectorXd::Ones(g.size());
  ShVoxel fit = fit_sh(s, g);
  CHECK(fit.coeffs(0) == doctest::Approx(std::sqrt(4.0 * std::numbers::pi))
                             .epsilon(1e-10));
  for (int k = 1; k < kShCoeffCount; ++k)
    CHECK(std::abs(fit.coeffs(k)) < 1e-10);
  CHECK(rish(fit, 0) == doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-9));
  CHECK(rish(fit, 2) <= 1e-18);
}

TEST_CASE("pure basis function round-trips through the fit") {
  GradientTable g = make_scheme(0, {{5000.0, 24}});
  for (int target : {3, 1, 10}) {  // Y20, Y22, Y40 slots
    Eigen::VectorXd s(g.size());
    for (std::size_t j = 0; j < g.size(); ++j)
      s(j) = sh_basis(target, g.directions[j]);
    ShVoxel fit = fit_sh(s, g);
    for (int k = 0; k < kShCoeffCount; ++k)
      CHECK(std::abs(fit.coeffs(k) - (k == target ? 1.0 : 0.0)) < 1e-9);
  }
}

TEST_CASE("band-limited signals resynthesize exactly at the fit directions") {
  GradientTable g = make_scheme(0, {{5000.0, 20}});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd coeffs(kShCoeffCount);
  for (int k = 0; k < kShCoeffCount; ++k) coeffs(k) = dist(rng);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(g.size());
  for (std::size_t j = 0; j < g.size(); ++j)
    for (int k = 0; k < kShCoeffCount; ++k)
      s(j) += coeffs(k) * sh_basis(k, g.directions[j]);
  ShVoxel fit = fit_sh(s, g);
  for (std::size_t j = 0; j < g.size(); ++j) {
    double resynth = 0.0;
    for (int k = 0; k < kShCoeffCount; ++k)
      resynth += fit.coeffs(k) * sh_basis(k, g.directions[j]);
    CHECK(std::abs(resynth - s(j)) < 1e-9);
  }
}

TEST_CASE("ten directions are underdetermined") {
  GradientTable g = make_scheme(0, {{5000.0, 10}});
  Eigen::VectorXd s = Eigen::VectorXd::Ones(10);
  CHECK_THROWS_AS(fit_sh(s, g), DomainError);
}

TEST_CASE("RISH is invariant under rotations of the direction set") {
  GradientTable g = make_scheme(0, {{5000.0, 24}});
  // A fixed band-limited signal function of direction.
  auto signal = [](const std::array<double, 3>& d) {
    return 1.0 + 0.5 * (3 * d[2] * d[2] - 1) + 0.3 * d[0] * d[1];
  };
  Eigen::VectorXd s(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) s(j) = signal(g.directions[j]);
  ShVoxel base = fit_sh(s, g);

  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Eigen::Matrix3d R = random_rotation(seed);
    GradientTable rotated = g;
    Eigen::VectorXd sr(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
      Eigen::Vector3d d(g.directions[j][0], g.directions[j][1],
                        g.directions[j][2]);
      Eigen::Vector3d rd = R * d;
      rotated.directions[j] = {rd(0), rd(1), rd(2)};
      // same physical signal sampled at the rotated frame's coordinates:
      // rotate the field along with the directions
      sr(j) = signal(g.directions[j]);
    }
    ShVoxel rot = fit_sh(sr, rotated);
    for (int l : {0, 2, 4})
      CHECK(rish(rot, l) == doctest::Approx(rish(base, l)).epsilon(1e-8));
  }
}

TEST_CASE("gaussian smoothing preserves constants and mass") {
  Volume4D v;
  v.nx = v.ny = 9;
  v.nz = 5;
  v.m = 1;
  v.data.assign(v.sample_count(), 3.25f);
  Volume4D s = gaussian_smooth(v, 1.5);
  for (float x : s.data) CHECK(x == doctest::Approx(3.25f).epsilon(1e-12));

  SUBCASE("unit impulse: center weight, total mass 1") {
    // interior-supported: the 4-sigma kernel (radius 3) stays in bounds
    v.nx = v.ny = v.nz = 9;
    v.m = 1;
    v.data.assign(v.sample_count(), 0.0f);
    v.at(4, 4, 4, 0) = 1.0f;
    Volume4D imp = gaussian_smooth(v, 1.5);
    // kernel center weight from the same construction rule
    const double sigma = 1.5 / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k)
      sum += std::exp(-0.5 * (k / sigma) * (k / sigma));
    const double w0 = 1.0 / sum;
    CHECK(imp.at(4, 4, 4, 0) == doctest::Approx(w0 * w0 * w0).epsilon(1e-6));
    double mass = 0.0;
    for (float x : imp.data) mass += x;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("smoothing commutes with adding a constant") {
  Volume4D v;
  v.nx = v.ny = 8;
  v.nz = 4;
  v.m = 2;
  v.data.resize(v.sample_count());
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<float> dist(0.f, 1.f);
  for (float& s : v.data) s = dist(rng);
  Volume4D shifted = v;
  for (float& s : shifted.data) s += 2.0f;
  Volume4D s1 = gaussian_smooth(shifted, 1.5);
  Volume4D s2 = gaussian_smooth(v, 1.5);
  for (std::size_t i = 0; i < v.data.size(); ++i)
    CHECK(s1.data[i] == doctest::Approx(s2.data[i] + 2.0f).epsilon(1e-5));
}

TEST_CASE("smoothing reduces per-slice variance of non-constant volumes") {
  Volume4D v;
  v.nx = v.ny = 12;
  v.nz = 3;
  v.m = 1;
  v.data.resize(v.sample_count());
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<float> dist(0.f, 1.f);
  for (float& s : v.data) s = dist(rng);
  Volume4D s = gaussian_smooth(v, 1.5);
  auto slice_var = [&](const Volume4D& vol, int z) {
    double mean = 0;
    for (int y = 0; y < vol.ny; ++y)
      for (int x = 0; x < vol.nx; ++x) mean += vol.at(x, y, z, 0);
    mean /= vol.nx * vol.ny;
    double var = 0;
    for (int y = 0; y < vol.ny; ++y)
      for (int x = 0; x < vol.nx; ++x) {
        const double d = vol.at(x, y, z, 0) - mean;
        var += d * d;
      }
    return var / (vol.nx * vol.ny);
  };
  for (int z = 0; z < 3; ++z) CHECK(slice_var(s, z) < slice_var(v, z));
}

TEST_CASE("noise-free phantom closes the loop with the tensor fit") {
  GradientTable g = tensor_scheme(15);
  Phantom phantom = make_phantom(16, 16, 2, g, 1, -1.0);
  TensorField fits = fit_tensor_volume(phantom.volume, g);
  const std::size_t vol = phantom.mask.labels.size();
  for (std::size_t i = 0; i < vol; ++i) {
    if (phantom.mask.labels[i] == TissueLabel::Background) continue;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        CHECK(std::abs(fits.voxels[i].D(r, c) -
                       phantom.ground_truth.voxels[i].D(r, c)) <= 1e-9);
  }
}

TEST_CASE("mask labels partition the grid and tissue classes all appear") {
  GradientTable g = tensor_scheme(8);
  Phantom phantom = make_phantom(20, 20, 2, g, 3, -1.0);
  std::size_t counts[4] = {0, 0, 0, 0};
  for (TissueLabel label : phantom.mask.labels)
    ++counts[static_cast<int>(label)];
  CHECK(counts[0] + counts[1] + counts[2] + counts[3] ==
        phantom.mask.labels.size());
  CHECK(counts[1] > 0);  // WM
  CHECK(counts[2] > 0);  // GM
  CHECK(counts[3] > 0);  // CSF
}

TEST_CASE("rician noise changes FA variance but not its mean by much") {
  GradientTable g = tensor_scheme(15);
  Phantom clean = make_phantom(24, 24, 2, g, 7, -1.0);
  Phantom noisy = make_phantom(24, 24, 2, g, 7, 30.0);
  TensorField clean_fit = fit_tensor_volume(clean.volume, g);
  TensorField noisy_fit = fit_tensor_volume(noisy.volume, g);

  auto wm_fa_stats = [&](const TensorField& field, const TissueMask& mask) {
    double sum = 0, ss = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < mask.labels.size(); ++i)
      if (mask.labels[i] == TissueLabel::WM) {
        const double fa = fa_md(field.voxels[i]).first;
        sum += fa;
        ss += fa * fa;
        ++n;
      }
    const double mean = sum / n;
    return std::pair<double, double>(mean, ss / n - mean * mean);
  };
  auto [clean_mean, clean_var] = wm_fa_stats(clean_fit, clean.mask);
  auto [noisy_mean, noisy_var] = wm_fa_stats(noisy_fit, noisy.mask);
  CHECK(noisy_var > clean_var);
  CHECK(std::abs(noisy_mean - clean_mean) < 0.05);
  // determinism per seed
  Phantom again = make_phantom(24, 24, 2, g, 7, 30.0);
  CHECK(again.volume.data == noisy.volume.data);
}
