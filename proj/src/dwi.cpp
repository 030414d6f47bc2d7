#include "nrvc/dwi.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace nrvc {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kB0Threshold = 1e-6;  // s/mm^2

// (l, m) layout: l ascending over {0, 2, 4}, m descending within each l.
struct LmIndex {
  int l, m;
};
constexpr LmIndex kLm[kShCoeffCount] = {
    {0, 0},  {2, 2},  {2, 1},  {2, 0},  {2, -1}, {2, -2}, {4, 4}, {4, 3},
    {4, 2},  {4, 1},  {4, 0},  {4, -1}, {4, -2}, {4, -3}, {4, -4}};

double factorial_ratio(int l, int m) {
  // (l - m)! / (l + m)!
  double r = 1.0;
  for (int k = l - m + 1; k <= l + m; ++k) r /= k;
  return r;
}

Eigen::MatrixXd tensor_design(const GradientTable& g) {
  Eigen::MatrixXd A(g.size(), 7);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double b = g.b_values[j];
    const auto& d = g.directions[j];
    A(j, 0) = 1.0;
    A(j, 1) = -b * d[0] * d[0];
    A(j, 2) = -b * d[1] * d[1];
    A(j, 3) = -b * d[2] * d[2];
    A(j, 4) = -2.0 * b * d[0] * d[1];
    A(j, 5) = -2.0 * b * d[0] * d[2];
    A(j, 6) = -2.0 * b * d[1] * d[2];
  }
  return A;
}

void check_tensor_scheme(const GradientTable& g) {
  int n_b0 = 0, n_dwi = 0;
  for (double b : g.b_values) (b <= kB0Threshold ? n_b0 : n_dwi)++;
  if (n_b0 < 1 || n_dwi < 6)
    throw DomainError(
        "fit_tensor: scheme needs >= 1 b=0 and >= 6 b>0 measurements");
}

TensorVoxel solve_tensor(const Eigen::VectorXd& signals,
                         const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                         double clamp) {
  Eigen::VectorXd y(signals.size());
  for (long j = 0; j < signals.size(); ++j)
    y(j) = std::log(std::max(signals(j), clamp));
  const Eigen::VectorXd x = qr.solve(y);

  TensorVoxel fit;
  fit.s0 = std::exp(x(0));
  fit.D << x(1), x(4), x(5), x(4), x(2), x(6), x(5), x(6), x(3);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(fit.D);
  fit.eigenvalues = es.eigenvalues().reverse();
  fit.negative_eigenvalue = fit.eigenvalues(2) < 0;
  return fit;
}

Eigen::MatrixXd sh_design(const GradientTable& g) {
  Eigen::MatrixXd B(g.size(), kShCoeffCount);
  for (std::size_t j = 0; j < g.size(); ++j)
    for (int k = 0; k < kShCoeffCount; ++k)
      B(j, k) = sh_basis(k, g.directions[j]);
  return B;
}

}  // namespace

double sh_basis(int idx, const std::array<double, 3>& direction) {
  if (idx < 0 || idx >= kShCoeffCount) throw IndexError("sh_basis: bad index");
  const int l = kLm[idx].l;
  const int m = kLm[idx].m;
  const int am = std::abs(m);
  const double cos_theta = direction[2];
  const double phi = std::atan2(direction[1], direction[0]);
  const double norm =
      std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * factorial_ratio(l, am));
  const double p = std::assoc_legendre(l, am, cos_theta);
  if (m == 0) return norm * p;
  const double sqrt2 = std::numbers::sqrt2;
  return m > 0 ? sqrt2 * norm * p * std::cos(am * phi)
               : sqrt2 * norm * p * std::sin(am * phi);
}

TensorVoxel fit_tensor(const Eigen::VectorXd& signals, const GradientTable& g,
                       double clamp) {
  if (signals.size() != static_cast<long>(g.size()))
    throw ShapeError("fit_tensor: signal/table length mismatch");
  check_tensor_scheme(g);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(tensor_design(g));
  if (qr.rank() < 7)
    throw DomainError("fit_tensor: degenerate scheme (rank-deficient design)");
  return solve_tensor(signals, qr, clamp);
}

TensorField fit_tensor_volume(const Volume4D& v, const GradientTable& g,
                              double clamp) {
  if (static_cast<std::size_t>(v.m) != g.size())
    throw ShapeError("fit_tensor_volume: table length != measurement count");
  check_tensor_scheme(g);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(tensor_design(g));
  if (qr.rank() < 7)
    throw DomainError("fit_tensor: degenerate scheme (rank-deficient design)");

  TensorField field;
  field.nx = v.nx;
  field.ny = v.ny;
  field.nz = v.nz;
  const std::size_t vol = static_cast<std::size_t>(v.nx) * v.ny * v.nz;
  field.voxels.resize(vol);
  Eigen::VectorXd signals(v.m);
  for (std::size_t i = 0; i < vol; ++i) {
    for (int j = 0; j < v.m; ++j) signals(j) = v.data[vol * j + i];
    field.voxels[i] = solve_tensor(signals, qr, clamp);
  }
  return field;
}

std::pair<double, double> fa_md(const TensorVoxel& fit) {
  const Eigen::Vector3d& ev = fit.eigenvalues;
  const double md = ev.sum() / 3.0;
  const double norm = ev.norm();
  if (norm == 0.0) return {0.0, md};
  const double fa =
      std::sqrt(1.5) * (ev.array() - md).matrix().norm() / norm;
  return {fa, md};
}

std::vector<double> fa_map(const TensorField& field) {
  std::vector<double> out(field.voxels.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = fa_md(field.voxels[i]).first;
  return out;
}

std::vector<double> md_map(const TensorField& field) {
  std::vector<double> out(field.voxels.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = fa_md(field.voxels[i]).second;
  return out;
}

ShVoxel fit_sh(const Eigen::VectorXd& signals, const GradientTable& g,
               int order, double reg_weight) {
  if (order != 4) throw UnsupportedError("fit_sh: only order 4 supported");
  if (signals.size() != static_cast<long>(g.size()))
    throw ShapeError("fit_sh: signal/table length mismatch");
  if (g.size() < kShCoeffCount)
    throw DomainError("fit_sh: underdetermined (need >= 15 directions)");
  Eigen::MatrixXd B = sh_design(g);
  Eigen::MatrixXd lhs = B.transpose() * B;
  if (reg_weight > 0)
    lhs += reg_weight * Eigen::MatrixXd::Identity(kShCoeffCount, kShCoeffCount);
  Eigen::LDLT<Eigen::MatrixXd> solver(lhs);
  ShVoxel fit;
  fit.coeffs = solver.solve(B.transpose() * signals);
  return fit;
}

ShField fit_sh_volume(const Volume4D& v, const GradientTable& g, int order,
                      double reg_weight) {
  if (order != 4) throw UnsupportedError("fit_sh: only order 4 supported");
  if (static_cast<std::size_t>(v.m) != g.size())
    throw ShapeError("fit_sh_volume: table length != measurement count");
  if (g.size() < kShCoeffCount)
    throw DomainError("fit_sh: underdetermined (need >= 15 directions)");
  Eigen::MatrixXd B = sh_design(g);
  Eigen::MatrixXd lhs = B.transpose() * B;
  if (reg_weight > 0)
    lhs += reg_weight * Eigen::MatrixXd::Identity(kShCoeffCount, kShCoeffCount);
  Eigen::LDLT<Eigen::MatrixXd> solver(lhs);

  ShField field;
  field.nx = v.nx;
  field.ny = v.ny;
  field.nz = v.nz;
  field.order = order;
  const std::size_t vol = static_cast<std::size_t>(v.nx) * v.ny * v.nz;
  field.voxels.resize(vol);
  Eigen::VectorXd signals(v.m);
  for (std::size_t i = 0; i < vol; ++i) {
    for (int j = 0; j < v.m; ++j) signals(j) = v.data[vol * j + i];
    field.voxels[i].coeffs = solver.solve(B.transpose() * signals);
  }
  return field;
}

double rish(const ShVoxel& fit, int l) {
  if (l != 0 && l != 2 && l != 4) throw DomainError("rish: l must be 0, 2 or 4");
  double acc = 0.0;
  for (int k = 0; k < kShCoeffCount; ++k)
    if (kLm[k].l == l) acc += fit.coeffs(k) * fit.coeffs(k);
  return acc;
}

std::vector<double> rish_map(const ShField& field, int l) {
  std::vector<double> out(field.voxels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rish(field.voxels[i], l);
  return out;
}

namespace {

// One axis pass with edge renormalization over in-bounds taps.
void smooth_axis(std::vector<float>& data, int nx, int ny, int nz, int m,
                 int axis, const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size()) / 2;
  const int len = axis == 0 ? nx : axis == 1 ? ny : nz;
  std::vector<float> line(len);
  auto index = [&](int x, int y, int z, int meas) {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(nx) *
               (y + static_cast<std::size_t>(ny) * (z + static_cast<std::size_t>(nz) * meas));
  };
  for (int meas = 0; meas < m; ++meas)
    for (int a = 0; a < (axis == 0 ? ny : nx); ++a)
      for (int b = 0; b < (axis == 2 ? ny : nz); ++b) {
        for (int i = 0; i < len; ++i) {
          const int x = axis == 0 ? i : a;
          const int y = axis == 1 ? i : (axis == 0 ? a : b);
          const int z = axis == 2 ? i : b;
          line[i] = data[index(x, y, z, meas)];
        }
        for (int i = 0; i < len; ++i) {
          double acc = 0.0, wsum = 0.0;
          for (int k = -radius; k <= radius; ++k) {
            const int j = i + k;
            if (j < 0 || j >= len) continue;
            const double w = kernel[k + radius];
            acc += w * line[j];
            wsum += w;
          }
          const int x = axis == 0 ? i : a;
          const int y = axis == 1 ? i : (axis == 0 ? a : b);
          const int z = axis == 2 ? i : b;
          data[index(x, y, z, meas)] = static_cast<float>(acc / wsum);
        }
      }
}

}  // namespace

Volume4D gaussian_smooth(const Volume4D& v, double fwhm_voxels) {
  if (fwhm_voxels <= 0) throw DomainError("gaussian_smooth: fwhm must be > 0");
  const double sigma = fwhm_voxels / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * (k / sigma) * (k / sigma));
    sum += kernel[k + radius];
  }
  for (double& w : kernel) w /= sum;

  Volume4D out = v;
  smooth_axis(out.data, v.nx, v.ny, v.nz, v.m, 0, kernel);
  smooth_axis(out.data, v.nx, v.ny, v.nz, v.m, 1, kernel);
  smooth_axis(out.data, v.nx, v.ny, v.nz, v.m, 2, kernel);
  return out;
}

std::vector<std::array<double, 3>> spread_directions(int n) {
  // Golden-angle spiral over the upper hemisphere.
  std::vector<std::array<double, 3>> dirs(n);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs[i] = {r * std::cos(phi), r * std::sin(phi), z};
  }
  return dirs;
}

GradientTable make_scheme(int n_b0,
                          const std::vector<std::pair<double, int>>& shells) {
  GradientTable g;
  for (int i = 0; i < n_b0; ++i) {
    g.b_values.push_back(0.0);
    g.directions.push_back({0.0, 0.0, 0.0});
  }
  for (const auto& [b, count] : shells) {
    auto dirs = spread_directions(count);
    for (const auto& d : dirs) {
      g.b_values.push_back(b);
      g.directions.push_back(d);
    }
  }
  return g;
}

Phantom make_phantom(int nx, int ny, int nz, const GradientTable& scheme,
                     uint64_t seed, double snr) {
  if (nx <= 0 || ny <= 0 || nz <= 0)
    throw DomainError("make_phantom: non-positive dims");
  Phantom phantom;
  Volume4D& v = phantom.volume;
  v.nx = nx;
  v.ny = ny;
  v.nz = nz;
  v.m = static_cast<int>(scheme.size());
  v.voxel_size = {1.5f, 1.5f, 1.5f};
  v.data.assign(v.sample_count(), 0.0f);

  phantom.mask.nx = nx;
  phantom.mask.ny = ny;
  phantom.mask.nz = nz;
  phantom.mask.labels.assign(static_cast<std::size_t>(nx) * ny * nz,
                             TissueLabel::Background);
  phantom.ground_truth.nx = nx;
  phantom.ground_truth.ny = ny;
  phantom.ground_truth.nz = nz;
  phantom.ground_truth.voxels.resize(phantom.mask.labels.size());

  const double cx = (nx - 1) / 2.0, cy = (ny - 1) / 2.0;
  const double rmax = std::min(cx, cy);
  const Eigen::Vector3d wm_lambda(1.7e-3, 0.3e-3, 0.3e-3);

  double tissue_b0_sum = 0.0;
  std::size_t tissue_count = 0;
  const std::size_t vol = phantom.mask.labels.size();

  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const std::size_t i = phantom.mask.flat(x, y, z);
        const double dx = x - cx, dy = y - cy;
        const double r = std::sqrt(dx * dx + dy * dy) / std::max(rmax, 1.0);

        TissueLabel label;
        Eigen::Matrix3d D = Eigen::Matrix3d::Zero();
        double s0 = 0.0;
        if (r > 0.95) {
          label = TissueLabel::Background;
        } else if (r < 0.25) {
          label = TissueLabel::CSF;
          D = 3.0e-3 * Eigen::Matrix3d::Identity();
          s0 = 2000.0;
        } else if (r < 0.6) {
          label = TissueLabel::WM;
          const double phi = std::atan2(dy, dx);
          const Eigen::Vector3d e1(-std::sin(phi), std::cos(phi), 0.0);
          const Eigen::Vector3d e2(std::cos(phi), std::sin(phi), 0.0);
          const Eigen::Vector3d e3(0.0, 0.0, 1.0);
          D = wm_lambda(0) * e1 * e1.transpose() +
              wm_lambda(1) * e2 * e2.transpose() +
              wm_lambda(2) * e3 * e3.transpose();
          s0 = 700.0;
        } else {
          label = TissueLabel::GM;
          D = 0.8e-3 * Eigen::Matrix3d::Identity();
          s0 = 800.0;
        }
        // Gentle smooth modulation so slices are not piecewise constant.
        if (label != TissueLabel::Background)
          s0 *= 1.0 + 0.05 * std::sin(2.0 * kPi * x / nx) *
                          std::cos(2.0 * kPi * y / ny) +
                0.02 * std::sin(kPi * (z + 1.0) / (nz + 1.0));

        phantom.mask.labels[i] = label;
        TensorVoxel& gt = phantom.ground_truth.voxels[i];
        gt.s0 = s0;
        gt.D = D;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(D);
        gt.eigenvalues = es.eigenvalues().reverse();

        if (label != TissueLabel::Background) {
          tissue_b0_sum += s0;
          ++tissue_count;
          for (int j = 0; j < v.m; ++j) {
            const auto& d = scheme.directions[j];
            const Eigen::Vector3d gvec(d[0], d[1], d[2]);
            const double att =
                std::exp(-scheme.b_values[j] * gvec.dot(D * gvec));
            v.data[vol * j + i] = static_cast<float>(s0 * att);
          }
        }
      }

  if (snr > 0 && std::isfinite(snr) && tissue_count > 0) {
    const double sigma = (tissue_b0_sum / tissue_count) / snr;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (float& s : v.data) {
      const double re = s + gauss(rng);
      const double im = gauss(rng);
      s = static_cast<float>(std::sqrt(re * re + im * im));
    }
  }
  return phantom;
}

}  // namespace nrvc
