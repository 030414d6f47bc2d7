#include "nrvc/volume.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace nrvc {

Volume4D normalize(const Volume4D& v) {
  Volume4D out = v;
  if (v.data.empty()) throw ShapeError("normalize: empty volume");
  float lo = v.data[0], hi = v.data[0];
  for (float s : v.data) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  out.norm_min = lo;
  out.norm_max = hi;
  out.normalized = true;
  if (lo == hi) {
    std::fill(out.data.begin(), out.data.end(), 0.0f);
    return out;
  }
  const float range = hi - lo;
  for (float& s : out.data) s = (s - lo) / range;
  return out;
}

Volume4D denormalize(const Volume4D& v) {
  if (!v.normalized) throw DomainError("denormalize: volume has no recorded bounds");
  Volume4D out = v;
  const double lo = v.norm_min, range = v.norm_max - v.norm_min;
  for (float& s : out.data)
    s = static_cast<float>(lo + static_cast<double>(s) * range);
  out.normalized = false;
  return out;
}

std::pair<Volume4D, GradientTable> select_shell(const Volume4D& v,
                                                const GradientTable& g,
                                                double b_target, double tol) {
  if (tol < 0) throw DomainError("select_shell: negative tolerance");
  if (g.size() != static_cast<std::size_t>(v.m))
    throw ShapeError("select_shell: gradient table length != measurement count");
  std::vector<int> keep;
  for (int j = 0; j < v.m; ++j)
    if (std::abs(g.b_values[j] - b_target) <= tol) keep.push_back(j);
  if (keep.empty())
    throw EmptySelectionError("select_shell: no measurements within tolerance of b=" +
                              std::to_string(b_target));

  Volume4D sub;
  sub.nx = v.nx;
  sub.ny = v.ny;
  sub.nz = v.nz;
  sub.m = static_cast<int>(keep.size());
  sub.voxel_size = v.voxel_size;
  sub.normalized = v.normalized;
  sub.norm_min = v.norm_min;
  sub.norm_max = v.norm_max;
  sub.data.resize(sub.sample_count());
  const std::size_t vol = static_cast<std::size_t>(v.nx) * v.ny * v.nz;
  for (std::size_t j = 0; j < keep.size(); ++j)
    std::copy_n(v.data.begin() + vol * keep[j], vol, sub.data.begin() + vol * j);

  GradientTable sg;
  for (int j : keep) {
    sg.b_values.push_back(g.b_values[j]);
    sg.directions.push_back(g.directions[j]);
  }
  return {std::move(sub), std::move(sg)};
}

namespace {

std::vector<std::vector<double>> read_numeric_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    double x;
    while (ls >> x) row.push_back(x);
    if (!ls.eof() && ls.fail())
      throw FormatError("non-numeric token in " + path);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

GradientTable read_gradient_table(const std::string& bvals_path,
                                  const std::string& bvecs_path) {
  auto bval_rows = read_numeric_rows(bvals_path);
  if (bval_rows.size() != 1)
    throw FormatError("bvals file must contain one row: " + bvals_path);
  auto bvec_rows = read_numeric_rows(bvecs_path);
  if (bvec_rows.size() != 3)
    throw FormatError("bvecs file must contain three rows: " + bvecs_path);

  const std::size_t n = bval_rows[0].size();
  for (const auto& row : bvec_rows)
    if (row.size() != n)
      throw FormatError("bvals/bvecs column count mismatch");

  GradientTable g;
  g.b_values = bval_rows[0];
  g.directions.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::array<double, 3> d{bvec_rows[0][j], bvec_rows[1][j], bvec_rows[2][j]};
    const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if (norm > 0)
      for (double& c : d) c /= norm;
    g.directions[j] = d;
  }
  return g;
}

}  // namespace nrvc
