#include "nrvc/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "nrvc/sampling.hpp"

namespace nrvc {

namespace {
constexpr int kWindow = 7;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
}  // namespace

double psnr(double mse) {
  if (mse < 0) throw DomainError("psnr: negative MSE");
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double mse_volumes(const Volume4D& a, const Volume4D& b) {
  if (a.nx != b.nx || a.ny != b.ny || a.nz != b.nz || a.m != b.m)
    throw ShapeError("mse_volumes: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

Eigen::MatrixXd ssim_map(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("ssim_map: shape mismatch");
  if (a.rows() < kWindow || a.cols() < kWindow)
    throw ShapeError("ssim_map: image smaller than the 7x7 window");

  const int half = kWindow / 2;
  const double n = kWindow * kWindow;
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(
      a.rows(), a.cols(), std::numeric_limits<double>::quiet_NaN());
  for (long i = half; i < a.rows() - half; ++i) {
    for (long j = half; j < a.cols() - half; ++j) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int di = -half; di <= half; ++di)
        for (int dj = -half; dj <= half; ++dj) {
          const double x = a(i + di, j + dj);
          const double y = b(i + di, j + dj);
          sa += x;
          sb += y;
          saa += x * x;
          sbb += y * y;
          sab += x * y;
        }
      const double mu_a = sa / n, mu_b = sb / n;
      // Unbiased (n-1) moments, matching the windowed SSIM convention.
      const double var_a = (saa - n * mu_a * mu_a) / (n - 1);
      const double var_b = (sbb - n * mu_b * mu_b) / (n - 1);
      const double cov = (sab - n * mu_a * mu_b) / (n - 1);
      out(i, j) = ((2 * mu_a * mu_b + kC1) * (2 * cov + kC2)) /
                  ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
    }
  }
  return out;
}

double ssim_mean(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd map = ssim_map(a, b);
  const int half = kWindow / 2;
  double acc = 0.0;
  long count = 0;
  for (long i = half; i < map.rows() - half; ++i)
    for (long j = half; j < map.cols() - half; ++j) {
      acc += map(i, j);
      ++count;
    }
  return acc / static_cast<double>(count);
}

std::vector<double> relative_error_map(const Volume4D& truth,
                                       const Volume4D& test, double floor) {
  if (truth.nx != test.nx || truth.ny != test.ny || truth.nz != test.nz ||
      truth.m != test.m)
    throw ShapeError("relative_error_map: dimension mismatch");
  const std::size_t vol =
      static_cast<std::size_t>(truth.nx) * truth.ny * truth.nz;
  std::vector<double> map(vol, 0.0);
  for (int meas = 0; meas < truth.m; ++meas)
    for (std::size_t i = 0; i < vol; ++i) {
      const double t = truth.data[vol * meas + i];
      const double s = test.data[vol * meas + i];
      map[i] += 100.0 * (s - t) / std::max(std::abs(t), floor);
    }
  for (double& e : map) e /= truth.m;
  return map;
}

std::pair<double, double> masked_stats(const std::vector<double>& map,
                                       const TissueMask& mask,
                                       TissueLabel label) {
  if (map.size() != mask.labels.size())
    throw ShapeError("masked_stats: map/mask size mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < map.size(); ++i)
    if (mask.labels[i] == label) {
      sum += map[i];
      ++count;
    }
  if (count == 0)
    throw EmptySelectionError("masked_stats: label not present in mask");
  const double mean = sum / count;
  double ss = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i)
    if (mask.labels[i] == label) {
      const double d = map[i] - mean;
      ss += d * d;
    }
  return {mean, std::sqrt(ss / count)};
}

const char* tissue_label_name(TissueLabel label) {
  switch (label) {
    case TissueLabel::Background: return "background";
    case TissueLabel::WM: return "WM";
    case TissueLabel::GM: return "GM";
    case TissueLabel::CSF: return "CSF";
  }
  return "?";
}

MetricsReport compute_metrics(const Volume4D& truth, const Volume4D& test,
                              const TissueMask* mask, double rel_err_floor) {
  if (truth.nx != test.nx || truth.ny != test.ny || truth.nz != test.nz ||
      truth.m != test.m)
    throw ShapeError("compute_metrics: dimension mismatch");

  // One shared scale so the unit-range PSNR/SSIM constants apply.
  Volume4D tn = normalize(truth);
  Volume4D sn = test;
  sn.norm_min = tn.norm_min;
  sn.norm_max = tn.norm_max;
  if (tn.norm_max > tn.norm_min) {
    const float lo = static_cast<float>(tn.norm_min);
    const float range = static_cast<float>(tn.norm_max - tn.norm_min);
    for (float& s : sn.data) s = (s - lo) / range;
  } else {
    for (float& s : sn.data) s = 0.0f;
  }

  MetricsReport report;
  report.mse = mse_volumes(tn, sn);
  report.psnr_global = psnr(report.mse);

  double ssim_acc = 0.0;
  long ssim_count = 0;
  for (int z = 0; z < truth.nz; ++z) {
    Eigen::MatrixXd ta = slice_targets(tn, z);
    Eigen::MatrixXd tb = slice_targets(sn, z);
    double slice_se = 0.0;
    for (int meas = 0; meas < truth.m; ++meas) {
      Eigen::MatrixXd ia = Eigen::Map<Eigen::MatrixXd>(
          ta.col(meas).data(), truth.nx, truth.ny);
      Eigen::MatrixXd ib = Eigen::Map<Eigen::MatrixXd>(
          tb.col(meas).data(), truth.nx, truth.ny);
      slice_se += (ia - ib).array().square().mean();
      if (truth.nx >= kWindow && truth.ny >= kWindow) {
        ssim_acc += ssim_mean(ia, ib);
        ++ssim_count;
      }
    }
    report.per_slice_psnr.push_back(psnr(slice_se / truth.m));
  }
  report.ssim = ssim_count > 0
                    ? ssim_acc / ssim_count
                    : std::numeric_limits<double>::quiet_NaN();
  double pz = 0.0;
  for (double p : report.per_slice_psnr) pz += p;
  report.psnr_slice_mean = pz / report.per_slice_psnr.size();

  if (mask) {
    const auto rel = relative_error_map(truth, test, rel_err_floor);
    for (TissueLabel label :
         {TissueLabel::WM, TissueLabel::GM, TissueLabel::CSF}) {
      try {
        report.relative_error[tissue_label_name(label)] =
            masked_stats(rel, *mask, label);
      } catch (const EmptySelectionError&) {
        // Label absent from this mask; leave it out of the report.
      }
    }
  }
  return report;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  };
  j["mse"] = num(report.mse);
  j["psnr_global"] = num(report.psnr_global);
  j["psnr_slice_mean"] = num(report.psnr_slice_mean);
  j["ssim"] = num(report.ssim);
  j["compression_ratio"] = num(report.compression_ratio);
  for (const auto& [label, stats] : report.relative_error) {
    j["relative_error"][label]["mean"] = num(stats.first);
    j["relative_error"][label]["std"] = num(stats.second);
  }
  j["per_slice_psnr"] = nlohmann::json::array();
  for (double p : report.per_slice_psnr) j["per_slice_psnr"].push_back(num(p));
  return j.dump(2);
}

std::string report_to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out.precision(12);
  out << "metric,value\n";
  out << "mse," << report.mse << '\n';
  out << "psnr_global," << report.psnr_global << '\n';
  out << "psnr_slice_mean," << report.psnr_slice_mean << '\n';
  out << "ssim," << report.ssim << '\n';
  out << "compression_ratio," << report.compression_ratio << '\n';
  for (const auto& [label, stats] : report.relative_error) {
    out << "rel_err_mean_" << label << ',' << stats.first << '\n';
    out << "rel_err_std_" << label << ',' << stats.second << '\n';
  }
  for (std::size_t z = 0; z < report.per_slice_psnr.size(); ++z)
    out << "psnr_slice_" << z << ',' << report.per_slice_psnr[z] << '\n';
  return out.str();
}

}  // namespace nrvc
