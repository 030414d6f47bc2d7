#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "nrvc/volume.hpp"

namespace nrvc {

/// PSNR in dB for unit-range signals: -10 log10(mse); mse = 0 -> +inf.
double psnr(double mse);

double mse_volumes(const Volume4D& a, const Volume4D& b);

/// Per-pixel SSIM with a uniform 7x7 window, C1 = 0.01^2, C2 = 0.03^2,
/// data range 1. The map covers valid window centers only; pixels closer
/// than 3 to an edge hold NaN.
Eigen::MatrixXd ssim_map(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Mean of ssim_map over valid window centers.
double ssim_mean(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Signed per-voxel relative error in percent, averaged over measurements:
/// mean_j 100 (test - truth) / max(|truth|, floor). Output shape nx*ny*nz.
std::vector<double> relative_error_map(const Volume4D& truth,
                                       const Volume4D& test,
                                       double floor = 1e-6);

/// Mean and population standard deviation over voxels with the given label.
std::pair<double, double> masked_stats(const std::vector<double>& map,
                                       const TissueMask& mask,
                                       TissueLabel label);

struct MetricsReport {
  double mse = 0.0;
  double psnr_global = 0.0;
  double psnr_slice_mean = 0.0;
  double ssim = 0.0;
  std::vector<double> per_slice_psnr;
  // label name -> (mean, std) of the signed relative-error map, percent
  std::map<std::string, std::pair<double, double>> relative_error;
  double compression_ratio = 0.0;
};

/// Full fidelity report. Both volumes are compared after normalizing with
/// the truth's bounds so PSNR/SSIM see a unit data range. SSIM is averaged
/// over every (slice, measurement) image pair.
MetricsReport compute_metrics(const Volume4D& truth, const Volume4D& test,
                              const TissueMask* mask = nullptr,
                              double rel_err_floor = 1e-6);

std::string report_to_json(const MetricsReport& report);
std::string report_to_csv(const MetricsReport& report);

const char* tissue_label_name(TissueLabel label);

}  // namespace nrvc
