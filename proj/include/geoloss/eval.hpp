#pragma once

// Depth and surface-normal error metrics in the column order of the usual
// KITTI tables.

#include <filesystem>
#include <limits>
#include <string>

#include "geoloss/image_grid.hpp"

namespace geoloss::eval {

struct DepthMetrics {
  double abs_rel = 0;
  double sq_rel = 0;
  double rmse = 0;
  double rmse_log = 0;
  double delta1 = 0;
  double delta2 = 0;
  double delta3 = 0;
  long count = 0;
};

struct NormalMetrics {
  double mean_deg = 0;
  double median_deg = 0;
  double pct_11_25 = 0;
  double pct_22_5 = 0;
  double pct_30 = 0;
  long count = 0;
};

/// Crop rectangle as fractions of width and height; pixel x is inside when
/// x0*W <= x < x1*W (same for y).
struct CropRect {
  double x0 = 0, y0 = 0, x1 = 1, y1 = 1;

  bool valid() const;
  static CropRect parse(const std::string& text);
};

using EvalMask = ValidityMask;

/// True where 0 < gt <= cap and the pixel lies in the crop.
EvalMask build_mask(const ImageGridd& gt_depth, double cap = std::numeric_limits<double>::infinity(),
                    const CropRect& crop = {});

/// Metric depth errors; with median_scale the prediction is first scaled by
/// median(gt) / median(pred) over the mask.
DepthMetrics depth_metrics(const ImageGridd& pred, const ImageGridd& gt, const EvalMask& mask,
                           bool median_scale = false);

NormalMetrics normal_metrics(const NormalMapd& pred, const NormalMapd& gt, const EvalMask& mask);

/// Angle in degrees between unit vectors, with the dot product clamped.
double angle_deg(const Vec3<double>& a, const Vec3<double>& b);

std::string format_table(const DepthMetrics& d, const NormalMetrics& n);
void write_csv(const std::filesystem::path& path, const DepthMetrics& d, const NormalMetrics& n);

}  // namespace geoloss::eval
