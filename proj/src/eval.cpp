#include "geoloss/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <vector>

#include "geoloss/io.hpp"

namespace geoloss::eval {
namespace {

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void require_nonempty(const EvalMask& mask) {
  if (mask.count() == 0) throw Error(ErrorCode::EmptyMask, "evaluation mask selects no pixels");
}

}  // namespace

bool CropRect::valid() const {
  auto in01 = [](double v) { return v >= 0 && v <= 1; };
  return in01(x0) && in01(y0) && in01(x1) && in01(y1) && x0 < x1 && y0 < y1;
}

CropRect CropRect::parse(const std::string& text) {
  const auto v = io::parse_doubles(text, "crop");
  if (v.size() != 4) throw Error(ErrorCode::InvalidInput, "crop: expected x0,y0,x1,y1");
  CropRect c{v[0], v[1], v[2], v[3]};
  if (!c.valid()) throw Error(ErrorCode::InvalidInput, "crop: fractions must satisfy 0 <= x0 < x1 <= 1");
  return c;
}

EvalMask build_mask(const ImageGridd& gt_depth, double cap, const CropRect& crop) {
  if (!(cap > 0)) throw Error(ErrorCode::InvalidInput, "build_mask: cap must be positive");
  if (!crop.valid()) throw Error(ErrorCode::InvalidInput, "build_mask: invalid crop");
  const int w = gt_depth.width(), h = gt_depth.height();
  EvalMask m(w, h, false);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool in_crop = x >= crop.x0 * w && x < crop.x1 * w && y >= crop.y0 * h && y < crop.y1 * h;
      const double g = gt_depth(x, y);
      m.set(x, y, in_crop && g > 0 && g <= cap);
    }
  return m;
}

DepthMetrics depth_metrics(const ImageGridd& pred, const ImageGridd& gt, const EvalMask& mask, bool median_scale) {
  if (!pred.same_shape(gt) || mask.width() != gt.width() || mask.height() != gt.height())
    throw Error(ErrorCode::ResolutionMismatch, "depth_metrics: prediction, ground truth and mask differ in size");
  require_nonempty(mask);

  std::vector<double> p, g;
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x) {
      if (!mask(x, y)) continue;
      if (!(pred(x, y) > 0) || !(gt(x, y) > 0))
        throw Error(ErrorCode::NonPositiveDepth, "depth_metrics: non-positive depth inside the mask");
      p.push_back(pred(x, y));
      g.push_back(gt(x, y));
    }
  if (median_scale) {
    const double s = median(g) / median(p);
    for (double& v : p) v *= s;
  }

  DepthMetrics m;
  const double n = double(p.size());
  double d1 = 0, d2 = 0, d3 = 0, se = 0, sle = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double diff = p[i] - g[i];
    m.abs_rel += std::abs(diff) / g[i];
    m.sq_rel += diff * diff / g[i];
    se += diff * diff;
    const double ld = std::log(p[i]) - std::log(g[i]);
    sle += ld * ld;
    const double ratio = std::max(p[i] / g[i], g[i] / p[i]);
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
  }
  m.abs_rel /= n;
  m.sq_rel /= n;
  m.rmse = std::sqrt(se / n);
  m.rmse_log = std::sqrt(sle / n);
  m.delta1 = d1 / n;
  m.delta2 = d2 / n;
  m.delta3 = d3 / n;
  m.count = long(p.size());
  return m;
}

double angle_deg(const Vec3<double>& a, const Vec3<double>& b) {
  return std::acos(std::clamp(a.dot(b), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

NormalMetrics normal_metrics(const NormalMapd& pred, const NormalMapd& gt, const EvalMask& mask) {
  if (!pred.grid.same_shape(gt.grid) || mask.width() != gt.width() || mask.height() != gt.height())
    throw Error(ErrorCode::ResolutionMismatch, "normal_metrics: prediction, ground truth and mask differ in size");
  require_nonempty(mask);
  std::vector<double> angles;
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x) {
      if (!mask(x, y)) continue;
      const Vec3<double> a = pred(x, y), b = gt(x, y);
      if (std::abs(a.norm() - 1) > 1e-6 || std::abs(b.norm() - 1) > 1e-6)
        throw Error(ErrorCode::NotUnit, "normal_metrics: non-unit normal inside the mask");
      angles.push_back(angle_deg(a, b));
    }
  NormalMetrics m;
  const double n = double(angles.size());
  double sum = 0, c1 = 0, c2 = 0, c3 = 0;
  for (double a : angles) {
    sum += a;
    c1 += a < 11.25;
    c2 += a < 22.5;
    c3 += a < 30.0;
  }
  m.mean_deg = sum / n;
  m.median_deg = median(angles);
  m.pct_11_25 = c1 / n;
  m.pct_22_5 = c2 / n;
  m.pct_30 = c3 / n;
  m.count = long(angles.size());
  return m;
}

std::string format_table(const DepthMetrics& d, const NormalMetrics& n) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4);
  s << std::setw(10) << "abs_rel" << std::setw(10) << "sq_rel" << std::setw(10) << "rmse" << std::setw(10)
    << "rmse_log" << std::setw(10) << "d<1.25" << std::setw(10) << "d<1.25^2" << std::setw(10) << "d<1.25^3"
    << '\n';
  s << std::setw(10) << d.abs_rel << std::setw(10) << d.sq_rel << std::setw(10) << d.rmse << std::setw(10)
    << d.rmse_log << std::setw(10) << d.delta1 << std::setw(10) << d.delta2 << std::setw(10) << d.delta3 << '\n';
  s << std::setw(10) << "mean" << std::setw(10) << "median" << std::setw(10) << "11.25" << std::setw(10) << "22.5"
    << std::setw(10) << "30" << '\n';
  s << std::setw(10) << n.mean_deg << std::setw(10) << n.median_deg << std::setw(10) << n.pct_11_25
    << std::setw(10) << n.pct_22_5 << std::setw(10) << n.pct_30 << '\n';
  return s.str();
}

void write_csv(const std::filesystem::path& path, const DepthMetrics& d, const NormalMetrics& n) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << std::setprecision(10);
  out << "abs_rel,sq_rel,rmse,rmse_log,delta1,delta2,delta3,normal_mean_deg,normal_median_deg,pct_11_25,pct_22_5,"
         "pct_30\n";
  out << d.abs_rel << ',' << d.sq_rel << ',' << d.rmse << ',' << d.rmse_log << ',' << d.delta1 << ',' << d.delta2
      << ',' << d.delta3 << ',' << n.mean_deg << ',' << n.median_deg << ',' << n.pct_11_25 << ',' << n.pct_22_5
      << ',' << n.pct_30 << '\n';
}

}  // namespace geoloss::eval
