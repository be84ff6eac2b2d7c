#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "geoloss/eval.hpp"
#include "geoloss/solver.hpp"
#include "geoloss/synth.hpp"

namespace support {

using namespace geoloss;

inline StereoSequence sequence_of(const synth::OracleInstance& o) {
  StereoSequence s;
  s.left_t = o.left_t;
  s.right_t = o.right_t;
  s.left_prev = o.left_prev;
  s.right_prev = o.right_prev;
  s.k = o.k;
  s.left_to_right = o.left_to_right;
  return s;
}

inline ImageGridd random_grid(std::mt19937_64& rng, int w, int h, int c, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  ImageGridd g(w, h, c);
  for (Eigen::Index i = 0; i < g.data().size(); ++i) g.data()[i] = u(rng);
  return g;
}

inline Vec3<double> random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec3<double> v(n(rng), n(rng), n(rng));
  return v.normalized();
}

/// One textured plane <normal, X> = offset filling the default 128x96 view.
inline synth::SceneSpec single_plane(const Vec3<double>& normal, double offset, std::uint64_t seed = 5) {
  synth::SceneSpec s;
  s.name = "plane";
  s.seed = seed;
  s.planes.push_back({normal.normalized(), offset, 0,
                      synth::make_texture(seed, std::vector<Eigen::Vector2d>{{0.2, 0.05}, {-0.08, 0.17}})});
  s.ego_motion << 0, 0, 0.3, 0, 0, 0;
  return s;
}

inline double mean_angle(const NormalMapd& a, const NormalMapd& b, const ValidityMask& m) {
  double sum = 0;
  long n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      if (m(x, y)) {
        const double c = std::clamp(a(x, y).dot(b(x, y)) / (a(x, y).norm() * b(x, y).norm()), -1.0, 1.0);
        sum += std::acos(c) * 180.0 / M_PI;
        ++n;
      }
  return sum / double(n);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("geoloss_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Hand-rolled bilinear lookup, kept separate from the library sampler.
inline bool lookup(const ImageGridd& img, double qx, double qy, Eigen::Vector3d& out) {
  if (!(qx >= 0 && qy >= 0 && qx <= img.width() - 1 && qy <= img.height() - 1)) return false;
  const int x0 = std::min(int(qx), img.width() - 2), y0 = std::min(int(qy), img.height() - 2);
  const double ax = qx - x0, ay = qy - y0;
  out.setZero();
  for (int c = 0; c < img.channels(); ++c)
    out[c] = (1 - ax) * (1 - ay) * img(x0, y0, c) + ax * (1 - ay) * img(x0 + 1, y0, c) +
             (1 - ax) * ay * img(x0, y0 + 1, c) + ax * ay * img(x0 + 1, y0 + 1, c);
  return true;
}

/// Mean channel-summed L1 residual between the reference view and a source
/// view warped through `to_source`, over pixels whose own neighborhood and
/// whose four source taps all lie on the same plane (no seams, no occlusion).
inline double clean_residue(const synth::SceneSpec& spec, const synth::OracleInstance& inst,
                            const ImageGridd& source, const RigidTransformd& to_source, long* used = nullptr) {
  const auto ref_view = synth::render_view(spec, RigidTransformd::identity());
  const auto src_view = synth::render_view(spec, to_source);
  const int w = spec.width;
  double sum = 0;
  long n = 0;
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < w; ++x) {
      if (!inst.interior(x, y)) continue;
      const double d = 1.0 / (inst.dinv(x, y) + kInverseDepthOffset);
      const Vec3<double> xs = to_source.apply(Vec3<double>(d * backproject(double(x), double(y), inst.k)));
      if (!(xs.z() > 0)) continue;
      const double qx = inst.k.fx * xs.x() / xs.z() + inst.k.cx, qy = inst.k.fy * xs.y() / xs.z() + inst.k.cy;
      Eigen::Vector3d v;
      if (!lookup(source, qx, qy, v)) continue;
      const int plane = ref_view.plane_index[std::size_t(y) * w + x];
      const int x0 = std::min(int(qx), w - 2), y0 = std::min(int(qy), spec.height - 2);
      bool same = true;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) same = same && src_view.plane_index[std::size_t(y0 + dy) * w + x0 + dx] == plane;
      if (!same) continue;
      for (int c = 0; c < 3; ++c) sum += std::abs(inst.left_t(x, y, c) - v[c]);
      ++n;
    }
  if (used) *used = n;
  return sum / double(n);
}

// Independent oracle: G(p) = exp(-|channel-mean forward gradient|).
inline double oracle_weight(const ImageGridd& img, int x, int y) {
  double gx = 0, gy = 0;
  for (int c = 0; c < img.channels(); ++c) {
    if (x + 1 < img.width()) gx += img(x + 1, y, c) - img(x, y, c);
    if (y + 1 < img.height()) gy += img(x, y + 1, c) - img(x, y, c);
  }
  gx /= img.channels();
  gy /= img.channels();
  return std::exp(-std::sqrt(gx * gx + gy * gy));
}

// Independent oracle: G-weighted L1 inverse-depth smoothness.
inline double oracle_smoothness(const InverseDepthMapd& d, const ImageGridd& img) {
  long double s = 0;
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x) {
      const double g = oracle_weight(img, x, y);
      if (x + 1 < d.width()) s += g * std::abs(d(x, y) - d(x + 1, y));
      if (y + 1 < d.height()) s += g * std::abs(d(x, y) - d(x, y + 1));
    }
  return double(s);
}

inline ValidityMask full_mask(int w, int h) { return ValidityMask(w, h, true); }

}  // namespace support
