#include <algorithm>

#include "geoloss/losses.hpp"

namespace geoloss {

NormalMapd normal_from_depth(const InverseDepthMapd& dinv, const Intrinsicsd& k) {
  const int w = dinv.width(), h = dinv.height();
  if (w < 3 || h < 3) throw Error(ErrorCode::GridTooSmall, "normal_from_depth needs at least 3x3");

  ImageGridd points(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      points.set_pixel(x, y, depth_from_inverse(dinv(x, y)) * backproject(double(x), double(y), k));

  NormalMapd out{ImageGridd(w, h, 3)};
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      const Vec3<double> p = points.vec3(x, y);
      const Vec3<double> right = points.vec3(x + 1, y) - p;
      const Vec3<double> down = points.vec3(x, y + 1) - p;
      const Vec3<double> left = points.vec3(x - 1, y) - p;
      const Vec3<double> up = points.vec3(x, y - 1) - p;
      const Vec3<double> sum = right.cross(down) + down.cross(left) + left.cross(up) + up.cross(right);
      const Vec3<double> mean = sum / 4;
      const double len = mean.norm();
      const Vec3<double> n = len < 1e-12 ? Vec3<double>(0, 0, -1) : Vec3<double>(mean / len);
      out.set(x, y, face_camera(n, backproject(double(x), double(y), k)));
    }

  // Borders copy the nearest interior normal, re-oriented for their own ray.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (x > 0 && y > 0 && x < w - 1 && y < h - 1) continue;
      const int sx = std::clamp(x, 1, w - 2), sy = std::clamp(y, 1, h - 2);
      out.set(x, y, face_camera(out(sx, sy), backproject(double(x), double(y), k)));
    }
  return out;
}

}  // namespace geoloss
