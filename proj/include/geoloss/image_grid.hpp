#pragma once

// Dense row-major grids shared by images, inverse-depth maps and normal maps,
// plus the differentiable bilinear sampler and finite-difference operators.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "geoloss/error.hpp"
#include "geoloss/geometry.hpp"

namespace geoloss {

inline constexpr int kMaxChannels = 3;

/// Offset of the inverse-depth to depth conversion D = 1 / (D_inv + 1e-4).
inline constexpr double kInverseDepthOffset = 1e-4;

template <typename Scalar>
using ChannelVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxChannels, 1>;
template <typename Scalar>
using ChannelJac = Eigen::Matrix<Scalar, Eigen::Dynamic, 2, 0, kMaxChannels, 2>;

template <typename Scalar>
class ImageGrid {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  ImageGrid() = default;
  ImageGrid(int width, int height, int channels, Scalar fill = Scalar(0))
      : width_(width), height_(height), channels_(channels) {
    if (width <= 0 || height <= 0 || channels <= 0 || channels > kMaxChannels)
      throw Error(ErrorCode::InvalidInput, "ImageGrid: bad dimensions " + std::to_string(width) + "x" +
                                               std::to_string(height) + "x" + std::to_string(channels));
    data_ = Storage::Constant(Eigen::Index(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  Eigen::Index pixel_count() const { return Eigen::Index(width_) * height_; }
  bool empty() const { return data_.size() == 0; }

  bool same_shape(const ImageGrid& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }
  bool same_resolution(const ImageGrid& o) const { return width_ == o.width_ && height_ == o.height_; }

  Eigen::Index index(int x, int y, int c = 0) const {
    return (Eigen::Index(y) * width_ + x) * channels_ + c;
  }
  Scalar& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  Scalar operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  ChannelVec<Scalar> pixel(int x, int y) const {
    return data_.segment(index(x, y), channels_).matrix();
  }
  template <typename Derived>
  void set_pixel(int x, int y, const Eigen::MatrixBase<Derived>& v) {
    data_.segment(index(x, y), channels_) = v.array();
  }

  Vec3<Scalar> vec3(int x, int y) const {
    const Scalar* p = data_.data() + index(x, y);
    return {p[0], p[1], p[2]};
  }

  Storage& data() { return data_; }
  const Storage& data() const { return data_; }

  bool all_finite() const { return data_.isFinite().all(); }

  template <typename Other>
  ImageGrid<Other> cast() const {
    ImageGrid<Other> out(width_, height_, channels_);
    out.data() = data_.template cast<Other>();
    return out;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  Storage data_;
};

using ImageGridd = ImageGrid<double>;

/// Per-inverse-depth pixel, 1 channel, units 1/m.
template <typename Scalar>
struct InverseDepthMap {
  ImageGrid<Scalar> grid;

  int width() const { return grid.width(); }
  int height() const { return grid.height(); }
  Scalar operator()(int x, int y) const { return grid(x, y); }
  Scalar& operator()(int x, int y) { return grid(x, y); }
};

/// Unit camera-frame normals, 3 channels.
template <typename Scalar>
struct NormalMap {
  ImageGrid<Scalar> grid;

  int width() const { return grid.width(); }
  int height() const { return grid.height(); }
  Vec3<Scalar> operator()(int x, int y) const { return grid.vec3(x, y); }
  void set(int x, int y, const Vec3<Scalar>& n) { grid.set_pixel(x, y, n); }
};

using InverseDepthMapd = InverseDepthMap<double>;
using NormalMapd = NormalMap<double>;

class ValidityMask {
 public:
  ValidityMask() = default;
  ValidityMask(int width, int height, bool fill = false)
      : width_(width), height_(height), data_(std::size_t(width) * height, fill ? 1 : 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool operator()(int x, int y) const { return data_[std::size_t(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { data_[std::size_t(y) * width_ + x] = v ? 1 : 0; }
  long count() const { return long(std::count(data_.begin(), data_.end(), std::uint8_t(1))); }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

template <typename Scalar>
Scalar depth_from_inverse(Scalar inverse_depth) {
  return Scalar(1) / (inverse_depth + Scalar(kInverseDepthOffset));
}

template <typename Scalar>
Scalar inverse_from_depth(Scalar depth) {
  return Scalar(1) / depth - Scalar(kInverseDepthOffset);
}

template <typename Scalar>
ImageGrid<Scalar> depth_grid(const InverseDepthMap<Scalar>& dinv) {
  ImageGrid<Scalar> d = dinv.grid;
  d.data() = Scalar(1) / (d.data() + Scalar(kInverseDepthOffset));
  return d;
}

template <typename Scalar>
InverseDepthMap<Scalar> inverse_depth_from_depth(const ImageGrid<Scalar>& depth) {
  InverseDepthMap<Scalar> out{depth};
  out.grid.data() = Scalar(1) / depth.data() - Scalar(kInverseDepthOffset);
  return out;
}

/// Four-tap footprint of a continuous sample position.
template <typename Scalar>
struct BilinearTaps {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  Scalar ax = 0, ay = 0;  // fractional offsets toward x1 / y1
  bool valid = false;

  Scalar weight(int corner) const {
    switch (corner) {
      case 0: return (1 - ax) * (1 - ay);
      case 1: return ax * (1 - ay);
      case 2: return (1 - ax) * ay;
      default: return ax * ay;
    }
  }
  int cx(int corner) const { return (corner & 1) ? x1 : x0; }
  int cy(int corner) const { return (corner & 2) ? y1 : y0; }
};

template <typename Scalar>
BilinearTaps<Scalar> bilinear_taps(int width, int height, const Vec2<Scalar>& q) {
  BilinearTaps<Scalar> t;
  if (!(q.x() >= 0 && q.y() >= 0 && q.x() <= width - 1 && q.y() <= height - 1)) return t;
  using std::floor;
  t.x0 = std::min(int(floor(q.x())), std::max(width - 2, 0));
  t.y0 = std::min(int(floor(q.y())), std::max(height - 2, 0));
  t.x1 = std::min(t.x0 + 1, width - 1);
  t.y1 = std::min(t.y0 + 1, height - 1);
  t.ax = q.x() - t.x0;
  t.ay = q.y() - t.y0;
  t.valid = true;
  return t;
}

template <typename Scalar>
struct BilinearSample {
  ChannelVec<Scalar> value;
  ChannelJac<Scalar> d_q;  // row c holds d value_c / d (qx, qy)
  bool valid = false;
};

/// Differentiable bilinear interpolation. Samples outside [0, W-1] x [0, H-1]
/// are invalid and return zeros.
template <typename Scalar>
BilinearSample<Scalar> bilinear_sample(const ImageGrid<Scalar>& src, const Vec2<Scalar>& q) {
  if (src.empty()) throw Error(ErrorCode::InvalidInput, "bilinear_sample: empty source grid");
  const int nc = src.channels();
  BilinearSample<Scalar> s;
  s.value = ChannelVec<Scalar>::Zero(nc);
  s.d_q = ChannelJac<Scalar>::Zero(nc, 2);
  const auto t = bilinear_taps(src.width(), src.height(), q);
  if (!t.valid) return s;
  s.valid = true;
  for (int c = 0; c < nc; ++c) {
    const Scalar v00 = src(t.x0, t.y0, c), v10 = src(t.x1, t.y0, c);
    const Scalar v01 = src(t.x0, t.y1, c), v11 = src(t.x1, t.y1, c);
    const Scalar top = v00 + t.ax * (v10 - v00);
    const Scalar bottom = v01 + t.ax * (v11 - v01);
    s.value[c] = top + t.ay * (bottom - top);
    s.d_q(c, 0) = (1 - t.ay) * (v10 - v00) + t.ay * (v11 - v01);
    s.d_q(c, 1) = bottom - top;
  }
  return s;
}

template <typename Scalar>
struct SpatialGradients {
  ImageGrid<Scalar> dx, dy;
};

/// Forward differences; the last column of dx and last row of dy are zero.
template <typename Scalar>
SpatialGradients<Scalar> spatial_gradients(const ImageGrid<Scalar>& g) {
  if (g.width() < 2 || g.height() < 2)
    throw Error(ErrorCode::GridTooSmall, "spatial_gradients needs at least 2x2");
  SpatialGradients<Scalar> out{ImageGrid<Scalar>(g.width(), g.height(), g.channels()),
                               ImageGrid<Scalar>(g.width(), g.height(), g.channels())};
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      for (int c = 0; c < g.channels(); ++c) {
        if (x + 1 < g.width()) out.dx(x, y, c) = g(x + 1, y, c) - g(x, y, c);
        if (y + 1 < g.height()) out.dy(x, y, c) = g(x, y + 1, c) - g(x, y, c);
      }
  return out;
}

/// Channel-mean forward differences; missing neighbors give 0. Works on any
/// non-empty grid, including single rows or columns.
template <typename Scalar>
SpatialGradients<Scalar> mean_channel_gradients(const ImageGrid<Scalar>& g) {
  SpatialGradients<Scalar> out{ImageGrid<Scalar>(g.width(), g.height(), 1),
                               ImageGrid<Scalar>(g.width(), g.height(), 1)};
  const Scalar inv_c = Scalar(1) / g.channels();
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      Scalar gx = 0, gy = 0;
      for (int c = 0; c < g.channels(); ++c) {
        if (x + 1 < g.width()) gx += g(x + 1, y, c) - g(x, y, c);
        if (y + 1 < g.height()) gy += g(x, y + 1, c) - g(x, y, c);
      }
      out.dx(x, y) = gx * inv_c;
      out.dy(x, y) = gy * inv_c;
    }
  return out;
}

/// G(p) = exp(-alpha * |grad I(p)|_2^beta) on the channel-mean gradient.
template <typename Scalar>
ImageGrid<Scalar> edge_weight(const ImageGrid<Scalar>& image, Scalar alpha, Scalar beta) {
  if (image.empty()) throw Error(ErrorCode::InvalidInput, "edge_weight: empty image");
  const auto grads = mean_channel_gradients(image);
  ImageGrid<Scalar> w(image.width(), image.height(), 1);
  using std::exp;
  using std::hypot;
  using std::pow;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const Scalar mag = hypot(grads.dx(x, y), grads.dy(x, y));
      w(x, y) = mag > 0 ? exp(-alpha * pow(mag, beta)) : Scalar(1);
    }
  return w;
}

/// 2x2 box filter; odd trailing rows/columns are dropped.
template <typename Scalar>
ImageGrid<Scalar> downsample_box(const ImageGrid<Scalar>& g) {
  const int w = g.width() / 2, h = g.height() / 2;
  if (w < 1 || h < 1) throw Error(ErrorCode::GridTooSmall, "downsample_box: grid too small");
  ImageGrid<Scalar> out(w, h, g.channels());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < g.channels(); ++c)
        out(x, y, c) = Scalar(0.25) * (g(2 * x, 2 * y, c) + g(2 * x + 1, 2 * y, c) +
                                       g(2 * x, 2 * y + 1, c) + g(2 * x + 1, 2 * y + 1, c));
  return out;
}

/// Bilinear upsampling to (width, height) that inverts downsample_box's
/// pixel-center mapping x_coarse = (x_fine - 0.5) / 2, clamped at the border.
template <typename Scalar>
ImageGrid<Scalar> upsample_bilinear(const ImageGrid<Scalar>& g, int width, int height) {
  ImageGrid<Scalar> out(width, height, g.channels());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Scalar qx = std::clamp((Scalar(x) - Scalar(0.5)) / 2, Scalar(0), Scalar(g.width() - 1));
      const Scalar qy = std::clamp((Scalar(y) - Scalar(0.5)) / 2, Scalar(0), Scalar(g.height() - 1));
      out.set_pixel(x, y, bilinear_sample(g, Vec2<Scalar>(qx, qy)).value);
    }
  return out;
}

/// Flip n so that it faces the camera along ray, i.e. <n, ray> < 0.
template <typename Scalar>
Vec3<Scalar> face_camera(const Vec3<Scalar>& n, const Vec3<Scalar>& ray) {
  return n.dot(ray) >= 0 ? Vec3<Scalar>(-n) : n;
}

/// Normalizes every pixel and flips it toward the camera. Zero vectors become
/// the fronto-parallel normal.
template <typename Scalar>
void project_normals(NormalMap<Scalar>& normals, const Intrinsics<Scalar>& k) {
  for (int y = 0; y < normals.height(); ++y)
    for (int x = 0; x < normals.width(); ++x) {
      Vec3<Scalar> n = normals(x, y);
      const Scalar len = n.norm();
      n = len > Scalar(1e-12) ? Vec3<Scalar>(n / len) : Vec3<Scalar>(0, 0, -1);
      normals.set(x, y, face_camera(n, backproject(Scalar(x), Scalar(y), k)));
    }
}

template <typename Scalar>
NormalMap<Scalar> constant_normals(int width, int height, const Vec3<Scalar>& n) {
  NormalMap<Scalar> out{ImageGrid<Scalar>(width, height, 3)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out.set(x, y, n);
  return out;
}

}  // namespace geoloss
