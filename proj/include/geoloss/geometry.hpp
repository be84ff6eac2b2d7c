#pragma once

// Pinhole camera and SE(3) rigid-body transforms.
//
// Pixel coordinates are (x = column, y = row) with the origin at the center
// of the top-left pixel. A RigidTransform maps points expressed in a source
// frame into a destination frame: X_dst = R * X_src + t. The pose unknown of
// the solver is T_{t -> t-1}, i.e. it maps points of the current frame into
// the previous one.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <optional>

#include "geoloss/error.hpp"

namespace geoloss {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vec6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Mat36 = Eigen::Matrix<Scalar, 3, 6>;
template <typename Scalar>
using Mat23 = Eigen::Matrix<Scalar, 2, 3>;

template <typename Scalar>
struct Intrinsics {
  Scalar fx{1}, fy{1}, cx{0}, cy{0};

  bool valid() const {
    return fx > 0 && fy > 0 && std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) &&
           std::isfinite(cy);
  }

  Mat3<Scalar> matrix() const {
    Mat3<Scalar> k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  // Calibration of the image obtained by 2x2 box-filtering: the new pixel i
  // covers old pixels 2i and 2i+1, whose centers average to 2i + 0.5.
  Intrinsics halved() const { return {fx / 2, fy / 2, (cx - Scalar(0.5)) / 2, (cy - Scalar(0.5)) / 2}; }

  template <typename Other>
  Intrinsics<Other> cast() const {
    return {Other(fx), Other(fy), Other(cx), Other(cy)};
  }
};

using Intrinsicsd = Intrinsics<double>;

/// Skew-symmetric matrix such that skew(a) * b == a.cross(b).
template <typename Derived>
Mat3<typename Derived::Scalar> skew(const Eigen::MatrixBase<Derived>& v) {
  Mat3<typename Derived::Scalar> s;
  s << 0, -v(2), v(1), v(2), 0, -v(0), -v(1), v(0), 0;
  return s;
}

/// Homogeneous backprojection K^-1 p; the third component is exactly 1.
template <typename Scalar>
Vec3<Scalar> backproject(const Vec2<Scalar>& p, const Intrinsics<Scalar>& k) {
  return {(p.x() - k.cx) / k.fx, (p.y() - k.cy) / k.fy, Scalar(1)};
}

template <typename Scalar>
Vec3<Scalar> backproject(Scalar x, Scalar y, const Intrinsics<Scalar>& k) {
  return {(x - k.cx) / k.fx, (y - k.cy) / k.fy, Scalar(1)};
}

/// Projection that reports points at or behind the camera as nullopt.
template <typename Scalar>
std::optional<Vec2<Scalar>> try_project(const Vec3<Scalar>& x, const Intrinsics<Scalar>& k) {
  if (!(x.z() > 0)) return std::nullopt;
  return Vec2<Scalar>(k.fx * x.x() / x.z() + k.cx, k.fy * x.y() / x.z() + k.cy);
}

template <typename Scalar>
Vec2<Scalar> project(const Vec3<Scalar>& x, const Intrinsics<Scalar>& k) {
  auto p = try_project(x, k);
  if (!p) throw Error(ErrorCode::NonPositiveDepth, "project: point at or behind the camera");
  return *p;
}

/// d project(X) / dX.
template <typename Scalar>
Mat23<Scalar> project_jacobian(const Vec3<Scalar>& x, const Intrinsics<Scalar>& k) {
  const Scalar iz = Scalar(1) / x.z();
  Mat23<Scalar> j;
  j << k.fx * iz, 0, -k.fx * x.x() * iz * iz, 0, k.fy * iz, -k.fy * x.y() * iz * iz;
  return j;
}

namespace detail {

// Coefficients of the SO(3)/SE(3) series in theta:
//   a = (1 - cos t) / t^2, b = (t - sin t) / t^3,
//   da = a'(t) / t,        db = b'(t) / t.
template <typename Scalar>
struct So3Coefficients {
  Scalar sinc, a, b, da, db;
};

template <typename Scalar>
So3Coefficients<Scalar> so3_coefficients(Scalar theta) {
  using std::cos;
  using std::sin;
  So3Coefficients<Scalar> c;
  const Scalar t2 = theta * theta;
  if (theta < Scalar(1e-6)) {
    c.sinc = 1 - t2 / 6;
    c.a = Scalar(0.5) - t2 / 24;
  } else {
    const Scalar h = sin(theta / 2) / theta;
    c.sinc = sin(theta) / theta;
    c.a = 2 * h * h;
  }
  // The remaining closed forms lose all precision to cancellation well above
  // 1e-6, so they switch to their series on a wider interval.
  if (theta < Scalar(1e-2)) {
    c.b = Scalar(1) / 6 - t2 / 120 + t2 * t2 / 5040;
    c.da = -Scalar(1) / 12 + t2 / 180;
    c.db = -Scalar(1) / 60 + t2 / 1260;
  } else {
    const Scalar s = sin(theta), co = cos(theta);
    const Scalar t3 = t2 * theta;
    c.b = (theta - s) / t3;
    c.da = (theta * s - 2 + 2 * co) / (t2 * t2);
    c.db = (3 * s - 2 * theta - theta * co) / (t3 * t2);
  }
  return c;
}

}  // namespace detail

/// SE(3) element. The 6-vector is (rho, omega): rho is the translational
/// part of the twist (meters), omega the rotation vector (radians).
template <typename Scalar>
class RigidTransform {
 public:
  RigidTransform() { set_xi(Vec6<Scalar>::Zero()); }

  static RigidTransform identity() { return RigidTransform(); }

  static RigidTransform exp(const Vec6<Scalar>& xi) {
    RigidTransform t;
    t.set_xi(xi);
    return t;
  }

  static RigidTransform from_rt(const Mat3<Scalar>& rotation, const Vec3<Scalar>& translation);

  static RigidTransform translation_only(const Vec3<Scalar>& t) {
    Vec6<Scalar> xi;
    xi << t, Vec3<Scalar>::Zero();
    return exp(xi);
  }

  const Vec6<Scalar>& xi() const { return xi_; }
  Vec3<Scalar> rho() const { return xi_.template head<3>(); }
  Vec3<Scalar> omega() const { return xi_.template tail<3>(); }
  const Mat3<Scalar>& rotation() const { return rotation_; }
  const Vec3<Scalar>& translation() const { return translation_; }

  Eigen::Matrix<Scalar, 4, 4> matrix() const {
    Eigen::Matrix<Scalar, 4, 4> m = Eigen::Matrix<Scalar, 4, 4>::Identity();
    m.template topLeftCorner<3, 3>() = rotation_;
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  Vec3<Scalar> apply(const Vec3<Scalar>& x) const { return rotation_ * x + translation_; }
  Vec3<Scalar> apply_inverse(const Vec3<Scalar>& x) const {
    return rotation_.transpose() * (x - translation_);
  }

  RigidTransform inverse() const {
    return from_rt(rotation_.transpose(), -(rotation_.transpose() * translation_));
  }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return from_rt(rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_);
  }

  /// Left Jacobian of SO(3) at omega; also maps rho onto the translation.
  Mat3<Scalar> left_jacobian() const {
    const Mat3<Scalar> w = skew(omega());
    return Mat3<Scalar>::Identity() + coeff_.a * w + coeff_.b * w * w;
  }

  Mat3<Scalar> right_jacobian() const {
    const Mat3<Scalar> w = skew(omega());
    return Mat3<Scalar>::Identity() - coeff_.a * w + coeff_.b * w * w;
  }

  /// d apply(x) / d xi.
  Mat36<Scalar> apply_jacobian(const Vec3<Scalar>& x) const {
    Mat36<Scalar> j;
    j.template leftCols<3>() = left_jacobian();
    j.template rightCols<3>() = -rotation_ * skew(x) * right_jacobian() + translation_jacobian_omega();
    return j;
  }

  /// d apply_inverse(x) / d xi.
  Mat36<Scalar> apply_inverse_jacobian(const Vec3<Scalar>& x) const {
    const Mat3<Scalar> rt = rotation_.transpose();
    const Vec3<Scalar> z = rt * (x - translation_);
    Mat36<Scalar> j;
    j.template leftCols<3>() = -rt * left_jacobian();
    j.template rightCols<3>() = skew(z) * right_jacobian() - rt * translation_jacobian_omega();
    return j;
  }

  /// d (R^T n) / d omega; the derivative with respect to rho is zero.
  Mat3<Scalar> inverse_rotate_jacobian(const Vec3<Scalar>& n) const {
    return skew(Vec3<Scalar>(rotation_.transpose() * n)) * right_jacobian();
  }

  template <typename Other>
  RigidTransform<Other> cast() const {
    return RigidTransform<Other>::exp(xi_.template cast<Other>());
  }

 private:
  void set_xi(const Vec6<Scalar>& xi) {
    xi_ = xi;
    const Vec3<Scalar> w = omega();
    coeff_ = detail::so3_coefficients(w.norm());
    const Mat3<Scalar> wx = skew(w);
    rotation_ = Mat3<Scalar>::Identity() + coeff_.sinc * wx + coeff_.a * wx * wx;
    translation_ = left_jacobian() * rho();
  }

  // d (V(omega) rho) / d omega.
  Mat3<Scalar> translation_jacobian_omega() const {
    const Vec3<Scalar> w = omega();
    const Vec3<Scalar> r = rho();
    const Vec3<Scalar> wr = w.cross(r);
    const Vec3<Scalar> wwr = w.cross(wr);
    Mat3<Scalar> j = -coeff_.a * skew(r) + coeff_.da * wr * w.transpose();
    j += coeff_.b * (w.dot(r) * Mat3<Scalar>::Identity() + w * r.transpose() - 2 * r * w.transpose());
    j += coeff_.db * wwr * w.transpose();
    return j;
  }

  Vec6<Scalar> xi_;
  detail::So3Coefficients<Scalar> coeff_{};
  Mat3<Scalar> rotation_;
  Vec3<Scalar> translation_;
};

using RigidTransformd = RigidTransform<double>;

/// Rotation vector of an orthonormal matrix, valid for angles in [0, pi).
template <typename Scalar>
Vec3<Scalar> so3_log(const Mat3<Scalar>& r) {
  Eigen::AngleAxis<Scalar> aa(r);
  return aa.angle() * aa.axis();
}

template <typename Scalar>
RigidTransform<Scalar> RigidTransform<Scalar>::from_rt(const Mat3<Scalar>& rotation,
                                                       const Vec3<Scalar>& translation) {
  const Vec3<Scalar> w = so3_log(rotation);
  RigidTransform<Scalar> probe;
  Vec6<Scalar> xi;
  xi << Vec3<Scalar>::Zero(), w;
  probe.set_xi(xi);
  xi.template head<3>() = probe.left_jacobian().inverse() * translation;
  RigidTransform<Scalar> out;
  out.xi_ = xi;
  out.coeff_ = probe.coeff_;
  // Keep the caller's matrices verbatim instead of re-deriving them.
  out.rotation_ = rotation;
  out.translation_ = translation;
  return out;
}

template <typename Scalar>
RigidTransform<Scalar> se3_exp(const Vec6<Scalar>& xi) {
  return RigidTransform<Scalar>::exp(xi);
}

template <typename Scalar>
Vec6<Scalar> se3_log(const RigidTransform<Scalar>& t) {
  return t.xi();
}

template <typename Scalar>
Vec3<Scalar> transform_point(const RigidTransform<Scalar>& t, const Vec3<Scalar>& x) {
  return t.apply(x);
}

/// Carries a unit normal of the previous frame into the current one, R^T n.
template <typename Scalar>
Vec3<Scalar> transform_normal(const Mat3<Scalar>& rotation, const Vec3<Scalar>& n) {
  using std::abs;
  if (!(abs(n.norm() - Scalar(1)) <= Scalar(1e-6)))
    throw Error(ErrorCode::NotUnit, "transform_normal: input is not unit length");
  return rotation.transpose() * n;
}

}  // namespace geoloss
