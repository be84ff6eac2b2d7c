#include "geoloss/losses.hpp"

#include <cmath>
#include <limits>

namespace geoloss {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sgn(double r) { return double((r > 0) - (r < 0)); }

double grid_line_distance(const Vec2<double>& q) {
  auto d = [](double v) { return std::abs(v - std::round(v)); };
  return std::min(d(q.x()), d(q.y()));
}

// Distance to the nearest grid line along the coordinates that dq moves.
double moving_grid_distance(const Vec2<double>& q, const Vec2<double>& dq) {
  auto d = [](double v) { return std::abs(v - std::round(v)); };
  double m = kInf;
  for (int i = 0; i < 2; ++i)
    if (std::abs(dq[i]) > 1e-12 * dq.norm()) m = std::min(m, d(q[i]));
  return m;
}

// Largest single-component pose step, to first order, before a value v that
// moves at rate `rate` per unit xi reaches zero.
double pose_steps(double v, const Eigen::Matrix<double, 1, 6>& rate) {
  const double r = rate.cwiseAbs().maxCoeff();
  return r > 0 ? std::abs(v) / r : kInf;
}

double pose_steps_to_grid(const Vec2<double>& q, const Eigen::Matrix<double, 2, 6>& dq_dxi) {
  auto d = [](double v) { return std::abs(v - std::round(v)); };
  return std::min(pose_steps(d(q.x()), dq_dxi.row(0)), pose_steps(d(q.y()), dq_dxi.row(1)));
}

// Image position of the point seen at pixel (x, y) along `ray` after it moves
// to `m`, any positive multiple of the moved point, as a displacement from
// (x, y). Identity motion returns (x, y) exactly.
std::optional<Vec2<double>> warp(int x, int y, const Vec3<double>& ray, const Vec3<double>& m, const Intrinsicsd& k) {
  if (!(m.z() > 0)) return std::nullopt;
  return Vec2<double>(x + k.fx * (m.x() / m.z() - ray.x()), y + k.fy * (m.y() / m.z() - ray.y()));
}

// The moved point divided by its depth before the motion.
Vec3<double> moved_direction(const RigidTransformd& t, const Vec3<double>& ray, double dinv) {
  return t.rotation() * ray + t.translation() * (dinv + kInverseDepthOffset);
}

void require_same_resolution(const ImageGridd& a, const ImageGridd& b, const char* what) {
  if (!a.same_resolution(b))
    throw Error(ErrorCode::ResolutionMismatch,
                std::string(what) + ": " + std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                    std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

void init_result(TermResult& r, int w, int h, bool with_gradients) {
  if (with_gradients) r.grad = Gradients::zeros(w, h);
  r.kink_margin = ImageGridd(w, h, 1, kInf);
  r.kink_margin_prev = ImageGridd(w, h, 1, kInf);
}

// Neumaier summation.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0, comp_ = 0;
};

void lower(ImageGridd& margin, int x, int y, double v) {
  if (v < margin(x, y)) margin(x, y) = v;
}

void add_vec3(ImageGridd& g, int x, int y, const Vec3<double>& v) {
  g(x, y, 0) += v.x();
  g(x, y, 1) += v.y();
  g(x, y, 2) += v.z();
}

}  // namespace

bool LossWeights::valid() const {
  for (double l : lambda)
    if (!(l >= 0) || !std::isfinite(l)) return false;
  return true;
}

Gradients Gradients::zeros(int width, int height) {
  Gradients g;
  g.d_dinv = ImageGridd(width, height, 1);
  g.d_normals = ImageGridd(width, height, 3);
  g.d_dinv_prev = ImageGridd(width, height, 1);
  g.d_normals_prev = ImageGridd(width, height, 3);
  return g;
}

void Gradients::accumulate(const Gradients& other, double scale) {
  auto add = [scale](ImageGridd& dst, const ImageGridd& src) {
    if (src.empty()) return;
    if (dst.empty()) dst = ImageGridd(src.width(), src.height(), src.channels());
    dst.data() += scale * src.data();
  };
  add(d_dinv, other.d_dinv);
  add(d_normals, other.d_normals);
  add(d_dinv_prev, other.d_dinv_prev);
  add(d_normals_prev, other.d_normals_prev);
  d_xi += scale * other.d_xi;
}

bool Gradients::all_finite() const {
  return d_dinv.all_finite() && d_normals.all_finite() && d_dinv_prev.all_finite() &&
         d_normals_prev.all_finite() && d_xi.allFinite();
}

void project_to_tangent(ImageGridd& d_normals, const NormalMapd& normals) {
  for (int y = 0; y < normals.height(); ++y)
    for (int x = 0; x < normals.width(); ++x) {
      const Vec3<double> n = normals(x, y);
      const Vec3<double> g = d_normals.vec3(x, y);
      d_normals.set_pixel(x, y, g - g.dot(n) * n);
    }
}

PhotometricResult photometric_loss(const ImageGridd& left_t, const ImageGridd& right_t, const ImageGridd* left_prev,
                                   const InverseDepthMapd& dinv, const Intrinsicsd& k,
                                   const RigidTransformd& left_to_right, const RigidTransformd& pose,
                                   bool with_gradients) {
  if (!left_t.same_shape(right_t)) throw Error(ErrorCode::ResolutionMismatch, "photometric_loss: I_R^t shape");
  if (left_prev && !left_t.same_shape(*left_prev))
    throw Error(ErrorCode::ResolutionMismatch, "photometric_loss: I_L^{t-1} shape");
  require_same_resolution(left_t, dinv.grid, "photometric_loss: inverse depth");

  const int w = left_t.width(), h = left_t.height(), nc = left_t.channels();
  PhotometricResult out;
  init_result(out, w, h, with_gradients);
  out.stereo_mask = ValidityMask(w, h, false);
  out.temporal_mask = ValidityMask(w, h, false);
  CompensatedSum stereo_sum, temporal_sum;

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Vec3<double> ray = backproject(double(x), double(y), k);
      const double depth = depth_from_inverse(dinv(x, y));
      const Vec3<double> point = depth * ray;
      const double d_depth = -depth * depth;

      auto branch = [&](const ImageGridd& src, const RigidTransformd& t, bool pose_gradient, CompensatedSum& value,
                        ValidityMask& mask) {
        const Vec3<double> moved = t.apply(point);
        const auto q = warp(x, y, ray, moved_direction(t, ray, dinv(x, y)), k);
        if (!q) return;
        const auto s = bilinear_sample(src, *q);
        if (!s.valid) return;
        mask.set(x, y, true);
        const Mat23<double> jp = project_jacobian(moved, k);
        const Vec2<double> dq = jp * t.rotation() * ray * d_depth;
        lower(out.kink_margin, x, y, moving_grid_distance(*q, dq));
        Eigen::RowVector2d g_q = Eigen::RowVector2d::Zero();
        for (int c = 0; c < nc; ++c) {
          const double r = left_t(x, y, c) - s.value[c];
          value.add(std::abs(r));
          lower(out.kink_margin, x, y, std::abs(r));
          g_q -= sgn(r) * s.d_q.row(c);
        }
        if (!with_gradients) return;
        const Eigen::RowVector3d g_moved = g_q * jp;
        out.grad.d_dinv(x, y) += g_moved.dot(t.rotation() * ray) * d_depth;
        if (!pose_gradient) return;
        const Eigen::Matrix<double, 2, 6> dq_dxi = jp * t.apply_jacobian(point);
        out.grad.d_xi += (g_q * dq_dxi).transpose();
        out.pose_margin = std::min(out.pose_margin, pose_steps_to_grid(*q, dq_dxi));
        for (int c = 0; c < nc; ++c)
          out.pose_margin =
              std::min(out.pose_margin, pose_steps(left_t(x, y, c) - s.value[c], -s.d_q.row(c) * dq_dxi));
      };

      branch(right_t, left_to_right, false, stereo_sum, out.stereo_mask);
      if (left_prev) branch(*left_prev, pose, true, temporal_sum, out.temporal_mask);
    }

  out.stereo_value = stereo_sum.value();
  out.temporal_value = temporal_sum.value();
  out.value = out.stereo_value + out.temporal_value;
  out.valid_count = out.stereo_mask.count() + out.temporal_mask.count();
  return out;
}

TermResult normal_smoothness_loss(const NormalMapd& normals, const ImageGridd& image, bool with_gradients) {
  require_same_resolution(normals.grid, image, "normal_smoothness_loss");
  const int w = normals.width(), h = normals.height(), nc = image.channels();
  TermResult out;
  init_result(out, w, h, with_gradients);
  CompensatedSum sum;

  auto pair = [&](int x, int y, int x2, int y2) {
    double edge = 0;
    for (int c = 0; c < nc; ++c) edge += std::abs(image(x2, y2, c) - image(x, y, c));
    const double weight = std::exp(-edge / nc);
    for (int c = 0; c < 3; ++c) {
      const double diff = normals.grid(x2, y2, c) - normals.grid(x, y, c);
      sum.add(weight * std::abs(diff));
      lower(out.kink_margin, x, y, std::abs(diff));
      lower(out.kink_margin, x2, y2, std::abs(diff));
      if (with_gradients) {
        const double s = weight * sgn(diff);
        out.grad.d_normals(x2, y2, c) += s;
        out.grad.d_normals(x, y, c) -= s;
      }
    }
  };

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w) pair(x, y, x + 1, y);
      if (y + 1 < h) pair(x, y, x, y + 1);
    }
  out.value = sum.value();
  out.valid_count = long(w) * h;
  if (with_gradients) project_to_tangent(out.grad.d_normals, normals);
  return out;
}

TermResult depth_normal_consistency_loss(const InverseDepthMapd& dinv, const NormalMapd& normals,
                                         const ImageGridd& image, const Intrinsicsd& k, double alpha, double beta,
                                         bool with_gradients) {
  require_same_resolution(dinv.grid, normals.grid, "depth_normal_consistency_loss: normals");
  require_same_resolution(dinv.grid, image, "depth_normal_consistency_loss: image");
  const int w = dinv.width(), h = dinv.height();
  const ImageGridd g = edge_weight(image, alpha, beta);
  TermResult out;
  init_result(out, w, h, with_gradients);
  CompensatedSum sum;

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Vec3<double> n = normals(x, y);
      const Vec3<double> ray_p = backproject(double(x), double(y), k);
      const double c_pp = n.dot(ray_p);
      const double dp = dinv(x, y);
      // q = p contributes D(p) c_pp - D(p) c_pp = 0 and is left out of the loop.
      const int qs[2][2] = {{x + 1, y}, {x, y + 1}};
      for (const auto& qq : qs) {
        const int qx = qq[0], qy = qq[1];
        if (qx >= w || qy >= h) continue;
        const Vec3<double> ray_q = backproject(double(qx), double(qy), k);
        const double c_pq = n.dot(ray_q);
        const double dq = dinv(qx, qy);
        const double r = dp * c_pq - dq * c_pp;
        sum.add(g(x, y) * std::abs(r));
        lower(out.kink_margin, x, y, std::abs(r));
        lower(out.kink_margin, qx, qy, std::abs(r));
        if (with_gradients) {
          const double s = g(x, y) * sgn(r);
          out.grad.d_dinv(x, y) += s * c_pq;
          out.grad.d_dinv(qx, qy) -= s * c_pp;
          add_vec3(out.grad.d_normals, x, y, s * (dp * ray_q - dq * ray_p));
        }
      }
    }
  out.value = sum.value();
  out.valid_count = long(w) * h;
  if (with_gradients) project_to_tangent(out.grad.d_normals, normals);
  return out;
}

double point_plane_residual(const InverseDepthMapd& dinv, const NormalMapd& normals, const Intrinsicsd& k, int px,
                            int py, int qx, int qy) {
  const Vec3<double> xp = depth_from_inverse(dinv(px, py)) * backproject(double(px), double(py), k);
  const Vec3<double> xq = depth_from_inverse(dinv(qx, qy)) * backproject(double(qx), double(qy), k);
  return normals(px, py).dot(xq - xp);
}

TermResult normal_direction_loss(const NormalMapd& normals, const NormalMapd& computed, bool with_gradients) {
  require_same_resolution(normals.grid, computed.grid, "normal_direction_loss");
  const int w = normals.width(), h = normals.height();
  const double n_pix = double(w) * h;
  TermResult out;
  init_result(out, w, h, with_gradients);
  double sum = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Vec3<double> diff = normals(x, y) - computed(x, y);
      sum += diff.squaredNorm();
      if (with_gradients) out.grad.d_normals.set_pixel(x, y, diff / n_pix);
    }
  out.value = sum / (2 * n_pix);
  out.valid_count = long(w) * h;
  if (with_gradients) project_to_tangent(out.grad.d_normals, normals);
  return out;
}

namespace {

// As transport_previous, but the inverse depth keeps the kInverseDepthOffset
// shift. A static camera reproduces Dinv + offset bit for bit.
TransportedGeometry transport_shifted(const InverseDepthMapd& dinv_prev, const NormalMapd& normals_prev,
                                      const Intrinsicsd& k, const RigidTransformd& pose) {
  require_same_resolution(dinv_prev.grid, normals_prev.grid, "transport_previous");
  const int w = dinv_prev.width(), h = dinv_prev.height();
  TransportedGeometry out{InverseDepthMapd{ImageGridd(w, h, 1)}, NormalMapd{ImageGridd(w, h, 3)},
                          ValidityMask(w, h, false)};
  const Mat3<double> rt = pose.rotation().transpose();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double s = dinv_prev(x, y) + kInverseDepthOffset;
      const Vec3<double> ray = backproject(double(x), double(y), k);
      const double z = (rt * (ray - pose.translation() * s)).z();
      out.normals.set(x, y, rt * normals_prev(x, y));
      if (z > 0) {
        out.dinv(x, y) = s / z;
        out.valid.set(x, y, true);
      }
    }
  return out;
}

}  // namespace

TransportedGeometry transport_previous(const InverseDepthMapd& dinv_prev, const NormalMapd& normals_prev,
                                       const Intrinsicsd& k, const RigidTransformd& pose) {
  TransportedGeometry out = transport_shifted(dinv_prev, normals_prev, k, pose);
  for (int y = 0; y < out.dinv.height(); ++y)
    for (int x = 0; x < out.dinv.width(); ++x)
      if (out.valid(x, y)) out.dinv(x, y) -= kInverseDepthOffset;
  return out;
}

TemporalResult temporal_consistency_losses(const InverseDepthMapd& dinv_t, const InverseDepthMapd& dinv_prev,
                                           const NormalMapd& normals_t, const NormalMapd& normals_prev,
                                           const Intrinsicsd& k, const RigidTransformd& pose,
                                           bool with_gradients) {
  require_same_resolution(dinv_t.grid, dinv_prev.grid, "temporal_consistency_losses: previous inverse depth");
  require_same_resolution(dinv_t.grid, normals_t.grid, "temporal_consistency_losses: normals");
  require_same_resolution(dinv_t.grid, normals_prev.grid, "temporal_consistency_losses: previous normals");
  const int w = dinv_t.width(), h = dinv_t.height();

  TemporalResult out;
  init_result(out.depth, w, h, with_gradients);
  init_result(out.normal, w, h, with_gradients);
  out.mask = ValidityMask(w, h, false);
  CompensatedSum depth_sum, normal_sum;

  const TransportedGeometry moved = transport_shifted(dinv_prev, normals_prev, k, pose);

  // Per previous pixel: d Dinv' / d xi, d Dinv' / d Dinv_prev and
  // d N' / d omega.
  std::vector<Vec6<double>> ddinv_dxi;
  std::vector<double> ddinv_dprev;
  std::vector<Mat3<double>> dn_domega;
  if (with_gradients) {
    ddinv_dxi.resize(std::size_t(w) * h, Vec6<double>::Zero());
    ddinv_dprev.resize(std::size_t(w) * h, 0.0);
    dn_domega.resize(std::size_t(w) * h, Mat3<double>::Zero());
    const Mat3<double> rt = pose.rotation().transpose();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = std::size_t(y) * w + x;
        dn_domega[i] = pose.inverse_rotate_jacobian(normals_prev(x, y));
        if (!moved.valid(x, y)) continue;
        const Vec3<double> ray = backproject(double(x), double(y), k);
        const double depth = depth_from_inverse(dinv_prev(x, y));
        const Vec3<double> point = depth * ray;
        const double z = pose.apply_inverse(point).z();
        const double dinv_dz = -1.0 / (z * z);
        ddinv_dxi[i] = dinv_dz * pose.apply_inverse_jacobian(point).row(2).transpose();
        ddinv_dprev[i] = dinv_dz * (rt * ray).z() * (-depth * depth);
      }
  }

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Vec3<double> ray = backproject(double(x), double(y), k);
      const double depth = depth_from_inverse(dinv_t(x, y));
      const Vec3<double> point = depth * ray;
      const Vec3<double> in_prev = pose.apply(point);
      const auto q = warp(x, y, ray, moved_direction(pose, ray, dinv_t(x, y)), k);
      if (!q) continue;
      const auto taps = bilinear_taps(w, h, *q);
      if (!taps.valid) continue;
      bool taps_ok = true;
      for (int c = 0; c < 4; ++c) taps_ok = taps_ok && moved.valid(taps.cx(c), taps.cy(c));
      if (!taps_ok) continue;
      const auto sd = bilinear_sample(moved.dinv.grid, *q);
      const auto sn = bilinear_sample(moved.normals.grid, *q);
      const Vec3<double> wn = sn.value;
      const double wn_norm = wn.norm();
      if (!(wn_norm > 1e-12)) continue;
      const Vec3<double> u = wn / wn_norm;
      out.mask.set(x, y, true);

      const double r_d = (dinv_t(x, y) + kInverseDepthOffset) - sd.value[0];
      const Vec3<double> r_n = normals_t(x, y) - u;
      depth_sum.add(std::abs(r_d));
      normal_sum.add(r_n.cwiseAbs().sum());

      const double grid_dist = grid_line_distance(*q);
      const double m_d = std::min(grid_dist, std::abs(r_d));
      const double m_n = std::min(grid_dist, r_n.cwiseAbs().minCoeff());
      lower(out.depth.kink_margin, x, y, m_d);
      lower(out.normal.kink_margin, x, y, m_n);
      for (int c = 0; c < 4; ++c) {
        lower(out.depth.kink_margin_prev, taps.cx(c), taps.cy(c), m_d);
        lower(out.normal.kink_margin_prev, taps.cx(c), taps.cy(c), m_n);
      }
      if (!with_gradients) continue;

      // dL/d(sample) for both terms.
      const double g_s = -sgn(r_d);
      const Vec3<double> g_u(-sgn(r_n.x()), -sgn(r_n.y()), -sgn(r_n.z()));
      const Vec3<double> g_w = (g_u - u * u.dot(g_u)) / wn_norm;

      const Eigen::RowVector2d gq_d = g_s * sd.d_q.row(0);
      const Eigen::RowVector2d gq_n = g_w.transpose() * sn.d_q;
      const Mat23<double> jp = project_jacobian(in_prev, k);
      const Vec3<double> dmoved_ddinv = pose.rotation() * ray * (-depth * depth);
      const Mat36<double> dmoved_dxi = pose.apply_jacobian(point);

      out.depth.grad.d_dinv(x, y) += sgn(r_d) + (gq_d * jp).dot(dmoved_ddinv);
      out.normal.grad.d_dinv(x, y) += (gq_n * jp).dot(dmoved_ddinv);
      const Eigen::Matrix<double, 2, 6> dq_dxi = jp * dmoved_dxi;
      out.depth.grad.d_xi += (gq_d * dq_dxi).transpose();
      out.normal.grad.d_xi += (gq_n * dq_dxi).transpose();
      add_vec3(out.normal.grad.d_normals, x, y, -g_u);

      // Rates of the sampled depth and the unnormalized sampled normal.
      Eigen::Matrix<double, 1, 6> dsd_dxi = sd.d_q.row(0) * dq_dxi;
      Eigen::Matrix<double, 3, 6> dwn_dxi = sn.d_q * dq_dxi;
      for (int c = 0; c < 4; ++c) {
        const double wt = taps.weight(c);
        if (wt == 0) continue;
        const int tx = taps.cx(c), ty = taps.cy(c);
        const std::size_t i = std::size_t(ty) * w + tx;
        out.depth.grad.d_xi += wt * g_s * ddinv_dxi[i];
        out.depth.grad.d_dinv_prev(tx, ty) += wt * g_s * ddinv_dprev[i];
        out.normal.grad.d_xi.tail<3>() += wt * (g_w.transpose() * dn_domega[i]).transpose();
        add_vec3(out.normal.grad.d_normals_prev, tx, ty, wt * (pose.rotation() * g_w));
        dsd_dxi += wt * ddinv_dxi[i].transpose();
        dwn_dxi.rightCols<3>() += wt * dn_domega[i];
      }

      const double grid_steps = pose_steps_to_grid(*q, dq_dxi);
      const Eigen::Matrix<double, 3, 6> du_dxi = (Mat3<double>::Identity() - u * u.transpose()) * dwn_dxi / wn_norm;
      out.depth.pose_margin = std::min({out.depth.pose_margin, grid_steps, pose_steps(r_d, -dsd_dxi)});
      out.normal.pose_margin = std::min(out.normal.pose_margin, grid_steps);
      for (int c = 0; c < 3; ++c)
        out.normal.pose_margin = std::min(out.normal.pose_margin, pose_steps(r_n[c], -du_dxi.row(c)));
    }

  out.depth.value = depth_sum.value();
  out.normal.value = normal_sum.value();
  out.depth.valid_count = out.normal.valid_count = out.mask.count();
  if (with_gradients) {
    project_to_tangent(out.normal.grad.d_normals, normals_t);
    project_to_tangent(out.normal.grad.d_normals_prev, normals_prev);
  }
  return out;
}

TotalLoss total_loss(const LossInputs& in, const LossWeights& w, bool with_gradients) {
  if (!in.left_t || !in.right_t || !in.dinv || !in.normals)
    throw Error(ErrorCode::InvalidInput, "total_loss: missing required input");
  if (!w.valid()) throw Error(ErrorCode::InvalidInput, "total_loss: weights must be nonnegative");
  const int width = in.dinv->width(), height = in.dinv->height();
  TotalLoss out;
  if (with_gradients) out.grad = Gradients::zeros(width, height);

  auto record = [&](Term t, const TermResult& r) {
    const auto i = std::size_t(t);
    out.report.terms[i] = r.value;
    out.report.counts[i] = r.valid_count;
    out.report.means[i] = r.valid_count > 0 ? r.value / double(r.valid_count) : 0.0;
    out.report.total += w[t] * r.value;
    if (with_gradients) out.grad.accumulate(r.grad, w[t]);
  };

  if (w[Term::Photometric] > 0)
    record(Term::Photometric, photometric_loss(*in.left_t, *in.right_t, in.left_prev, *in.dinv, in.k,
                                               in.left_to_right, in.pose, with_gradients));
  if (w[Term::DepthNormal] > 0)
    record(Term::DepthNormal, depth_normal_consistency_loss(*in.dinv, *in.normals, *in.left_t, in.k, in.edge_alpha,
                                                            in.edge_beta, with_gradients));
  if (w[Term::NormalDirection] > 0)
    record(Term::NormalDirection,
           normal_direction_loss(*in.normals, normal_from_depth(*in.dinv, in.k), with_gradients));
  if (w[Term::NormalSmoothness] > 0)
    record(Term::NormalSmoothness, normal_smoothness_loss(*in.normals, *in.left_t, with_gradients));
  const bool temporal = in.dinv_prev && in.normals_prev;
  if (temporal && (w[Term::DepthTemporal] > 0 || w[Term::NormalTemporal] > 0)) {
    const auto tr = temporal_consistency_losses(*in.dinv, *in.dinv_prev, *in.normals, *in.normals_prev, in.k,
                                                in.pose, with_gradients);
    if (w[Term::DepthTemporal] > 0) record(Term::DepthTemporal, tr.depth);
    if (w[Term::NormalTemporal] > 0) record(Term::NormalTemporal, tr.normal);
  }
  return out;
}

}  // namespace geoloss
