#pragma once

#include <limits>

// The six self-supervised loss terms with analytic gradients with respect to
// inverse depth, normals (tangent space of the unit sphere) and the se(3)
// pose twist.
//
// All sums are raw sums over pixels in row-major order. L1 terms use the
// subgradient sign(0) = 0. Pixels whose warp leaves the source image or lands
// behind the camera are masked and contribute nothing.

#include <array>
#include <optional>
#include <string>

#include "geoloss/geometry.hpp"
#include "geoloss/image_grid.hpp"

namespace geoloss {

enum class Term : int {
  Photometric = 0,       // L_P
  DepthNormal = 1,       // L_DN
  NormalDirection = 2,   // L_N
  NormalSmoothness = 3,  // L_NS
  DepthTemporal = 4,     // L_DC
  NormalTemporal = 5,    // L_NC
};

inline constexpr int kTermCount = 6;
inline constexpr std::array<const char*, kTermCount> kTermNames = {"L_P", "L_DN", "L_N", "L_NS", "L_DC", "L_NC"};

struct LossWeights {
  std::array<double, kTermCount> lambda = {1.0, 13.0, 1.0, 0.7, 1.0, 0.01};

  double operator[](Term t) const { return lambda[std::size_t(t)]; }
  double& operator[](Term t) { return lambda[std::size_t(t)]; }
  bool valid() const;
  static LossWeights zero() { return LossWeights{{0, 0, 0, 0, 0, 0}}; }
};

/// Gradients of a loss. Normal gradients are tangent to the unit sphere at the
/// corresponding normal. Fields a term does not touch stay zero.
struct Gradients {
  ImageGridd d_dinv;          // 1 channel
  ImageGridd d_normals;       // 3 channels
  Vec6<double> d_xi = Vec6<double>::Zero();
  ImageGridd d_dinv_prev;     // temporal terms only
  ImageGridd d_normals_prev;  // temporal terms only

  static Gradients zeros(int width, int height);
  void accumulate(const Gradients& other, double scale);
  bool all_finite() const;
};

/// Value, gradients and diagnostics of a single term.
///
/// kink_margin(p) is the smallest distance to a non-differentiable point over
/// everything pixel p's own variables feed into: |residual| of every L1 term
/// that involves p, and the distance of every warped sample coordinate that
/// moves with p to the nearest integer grid line. kink_margin_prev does the
/// same for the previous-frame fields of the temporal terms. pose_margin is
/// the largest single-component step of xi that, to first order, crosses no
/// kink anywhere; it is only computed along with gradients.
struct TermResult {
  double value = 0;
  long valid_count = 0;
  Gradients grad;
  ImageGridd kink_margin;
  ImageGridd kink_margin_prev;
  double pose_margin = std::numeric_limits<double>::infinity();
};

struct PhotometricResult : TermResult {
  double stereo_value = 0;
  double temporal_value = 0;
  ValidityMask stereo_mask;
  ValidityMask temporal_mask;
};

struct TemporalResult {
  TermResult depth;   // L_DC
  TermResult normal;  // L_NC
  ValidityMask mask;
};

/// L_P: L1 alignment of I_L^t with I_R^t warped through the stereo baseline
/// and, when left_prev is given, with I_L^{t-1} warped through the pose.
PhotometricResult photometric_loss(const ImageGridd& left_t, const ImageGridd& right_t, const ImageGridd* left_prev,
                                   const InverseDepthMapd& dinv, const Intrinsicsd& k,
                                   const RigidTransformd& left_to_right, const RigidTransformd& pose,
                                   bool with_gradients = true);

/// L_NS with per-axis weights exp(-|dI|), |dI| the channel mean of absolute
/// forward differences.
TermResult normal_smoothness_loss(const NormalMapd& normals, const ImageGridd& image, bool with_gradients = true);

/// L_DN over the neighborhood {p, right(p), below(p)}, weighted by G(p).
TermResult depth_normal_consistency_loss(const InverseDepthMapd& dinv, const NormalMapd& normals,
                                         const ImageGridd& image, const Intrinsicsd& k, double alpha = 1.0,
                                         double beta = 1.0, bool with_gradients = true);

/// <N(p), D(q) X(q) - D(p) X(p)>: the point-plane residual before division by
/// D(p) D(q).
double point_plane_residual(const InverseDepthMapd& dinv, const NormalMapd& normals, const Intrinsicsd& k, int px,
                            int py, int qx, int qy);

/// Mean-cross-product normals of the backprojected inverse-depth map, oriented
/// toward the camera. Border pixels copy the nearest interior normal.
NormalMapd normal_from_depth(const InverseDepthMapd& dinv, const Intrinsicsd& k);

/// L_N = 1/(2N) sum |N(p) - Nc(p)|^2, Nc held constant.
TermResult normal_direction_loss(const NormalMapd& normals, const NormalMapd& computed, bool with_gradients = true);

/// Previous-frame geometry expressed in the current frame, indexed by the
/// previous frame's pixels.
struct TransportedGeometry {
  InverseDepthMapd dinv;
  NormalMapd normals;
  ValidityMask valid;  // transported point in front of the camera
};

TransportedGeometry transport_previous(const InverseDepthMapd& dinv_prev, const NormalMapd& normals_prev,
                                       const Intrinsicsd& k, const RigidTransformd& pose);

/// L_DC and L_NC. The warped normal is bilinearly interpolated and then
/// re-normalized.
TemporalResult temporal_consistency_losses(const InverseDepthMapd& dinv_t, const InverseDepthMapd& dinv_prev,
                                           const NormalMapd& normals_t, const NormalMapd& normals_prev,
                                           const Intrinsicsd& k, const RigidTransformd& pose,
                                           bool with_gradients = true);

/// Everything the total loss reads. Optional members disable the terms that
/// need them: no left_prev disables the temporal photometric half, and no
/// previous geometry disables L_DC and L_NC.
struct LossInputs {
  const ImageGridd* left_t = nullptr;
  const ImageGridd* right_t = nullptr;
  const ImageGridd* left_prev = nullptr;
  const InverseDepthMapd* dinv = nullptr;
  const NormalMapd* normals = nullptr;
  const InverseDepthMapd* dinv_prev = nullptr;
  const NormalMapd* normals_prev = nullptr;
  Intrinsicsd k;
  RigidTransformd left_to_right;
  RigidTransformd pose;
  double edge_alpha = 1.0;
  double edge_beta = 1.0;
};

struct LossReport {
  double total = 0;
  std::array<double, kTermCount> terms{};
  std::array<double, kTermCount> means{};
  std::array<long, kTermCount> counts{};
};

struct TotalLoss {
  LossReport report;
  Gradients grad;
};

/// Weighted sum of the six terms, evaluated in the order L_P, L_DN, L_N, L_NS,
/// L_DC, L_NC. Terms with zero weight are skipped.
TotalLoss total_loss(const LossInputs& in, const LossWeights& w, bool with_gradients = true);

/// Removes the radial component of each normal gradient.
void project_to_tangent(ImageGridd& d_normals, const NormalMapd& normals);

}  // namespace geoloss
