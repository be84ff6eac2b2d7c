#pragma once

// Variational recovery of inverse depth, normals and ego-motion: Adam descent
// on the weighted total loss, run coarse to fine over an image pyramid.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "geoloss/losses.hpp"

namespace geoloss {

/// Two consecutive stereo pairs plus calibration. The previous-frame geometry
/// feeds the temporal consistency terms; solve() estimates it with a
/// stereo-only pass over (left_prev, right_prev) when it is not supplied.
struct StereoSequence {
  ImageGridd left_t, right_t;
  std::optional<ImageGridd> left_prev, right_prev;
  Intrinsicsd k;
  RigidTransformd left_to_right;
  std::optional<InverseDepthMapd> dinv_prev;
  std::optional<NormalMapd> normals_prev;

  int width() const { return left_t.width(); }
  int height() const { return left_t.height(); }
  void validate() const;
};

struct SolverConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int max_iterations = 2000;  // per pyramid level
  int pyramid_levels = 3;
  LossWeights weights;
  /// A level has plateaued when the mean loss of the last `plateau_window`
  /// iterations improves on the window before it by less than this fraction.
  double convergence_tol = 1e-6;
  int plateau_window = 50;
  int max_lr_drops = 2;  // per level
  std::uint64_t seed = 0;
  double initial_dinv = 0.1;
  double dinv_max = 2.0;
  double edge_alpha = 1.0;
  double edge_beta = 1.0;
  bool optimize_depth = true;
  bool optimize_normals = true;
  bool optimize_pose = true;
  /// Full-resolution starting values; a frozen block keeps them at every level.
  std::optional<InverseDepthMapd> initial_dinv_map;
  std::optional<NormalMapd> initial_normals;
  std::optional<Vec6<double>> initial_xi;

  void validate() const;
};

struct TraceRow {
  long iteration = 0;
  int level = 0;
  std::array<double, kTermCount> terms{};
  double total = 0;
  double learning_rate = 0;
};

struct AdamMoments {
  Eigen::ArrayXd m, v;

  void reset(Eigen::Index n) {
    m = Eigen::ArrayXd::Zero(n);
    v = Eigen::ArrayXd::Zero(n);
  }
};

struct SolveState {
  InverseDepthMapd dinv;
  NormalMapd normals;
  Vec6<double> xi = Vec6<double>::Zero();
  AdamMoments dinv_moments, normal_moments, pose_moments;
  long iteration = 0;        // total steps taken
  long level_iteration = 0;  // steps at the current level, drives bias correction
  int level = 0;
  double learning_rate = 0;
  std::vector<TraceRow> history;
};

/// 2x2 box-filtered copy of the sequence `level` times, with the calibration
/// scaled to match. Previous-frame geometry is reduced the same way (normals
/// re-normalized).
StereoSequence downsample_sequence(const StereoSequence& seq, int level);

SolveState initialize(const StereoSequence& seq, const SolverConfig& cfg);

/// Evaluates the total loss at the current state.
TotalLoss evaluate(const SolveState& state, const StereoSequence& seq, const SolverConfig& cfg,
                   bool with_gradients = true);

/// One Adam update of every free block, then normals are re-normalized and
/// turned toward the camera and inverse depth is clamped to [0, dinv_max].
/// Throws NonFiniteLoss when the loss or its gradient is not finite.
void step(SolveState& state, const StereoSequence& seq, const SolverConfig& cfg);

struct SolveResult {
  SolveState state;
  std::vector<TraceRow> trace;
  /// Set when the temporal terms needed an estimate of the previous frame.
  std::optional<InverseDepthMapd> dinv_prev;
  std::optional<NormalMapd> normals_prev;
};

SolveResult solve(const StereoSequence& seq, const SolverConfig& cfg);

/// iter, L_P, L_DN, L_N, L_NS, L_DC, L_NC, total, lr
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);

}  // namespace geoloss
