#pragma once

// Finite-difference verification of every loss gradient on random smooth
// instances.

#include <cstdint>
#include <string>
#include <vector>

#include "geoloss/losses.hpp"

namespace geoloss::gradcheck {

/// Inputs of all six losses. Reference and source intensities (and the
/// current and previous geometry) occupy disjoint value ranges, so the
/// L1 residuals that pose probes sum over never change sign.
struct RandomInstance {
  ImageGridd left_t, right_t, left_prev;
  InverseDepthMapd dinv, dinv_prev;
  NormalMapd normals, normals_prev;
  Intrinsicsd k;
  RigidTransformd left_to_right;
  Vec6<double> xi = Vec6<double>::Zero();
};

RandomInstance random_instance(std::uint64_t seed, int width = 32, int height = 24);

struct Options {
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
  int probes = 30;
  int width = 32;
  int height = 24;
  double step = 1e-5;
  /// Probes whose kink margin is below this are redrawn.
  double kink_threshold = 1e-3;
  /// Denominator floor of the relative error.
  double relative_floor = 1e-3;
};

struct Probe {
  std::string variable;  // dinv, normal, dinv_prev, normal_prev, xi
  int x = -1, y = -1;
  int component = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

struct LossCheck {
  std::string loss;
  int probes = 0;
  double max_rel_error = 0;
  Probe worst;
  bool pass = false;
};

struct Report {
  std::vector<LossCheck> losses;
  bool pass = false;
};

double relative_error(double analytic, double numeric, double floor);

/// Checks L_P, L_DN, L_N, L_NS, L_DC and L_NC in that order.
Report run(const Options& opt);

std::string format_report(const Report& r, double tolerance);

}  // namespace geoloss::gradcheck
