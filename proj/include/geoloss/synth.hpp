#pragma once

// Analytic renderer for piecewise-planar scenes: exact inverse depth, normals
// and poses for a pair of stereo frames.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geoloss/geometry.hpp"
#include "geoloss/image_grid.hpp"
#include "geoloss/io.hpp"

namespace geoloss::synth {

/// One sinusoid of a plane texture; frequency in cycles per meter along the
/// plane's (u, v) axes, one phase per color channel.
struct Sinusoid {
  double fu = 0;
  double fv = 0;
  double amplitude = 0;
  Eigen::Vector3d phase = Eigen::Vector3d::Zero();
};

struct Texture {
  Eigen::Vector3d base = Eigen::Vector3d::Constant(0.5);
  std::vector<Sinusoid> waves;

  Eigen::Vector3d evaluate(double u, double v) const;
};

/// Deterministic texture of `count` sinusoids (2..5) at the listed
/// frequencies with seeded orientations and phases.
Texture make_texture(std::uint64_t seed, const std::vector<double>& frequencies, double total_amplitude = 0.42);

/// Same with explicit (fu, fv) frequency vectors, for planes seen at grazing
/// angles where the two plane axes compress very differently in the image.
Texture make_texture(std::uint64_t seed, const std::vector<Eigen::Vector2d>& frequencies,
                     double total_amplitude = 0.42);

/// Plane <normal, X> = offset in the frame-t left camera.
struct TexturedPlane {
  Eigen::Vector3d normal;
  double offset = 0;
  int priority = 0;
  Texture texture;
};

struct SceneSpec {
  std::string name;
  std::vector<TexturedPlane> planes;
  Intrinsicsd k{100, 100, 63.5, 47.5};
  int width = 128;
  int height = 96;
  double baseline = 0.54;
  /// T_{t -> t-1} as a twist.
  Vec6<double> ego_motion = Vec6<double>::Zero();
  std::uint64_t seed = 0;
};

struct OracleInstance {
  ImageGridd left_t, right_t, left_prev, right_prev;
  InverseDepthMapd dinv;
  NormalMapd normals;
  InverseDepthMapd dinv_prev;
  NormalMapd normals_prev;
  /// True away from plane seams (no neighbor within 1 px hits another plane).
  ValidityMask interior;
  ValidityMask interior_prev;
  RigidTransformd pose;           // T_{t -> t-1}
  RigidTransformd left_to_right;  // T_{L -> R}
  Intrinsicsd k;
};

/// Per-view ray casting result, exposed for tests.
struct ViewGeometry {
  ImageGridd depth;
  NormalMapd normals;
  std::vector<int> plane_index;
  ImageGridd image;
};

/// Renders the scene as seen through world_to_view (frame-t left camera
/// coordinates into the view's coordinates).
ViewGeometry render_view(const SceneSpec& spec, const RigidTransformd& world_to_view);

OracleInstance render(const SceneSpec& spec);

/// Redraws every texture phase from spec.seed.
void draw_phases(SceneSpec& spec);

/// Scenes "wall", "road" and "corridor".
std::vector<SceneSpec> default_scenes();
SceneSpec scene_by_name(const std::string& name);

/// Scene file in key = value form:
///
///   name = slanted
///   seed = 7
///   width = 128          # also height, fx, fy, cx, cy, baseline
///   ego_motion = 0, 0, 0.5, 0, 0, 0
///   plane0 = 0, 0, -1, -8, 0          # nx, ny, nz, offset, priority
///   plane0_waves = 0.2 0.05, -0.08 0.17   # (fu, fv) pairs, 2 to 5
///   plane0_amplitude = 0.42          # optional
///
/// Omitted camera keys keep the SceneSpec defaults. Throws InvalidInput on
/// unknown keys or malformed values.
SceneSpec parse_scene_spec(const io::KeyValues& kv, const std::string& origin = "<scene>");
SceneSpec read_scene_spec(const std::filesystem::path& path);

/// Fraction of pixels whose channel-mean forward-difference gradient is
/// nonzero (|g| > threshold).
double textured_fraction(const ImageGridd& image, double threshold = 1e-6);

/// left_t.ppm, right_t.ppm, left_prev.ppm, right_prev.ppm, dinv.pfm,
/// normal.pfm, pose.txt, calib.txt.
void write_instance(const std::filesystem::path& dir, const OracleInstance& inst);

}  // namespace geoloss::synth
