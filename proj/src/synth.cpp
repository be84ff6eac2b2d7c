#include "geoloss/synth.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include "geoloss/io.hpp"

namespace geoloss::synth {
namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

// Orthonormal in-plane axes for a unit normal.
void plane_axes(const Eigen::Vector3d& n, Eigen::Vector3d& u, Eigen::Vector3d& v) {
  const Eigen::Vector3d helper = std::abs(n.y()) < 0.9 ? Eigen::Vector3d::UnitY() : Eigen::Vector3d::UnitX();
  u = helper.cross(n).normalized();
  v = n.cross(u);
}

}  // namespace

Eigen::Vector3d Texture::evaluate(double u, double v) const {
  Eigen::Vector3d c = base;
  for (const auto& w : waves) {
    const double arg = kTwoPi * (w.fu * u + w.fv * v);
    for (int ch = 0; ch < 3; ++ch) c[ch] += w.amplitude * std::sin(arg + w.phase[ch]);
  }
  return c;
}

Texture make_texture(std::uint64_t seed, const std::vector<double>& frequencies, double total_amplitude) {
  if (frequencies.size() < 2 || frequencies.size() > 5)
    throw Error(ErrorCode::InvalidInput, "make_texture: 2 to 5 sinusoids required");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0, std::numbers::pi);
  std::vector<Eigen::Vector2d> vectors;
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    // Spread orientations so no single direction lacks texture.
    const double a = angle(rng) / double(frequencies.size()) + std::numbers::pi * double(i) / double(frequencies.size());
    vectors.emplace_back(frequencies[i] * std::cos(a), frequencies[i] * std::sin(a));
  }
  return make_texture(rng(), vectors, total_amplitude);
}

Texture make_texture(std::uint64_t seed, const std::vector<Eigen::Vector2d>& frequencies, double total_amplitude) {
  if (frequencies.size() < 2 || frequencies.size() > 5)
    throw Error(ErrorCode::InvalidInput, "make_texture: 2 to 5 sinusoids required");
  if (!(total_amplitude >= 0 && total_amplitude <= 0.5))
    throw Error(ErrorCode::InvalidInput, "make_texture: total amplitude must lie in [0, 0.5]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0, kTwoPi);
  Texture t;
  for (const auto& f : frequencies) {
    Sinusoid s;
    s.fu = f.x();
    s.fv = f.y();
    s.amplitude = total_amplitude / double(frequencies.size());
    s.phase = Eigen::Vector3d(phase(rng), phase(rng), phase(rng));
    t.waves.push_back(s);
  }
  return t;
}

ViewGeometry render_view(const SceneSpec& spec, const RigidTransformd& world_to_view) {
  const int w = spec.width, h = spec.height;
  ViewGeometry out{ImageGridd(w, h, 1), NormalMapd{ImageGridd(w, h, 3)}, std::vector<int>(std::size_t(w) * h, -1),
                   ImageGridd(w, h, 3)};
  const Mat3<double>& r = world_to_view.rotation();
  const Vec3<double>& t = world_to_view.translation();

  struct PlaneInView {
    Eigen::Vector3d n;
    double offset;
    Eigen::Vector3d u, v;
  };
  std::vector<PlaneInView> planes;
  for (const auto& p : spec.planes) {
    PlaneInView pv;
    pv.n = r * p.normal;
    pv.offset = p.offset + pv.n.dot(t);
    plane_axes(p.normal, pv.u, pv.v);
    planes.push_back(pv);
  }

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Vec3<double> ray = backproject(double(x), double(y), spec.k);
      double best = std::numeric_limits<double>::infinity();
      int best_idx = -1;
      for (std::size_t i = 0; i < planes.size(); ++i) {
        const double denom = planes[i].n.dot(ray);
        if (denom == 0) continue;
        const double d = planes[i].offset / denom;
        if (!(d > 0) || !std::isfinite(d)) continue;
        const bool closer = d < best;
        const bool tie = d == best && best_idx >= 0 && spec.planes[i].priority > spec.planes[std::size_t(best_idx)].priority;
        if (closer || tie) {
          best = d;
          best_idx = int(i);
        }
      }
      if (best_idx < 0)
        throw Error(ErrorCode::NoIntersection, spec.name + ": ray at pixel (" + std::to_string(x) + ", " +
                                                   std::to_string(y) + ") misses every plane");
      const auto& pl = planes[std::size_t(best_idx)];
      out.depth(x, y) = best;
      out.plane_index[std::size_t(y) * w + x] = best_idx;
      out.normals.set(x, y, face_camera<double>(pl.n, ray));
      const Eigen::Vector3d world = world_to_view.apply_inverse(best * ray);
      const Eigen::Vector3d color =
          spec.planes[std::size_t(best_idx)].texture.evaluate(pl.u.dot(world), pl.v.dot(world));
      out.image.set_pixel(x, y, color.cwiseMax(0.0).cwiseMin(1.0));
    }
  return out;
}

namespace {

ValidityMask interior_mask(const std::vector<int>& idx, int w, int h) {
  ValidityMask m(w, h, false);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int self = idx[std::size_t(y) * w + x];
      bool ok = true;
      for (int dy = -1; dy <= 1 && ok; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (idx[std::size_t(ny) * w + nx] != self) {
            ok = false;
            break;
          }
        }
      m.set(x, y, ok);
    }
  return m;
}

}  // namespace

OracleInstance render(const SceneSpec& spec) {
  if (!spec.k.valid() || spec.width < 2 || spec.height < 2 || spec.planes.empty())
    throw Error(ErrorCode::InvalidInput, "render: invalid scene spec '" + spec.name + "'");
  for (const auto& p : spec.planes)
    if (std::abs(p.normal.norm() - 1) > 1e-9)
      throw Error(ErrorCode::InvalidInput, "render: plane normal must be unit length");

  OracleInstance inst;
  inst.k = spec.k;
  inst.pose = RigidTransformd::exp(spec.ego_motion);
  inst.left_to_right = RigidTransformd::translation_only(Vec3<double>(-spec.baseline, 0, 0));

  const auto cur = render_view(spec, RigidTransformd::identity());
  const auto cur_r = render_view(spec, inst.left_to_right);
  const auto prev = render_view(spec, inst.pose);
  const auto prev_r = render_view(spec, inst.left_to_right * inst.pose);

  inst.left_t = cur.image;
  inst.right_t = cur_r.image;
  inst.left_prev = prev.image;
  inst.right_prev = prev_r.image;
  inst.dinv = inverse_depth_from_depth(cur.depth);
  inst.normals = cur.normals;
  inst.dinv_prev = inverse_depth_from_depth(prev.depth);
  inst.normals_prev = prev.normals;
  inst.interior = interior_mask(cur.plane_index, spec.width, spec.height);
  inst.interior_prev = interior_mask(prev.plane_index, spec.width, spec.height);
  return inst;
}

namespace {

// Texture with the given (fu, fv) waves; phases are drawn later from the
// scene seed.
Texture waves(const std::vector<Eigen::Vector2d>& frequencies, double total_amplitude = 0.42) {
  return make_texture(0, frequencies, total_amplitude);
}

}  // namespace

void draw_phases(SceneSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> phase(0, kTwoPi);
  for (auto& plane : spec.planes)
    for (auto& w : plane.texture.waves) w.phase = Eigen::Vector3d(phase(rng), phase(rng), phase(rng));
}

std::vector<SceneSpec> default_scenes() {
  // Texture frequencies are in cycles per meter along the plane axes. They
  // keep every wave near or below 0.02 cycles per pixel in all four views so
  // bilinear resampling stays accurate.
  std::vector<SceneSpec> scenes;

  {
    // (a) Fronto-parallel wall 8 m ahead; the car drives 0.5 m forward.
    SceneSpec s;
    s.name = "wall";
    s.seed = 11;
    s.planes.push_back({Eigen::Vector3d(0, 0, -1), -8.0, 0, waves({{0.2, 0.05}, {-0.08, 0.17}, {0.12, -0.12}})});
    s.ego_motion << 0.0, 0.0, 0.5, 0.0, 0.0, 0.0;
    scenes.push_back(s);
  }
  {
    // (b) Road: ground plane 2 m below the camera and a building facade at
    // 8 m; forward motion with a slight yaw.
    SceneSpec s;
    s.name = "road";
    s.seed = 22;
    s.planes.push_back({Eigen::Vector3d(0, -1, 0), -2.0, 1, waves({{0.14, 0.05}, {0.06, 0.45}, {-0.1, 0.3}})});
    s.planes.push_back({Eigen::Vector3d(0, 0, -1), -8.0, 0, waves({{0.18, 0.1}, {-0.1, 0.2}, {0.05, -0.15}})});
    s.ego_motion << 0.0, 0.0, 0.5, 0.0, 0.01, 0.0;
    scenes.push_back(s);
  }
  {
    // (c) Corridor: side walls 2.5 m left and 3.5 m right, end wall at 7 m;
    // forward motion with a small sideways drift and roll.
    SceneSpec s;
    s.name = "corridor";
    s.seed = 33;
    s.planes.push_back({Eigen::Vector3d(1, 0, 0), -2.5, 1, waves({{0.35, 0.05}, {0.15, 0.25}, {-0.25, 0.14}})});
    s.planes.push_back({Eigen::Vector3d(-1, 0, 0), -3.5, 1, waves({{0.25, 0.06}, {0.1, 0.22}, {-0.18, 0.15}})});
    s.planes.push_back({Eigen::Vector3d(0, 0, -1), -7.0, 0, waves({{0.2, 0.08}, {-0.09, 0.21}, {0.14, -0.14}})});
    s.ego_motion << 0.05, 0.0, 0.5, 0.0, 0.0, 0.005;
    scenes.push_back(s);
  }
  for (auto& s : scenes) draw_phases(s);
  return scenes;
}

SceneSpec scene_by_name(const std::string& name) {
  for (auto& s : default_scenes())
    if (s.name == name) return s;
  throw Error(ErrorCode::InvalidInput, "unknown scene '" + name + "'");
}

SceneSpec parse_scene_spec(const io::KeyValues& kv, const std::string& origin) {
  SceneSpec s;
  s.name = "custom";
  std::map<int, Eigen::Matrix<double, 5, 1>> planes;
  std::map<int, std::vector<Eigen::Vector2d>> plane_waves;
  std::map<int, double> amplitudes;
  auto fail = [&](const std::string& what) { throw Error(ErrorCode::InvalidInput, origin + ": " + what); };
  auto plane_index = [&](const std::string& key, const std::string& suffix) {
    const std::string digits = key.substr(5, key.size() - 5 - suffix.size());
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) fail("unknown key '" + key + "'");
    return int(io::parse_int(digits, key));
  };
  auto ends_with = [](const std::string& a, const std::string& b) {
    return a.size() >= b.size() && a.compare(a.size() - b.size(), b.size(), b) == 0;
  };

  for (const auto& [key, value] : kv) {
    if (key == "name") s.name = value;
    else if (key == "seed") s.seed = std::uint64_t(io::parse_int(value, key));
    else if (key == "width") s.width = int(io::parse_int(value, key));
    else if (key == "height") s.height = int(io::parse_int(value, key));
    else if (key == "fx") s.k.fx = io::parse_double(value, key);
    else if (key == "fy") s.k.fy = io::parse_double(value, key);
    else if (key == "cx") s.k.cx = io::parse_double(value, key);
    else if (key == "cy") s.k.cy = io::parse_double(value, key);
    else if (key == "baseline") s.baseline = io::parse_double(value, key);
    else if (key == "ego_motion") {
      const auto v = io::parse_doubles(value, key);
      if (v.size() != 6) fail("ego_motion needs 6 values");
      s.ego_motion = Vec6<double>(v.data());
    } else if (key.rfind("plane", 0) == 0 && ends_with(key, "_waves")) {
      const auto v = io::parse_doubles(value, key);
      if (v.size() % 2 != 0) fail(key + " needs (fu, fv) pairs");
      auto& list = plane_waves[plane_index(key, "_waves")];
      for (std::size_t i = 0; i < v.size(); i += 2) list.emplace_back(v[i], v[i + 1]);
    } else if (key.rfind("plane", 0) == 0 && ends_with(key, "_amplitude")) {
      amplitudes[plane_index(key, "_amplitude")] = io::parse_double(value, key);
    } else if (key.rfind("plane", 0) == 0) {
      const auto v = io::parse_doubles(value, key);
      if (v.size() != 5) fail(key + " needs nx, ny, nz, offset, priority");
      planes[plane_index(key, "")] = Eigen::Matrix<double, 5, 1>(v.data());
    } else {
      fail("unknown key '" + key + "'");
    }
  }

  if (planes.empty()) fail("no planes");
  for (const auto& [i, p] : planes) {
    if (!plane_waves.count(i)) fail("plane" + std::to_string(i) + " has no plane" + std::to_string(i) + "_waves");
    const Eigen::Vector3d n = p.head<3>();
    if (!(n.norm() > 0)) fail("plane" + std::to_string(i) + " has a zero normal");
    const double amp = amplitudes.count(i) ? amplitudes[i] : 0.42;
    s.planes.push_back({n.normalized(), p[3] / n.norm(), int(p[4]), waves(plane_waves[i], amp)});
  }
  for (const auto& [i, w] : plane_waves)
    if (!planes.count(i)) fail("plane" + std::to_string(i) + "_waves without plane" + std::to_string(i));
  for (const auto& [i, a] : amplitudes)
    if (!planes.count(i)) fail("plane" + std::to_string(i) + "_amplitude without plane" + std::to_string(i));
  if (!s.k.valid() || s.width < 16 || s.height < 16 || !(s.baseline > 0))
    fail("invalid camera: needs fx, fy > 0, at least 16x16 pixels and a positive baseline");
  draw_phases(s);
  return s;
}

SceneSpec read_scene_spec(const std::filesystem::path& path) {
  return parse_scene_spec(io::read_key_values(path), path.string());
}

double textured_fraction(const ImageGridd& image, double threshold) {
  const auto g = mean_channel_gradients(image);
  long textured = 0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      if (std::hypot(g.dx(x, y), g.dy(x, y)) > threshold) ++textured;
  return double(textured) / double(image.pixel_count());
}

void write_instance(const std::filesystem::path& dir, const OracleInstance& inst) {
  std::filesystem::create_directories(dir);
  io::write_pnm(dir / "left_t.ppm", inst.left_t);
  io::write_pnm(dir / "right_t.ppm", inst.right_t);
  io::write_pnm(dir / "left_prev.ppm", inst.left_prev);
  io::write_pnm(dir / "right_prev.ppm", inst.right_prev);
  io::write_pfm(dir / "dinv.pfm", inst.dinv.grid);
  io::write_pfm(dir / "normal.pfm", inst.normals.grid);
  io::write_pose(dir / "pose.txt", inst.pose);
  io::write_calibration(dir / "calib.txt",
                        io::Calibration{inst.k, inst.left_to_right, inst.left_t.width(), inst.left_t.height()});
}

}  // namespace geoloss::synth
