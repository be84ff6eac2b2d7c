#include "geoloss/solver.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace geoloss {
namespace {

constexpr int kMinLevelSize = 16;

ImageGridd reduce_to(const ImageGridd& g, int width, int height) {
  ImageGridd out = g;
  while (out.width() > width || out.height() > height) out = downsample_box(out);
  if (out.width() != width || out.height() != height)
    throw Error(ErrorCode::ResolutionMismatch, "initial map does not match the pyramid resolution");
  return out;
}

NormalMapd reduce_normals(const NormalMapd& n, const Intrinsicsd& k, int width, int height) {
  NormalMapd out{reduce_to(n.grid, width, height)};
  project_normals(out, k);
  return out;
}

void adam_update(Eigen::Ref<Eigen::ArrayXd> params, const Eigen::ArrayXd& grad, AdamMoments& mom,
                 const SolverConfig& cfg, double lr, long t) {
  const double bias1 = 1 - std::pow(cfg.adam_beta1, double(t));
  const double bias2 = 1 - std::pow(cfg.adam_beta2, double(t));
  mom.m = cfg.adam_beta1 * mom.m + (1 - cfg.adam_beta1) * grad;
  mom.v = cfg.adam_beta2 * mom.v + (1 - cfg.adam_beta2) * grad.square();
  params -= lr * (mom.m / bias1) / ((mom.v / bias2).sqrt() + cfg.adam_epsilon);
}

void reset_moments(SolveState& s) {
  s.dinv_moments.reset(s.dinv.grid.data().size());
  s.normal_moments.reset(s.normals.grid.data().size());
  s.pose_moments.reset(6);
  s.level_iteration = 0;
}

bool plateaued(const std::vector<TraceRow>& h, std::size_t since, int window, double tol) {
  const std::size_t w = std::size_t(window);
  if (h.size() < since + 2 * w) return false;
  double before = 0, last = 0;
  for (std::size_t i = h.size() - 2 * w; i < h.size() - w; ++i) before += h[i].total;
  for (std::size_t i = h.size() - w; i < h.size(); ++i) last += h[i].total;
  if (before == 0) return true;
  return (before - last) / std::abs(before) < tol;
}

}  // namespace

void StereoSequence::validate() const {
  if (left_t.empty() || !left_t.same_shape(right_t))
    throw Error(ErrorCode::ResolutionMismatch, "stereo pair shapes differ");
  if (left_prev.has_value() != right_prev.has_value())
    throw Error(ErrorCode::InvalidInput, "previous frame needs both left and right images");
  if (left_prev && (!left_prev->same_shape(left_t) || !right_prev->same_shape(left_t)))
    throw Error(ErrorCode::ResolutionMismatch, "previous stereo pair shape differs");
  if (dinv_prev.has_value() != normals_prev.has_value())
    throw Error(ErrorCode::InvalidInput, "previous geometry needs both inverse depth and normals");
  if (dinv_prev && (!dinv_prev->grid.same_resolution(left_t) || !normals_prev->grid.same_resolution(left_t)))
    throw Error(ErrorCode::ResolutionMismatch, "previous geometry resolution differs");
  if (!k.valid()) throw Error(ErrorCode::InvalidInput, "invalid intrinsics");
}

void SolverConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidInput, "solver config: " + what); };
  if (!(learning_rate > 0)) bad("learning_rate must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) bad("betas must be in [0, 1)");
  if (!(adam_epsilon > 0)) bad("adam_epsilon must be > 0");
  if (max_iterations < 0) bad("max_iterations must be >= 0");
  if (pyramid_levels < 1) bad("pyramid_levels must be >= 1");
  if (plateau_window < 1) bad("plateau_window must be >= 1");
  if (!(convergence_tol >= 0)) bad("convergence_tol must be >= 0");
  if (!weights.valid()) bad("loss weights must be nonnegative");
  if (!(dinv_max > 0)) bad("dinv_max must be > 0");
  if (!(initial_dinv >= 0 && initial_dinv <= dinv_max)) bad("initial_dinv must lie in [0, dinv_max]");
}

StereoSequence downsample_sequence(const StereoSequence& seq, int level) {
  if (level < 0) throw Error(ErrorCode::InvalidInput, "downsample_sequence: negative level");
  StereoSequence out = seq;
  for (int l = 0; l < level; ++l) {
    if (out.width() / 2 < kMinLevelSize || out.height() / 2 < kMinLevelSize)
      throw Error(ErrorCode::GridTooSmall, "pyramid level " + std::to_string(l + 1) + " would be smaller than 16x16");
    out.left_t = downsample_box(out.left_t);
    out.right_t = downsample_box(out.right_t);
    if (out.left_prev) out.left_prev = downsample_box(*out.left_prev);
    if (out.right_prev) out.right_prev = downsample_box(*out.right_prev);
    out.k = out.k.halved();
    if (out.dinv_prev) out.dinv_prev = InverseDepthMapd{downsample_box(out.dinv_prev->grid)};
    if (out.normals_prev) {
      out.normals_prev = NormalMapd{downsample_box(out.normals_prev->grid)};
      project_normals(*out.normals_prev, out.k);
    }
  }
  return out;
}

SolveState initialize(const StereoSequence& seq, const SolverConfig& cfg) {
  SolveState s;
  const int w = seq.width(), h = seq.height();
  s.dinv = cfg.initial_dinv_map ? InverseDepthMapd{reduce_to(cfg.initial_dinv_map->grid, w, h)}
                                : InverseDepthMapd{ImageGridd(w, h, 1, cfg.initial_dinv)};
  s.normals = cfg.initial_normals ? reduce_normals(*cfg.initial_normals, seq.k, w, h)
                                  : constant_normals<double>(w, h, Vec3<double>(0, 0, -1));
  project_normals(s.normals, seq.k);
  s.xi = cfg.initial_xi.value_or(Vec6<double>::Zero());
  s.learning_rate = cfg.learning_rate;
  reset_moments(s);
  return s;
}

TotalLoss evaluate(const SolveState& state, const StereoSequence& seq, const SolverConfig& cfg, bool with_gradients) {
  LossInputs in;
  in.left_t = &seq.left_t;
  in.right_t = &seq.right_t;
  in.left_prev = seq.left_prev ? &*seq.left_prev : nullptr;
  in.dinv = &state.dinv;
  in.normals = &state.normals;
  in.dinv_prev = seq.dinv_prev ? &*seq.dinv_prev : nullptr;
  in.normals_prev = seq.normals_prev ? &*seq.normals_prev : nullptr;
  in.k = seq.k;
  in.left_to_right = seq.left_to_right;
  in.pose = RigidTransformd::exp(state.xi);
  in.edge_alpha = cfg.edge_alpha;
  in.edge_beta = cfg.edge_beta;
  return total_loss(in, cfg.weights, with_gradients);
}

void step(SolveState& state, const StereoSequence& seq, const SolverConfig& cfg) {
  const TotalLoss loss = evaluate(state, seq, cfg, true);
  if (!std::isfinite(loss.report.total) || !loss.grad.all_finite())
    throw Error(ErrorCode::NonFiniteLoss, "loss diverged at iteration " + std::to_string(state.iteration));

  ++state.iteration;
  ++state.level_iteration;
  const double lr = state.learning_rate;
  const long t = state.level_iteration;
  if (cfg.optimize_depth) {
    adam_update(state.dinv.grid.data(), loss.grad.d_dinv.data(), state.dinv_moments, cfg, lr, t);
    state.dinv.grid.data() = state.dinv.grid.data().cwiseMax(0.0).cwiseMin(cfg.dinv_max);
  }
  if (cfg.optimize_normals) {
    adam_update(state.normals.grid.data(), loss.grad.d_normals.data(), state.normal_moments, cfg, lr, t);
    project_normals(state.normals, seq.k);
  }
  if (cfg.optimize_pose) {
    Eigen::ArrayXd xi = state.xi.array();
    adam_update(xi, loss.grad.d_xi.array(), state.pose_moments, cfg, lr, t);
    state.xi = xi.matrix();
  }

  TraceRow row;
  row.iteration = state.iteration;
  row.level = state.level;
  row.terms = loss.report.terms;
  row.total = loss.report.total;
  row.learning_rate = lr;
  state.history.push_back(row);
}

SolveResult solve(const StereoSequence& seq, const SolverConfig& cfg) {
  seq.validate();
  cfg.validate();
  SolveResult result;

  StereoSequence full = seq;
  const bool temporal = cfg.weights[Term::DepthTemporal] > 0 || cfg.weights[Term::NormalTemporal] > 0;
  if (temporal && seq.left_prev && !seq.dinv_prev) {
    // Previous-frame geometry from its own stereo pair, without temporal terms.
    StereoSequence prev;
    prev.left_t = *seq.left_prev;
    prev.right_t = *seq.right_prev;
    prev.k = seq.k;
    prev.left_to_right = seq.left_to_right;
    SolverConfig pcfg = cfg;
    pcfg.weights[Term::DepthTemporal] = 0;
    pcfg.weights[Term::NormalTemporal] = 0;
    pcfg.optimize_depth = pcfg.optimize_normals = true;
    pcfg.optimize_pose = false;
    pcfg.initial_dinv_map.reset();
    pcfg.initial_normals.reset();
    pcfg.initial_xi.reset();
    SolveResult prev_result = solve(prev, pcfg);
    full.dinv_prev = prev_result.state.dinv;
    full.normals_prev = prev_result.state.normals;
    result.dinv_prev = full.dinv_prev;
    result.normals_prev = full.normals_prev;
  }

  SolveState state;
  for (int level = cfg.pyramid_levels - 1; level >= 0; --level) {
    const StereoSequence lseq = downsample_sequence(full, level);
    if (level == cfg.pyramid_levels - 1) {
      state = initialize(lseq, cfg);
    } else {
      const int w = lseq.width(), h = lseq.height();
      state.dinv = cfg.optimize_depth || !cfg.initial_dinv_map
                       ? InverseDepthMapd{upsample_bilinear(state.dinv.grid, w, h)}
                       : InverseDepthMapd{reduce_to(cfg.initial_dinv_map->grid, w, h)};
      state.normals = cfg.optimize_normals || !cfg.initial_normals
                          ? NormalMapd{upsample_bilinear(state.normals.grid, w, h)}
                          : reduce_normals(*cfg.initial_normals, lseq.k, w, h);
      project_normals(state.normals, lseq.k);
    }
    state.level = level;
    state.learning_rate = cfg.learning_rate;
    reset_moments(state);

    const std::size_t level_start = state.history.size();
    std::size_t window_start = level_start;
    int drops = 0;
    for (int it = 0; it < cfg.max_iterations; ++it) {
      step(state, lseq, cfg);
      if (!plateaued(state.history, window_start, cfg.plateau_window, cfg.convergence_tol)) continue;
      if (drops == cfg.max_lr_drops) break;
      ++drops;
      state.learning_rate *= 0.1;
      window_start = state.history.size();
    }
  }

  result.trace = state.history;
  result.state = std::move(state);
  return result;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "iter";
  for (const char* name : kTermNames) out << ',' << name;
  out << ",total,lr\n";
  out << std::setprecision(17);
  for (const auto& r : trace) {
    out << r.iteration;
    for (double v : r.terms) out << ',' << v;
    out << ',' << r.total << ',' << r.learning_rate << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

}  // namespace geoloss
