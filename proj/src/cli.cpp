#include "geoloss/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "geoloss/error.hpp"
#include "geoloss/gradcheck.hpp"
#include "geoloss/solver.hpp"
#include "geoloss/synth.hpp"

namespace geoloss::cli {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

std::string crop_text(const eval::CropRect& c) {
  return fmt(c.x0) + "," + fmt(c.y0) + "," + fmt(c.x1) + "," + fmt(c.y1);
}

bool parse_bool(const std::string& text, const std::string& what) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw Error(ErrorCode::InvalidInput, what + ": not a boolean: '" + text + "'");
}

int positive_int(const std::string& text, const std::string& what) {
  const long v = io::parse_int(text, what);
  if (v < 1 || v > 1000000000L) throw Error(ErrorCode::InvalidInput, what + ": must be a positive integer");
  return int(v);
}

void check_threads_env() {
  const char* env = std::getenv("GEOLOSS_THREADS");
  if (env && *env) positive_int(env, "GEOLOSS_THREADS");
}

std::string lambda_key(int i) { return "lambda" + std::to_string(i + 1); }

SolverConfig solver_config(const RunConfig& cfg) {
  SolverConfig s;
  s.weights.lambda = cfg.lambda;
  s.learning_rate = cfg.lr;
  s.max_iterations = cfg.iters;
  s.pyramid_levels = cfg.levels;
  s.seed = cfg.seed.value_or(0);
  s.validate();
  return s;
}

void require_out(const RunConfig& cfg) {
  if (cfg.out.empty()) throw Error(ErrorCode::InvalidInput, "--out is required");
}

StereoSequence read_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::InvalidInput, "not a directory: " + dir.string());
  StereoSequence seq;
  const auto calib = io::read_calibration(dir / "calib.txt");
  seq.k = calib.k;
  seq.left_to_right = calib.left_to_right;
  seq.left_t = io::read_pnm(dir / "left_t.ppm");
  seq.right_t = io::read_pnm(dir / "right_t.ppm");
  const bool has_lp = fs::exists(dir / "left_prev.ppm");
  const bool has_rp = fs::exists(dir / "right_prev.ppm");
  if (has_lp != has_rp) throw Error(ErrorCode::InvalidInput, dir.string() + ": previous frame needs both images");
  if (has_lp) {
    seq.left_prev = io::read_pnm(dir / "left_prev.ppm");
    seq.right_prev = io::read_pnm(dir / "right_prev.ppm");
  }
  if (seq.width() != calib.width || seq.height() != calib.height)
    throw Error(ErrorCode::ResolutionMismatch, dir.string() + ": images do not match calib.txt");
  seq.validate();
  return seq;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  require_out(cfg);
  const bool is_file = cfg.scene.find('/') != std::string::npos || fs::is_regular_file(cfg.scene);
  synth::SceneSpec spec = is_file ? synth::read_scene_spec(cfg.scene) : synth::scene_by_name(cfg.scene);
  if (cfg.seed) {
    spec.seed = *cfg.seed;
    synth::draw_phases(spec);
  }
  synth::write_instance(cfg.out, synth::render(spec));
  out << "wrote " << spec.name << " (seed " << spec.seed << ") to " << cfg.out.string() << '\n';
  return kOk;
}

int cmd_solve(const RunConfig& cfg, const fs::path& instance, std::ostream& out) {
  require_out(cfg);
  const SolverConfig scfg = solver_config(cfg);
  const StereoSequence seq = read_sequence(instance);
  const SolveResult r = solve(seq, scfg);
  fs::create_directories(cfg.out);
  io::write_pfm(cfg.out / "dinv.pfm", r.state.dinv.grid);
  io::write_pfm(cfg.out / "normal.pfm", r.state.normals.grid);
  io::write_pose(cfg.out / "pose.txt", RigidTransformd::exp(r.state.xi));
  write_trace_csv(cfg.out / "loss_trace.csv", r.trace);
  const double final_loss = r.trace.empty() ? 0.0 : r.trace.back().total;
  out << "solved " << instance.string() << ": " << r.trace.size() << " iterations, final loss " << fmt(final_loss)
      << ", wrote " << cfg.out.string() << '\n';
  return kOk;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!(cfg.tolerance > 0)) throw Error(ErrorCode::InvalidInput, "tolerance must be positive");
  gradcheck::Options opt;
  opt.seed = cfg.seed.value_or(1);
  opt.tolerance = cfg.tolerance;
  const auto report = gradcheck::run(opt);
  out << gradcheck::format_report(report, cfg.tolerance);
  if (report.pass) return kOk;
  for (const auto& l : report.losses)
    if (!l.pass)
    {
      err << "gradcheck failed: " << l.loss << " " << l.worst.variable;
      if (l.worst.x >= 0) err << " at pixel (" << l.worst.x << ", " << l.worst.y << ")";
      err << " component " << l.worst.component << ", relative error " << fmt(l.max_rel_error) << '\n';
    }
  return kCheckFailed;
}

int cmd_eval(const RunConfig& cfg, const fs::path& pred_dir, const fs::path& gt_dir, std::ostream& out) {
  const ImageGridd pred_dinv = io::read_pfm(pred_dir / "dinv.pfm");
  const ImageGridd gt_dinv = io::read_pfm(gt_dir / "dinv.pfm");
  const NormalMapd pred_n{io::read_pfm(pred_dir / "normal.pfm")};
  const NormalMapd gt_n{io::read_pfm(gt_dir / "normal.pfm")};
  if (pred_dinv.channels() != 1 || gt_dinv.channels() != 1 || pred_n.grid.channels() != 3 ||
      gt_n.grid.channels() != 3)
    throw Error(ErrorCode::InvalidInput, "dinv.pfm needs 1 channel and normal.pfm 3");
  for (const ImageGridd* g : {&gt_dinv, &pred_n.grid, &gt_n.grid})
    if (g->width() != pred_dinv.width() || g->height() != pred_dinv.height())
      throw Error(ErrorCode::ResolutionMismatch, "prediction and ground truth differ in size");

  const ImageGridd gt_depth = depth_grid(InverseDepthMapd{gt_dinv});
  const ImageGridd pred_depth = depth_grid(InverseDepthMapd{pred_dinv});
  const auto mask = eval::build_mask(gt_depth, cfg.cap, cfg.crop);
  const auto d = eval::depth_metrics(pred_depth, gt_depth, mask, cfg.median_scale);
  const auto n = eval::normal_metrics(pred_n, gt_n, mask);
  out << eval::format_table(d, n);
  const fs::path dest = cfg.out.empty() ? pred_dir : cfg.out;
  fs::create_directories(dest);
  eval::write_csv(dest / "metrics.csv", d, n);
  return kOk;
}

/// Flags are kept as text and routed through set_key, so a flag and the
/// matching config key accept exactly the same values.
struct FlagSet {
  struct Entry {
    std::string key, flag;
    CLI::Option* option;
  };
  std::vector<Entry> options;
  std::map<std::string, std::string> text;
  CLI::Option* median = nullptr;
  bool median_flag = false;
  std::string config;

  void add(CLI::App* app, const std::string& key, const std::string& flag, const std::string& def,
           const std::string& help) {
    auto& slot = text[flag];
    slot = def;
    auto* opt = app->add_option("--" + flag, slot, help);
    if (!def.empty()) opt->capture_default_str();
    options.push_back({key, flag, opt});
  }

  void apply(RunConfig& cfg) const {
    if (!config.empty()) apply_config(cfg, io::read_key_values(config), config);
    for (const auto& e : options)
      if (e.option->count() > 0) set_key(cfg, e.key, text.at(e.flag), "--" + e.flag);
    if (median && median->count() > 0) cfg.median_scale = median_flag;
  }
};

void add_config(CLI::App* app, FlagSet& f) {
  app->add_option("--config", f.config, "key = value file; flags override it")->check(CLI::ExistingFile);
}

void add_solver_flags(CLI::App* app, FlagSet& f, const RunConfig& d) {
  for (int i = 0; i < 6; ++i)
    f.add(app, lambda_key(i), lambda_key(i), fmt(d.lambda[i]), "weight of " + std::string(kTermNames[i]));
  f.add(app, "lr", "lr", fmt(d.lr), "Adam learning rate");
  f.add(app, "iters", "iters", std::to_string(d.iters), "iteration cap per pyramid level");
  f.add(app, "levels", "levels", std::to_string(d.levels), "pyramid levels");
  f.add(app, "seed", "seed", "0", "solver seed");
}

}  // namespace

void set_key(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& origin) {
  const std::string what = origin == "--" + key ? origin : origin + ": " + key;
  if (key == "scene") {
    if (value.empty()) throw Error(ErrorCode::InvalidInput, what + ": empty");
    cfg.scene = value;
  } else if (key == "out") {
    if (value.empty()) throw Error(ErrorCode::InvalidInput, what + ": empty");
    cfg.out = value;
  } else if (key.size() == 7 && key.rfind("lambda", 0) == 0 && key[6] >= '1' && key[6] <= '6') {
    const double v = io::parse_double(value, what);
    if (!(v >= 0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidInput, what + ": must be finite and >= 0");
    cfg.lambda[std::size_t(key[6] - '1')] = v;
  } else if (key == "lr") {
    const double v = io::parse_double(value, what);
    if (!(v > 0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidInput, what + ": must be positive");
    cfg.lr = v;
  } else if (key == "iters") {
    cfg.iters = positive_int(value, what);
  } else if (key == "levels") {
    cfg.levels = positive_int(value, what);
  } else if (key == "seed") {
    const long v = io::parse_int(value, what);
    if (v < 0) throw Error(ErrorCode::InvalidInput, what + ": must be >= 0");
    cfg.seed = std::uint64_t(v);
  } else if (key == "cap") {
    const double v = io::parse_double(value, what);
    if (!(v > 0)) throw Error(ErrorCode::InvalidInput, what + ": must be positive");
    cfg.cap = v;
  } else if (key == "crop") {
    cfg.crop = eval::CropRect::parse(value);
  } else if (key == "median_scale") {
    cfg.median_scale = parse_bool(value, what);
  } else if (key == "tolerance") {
    const double v = io::parse_double(value, what);
    if (!(v > 0)) throw Error(ErrorCode::InvalidInput, what + ": must be positive");
    cfg.tolerance = v;
  } else {
    throw Error(ErrorCode::InvalidInput, origin + ": unknown key '" + key + "'");
  }
}

void apply_config(RunConfig& cfg, const io::KeyValues& kv, const std::string& origin) {
  for (const auto& [key, value] : kv) set_key(cfg, key, value, origin);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const RunConfig defaults;
  CLI::App app{"Stereo depth, normal and ego-motion recovery with geometric losses"};
  app.name("geoloss");
  app.require_subcommand(1);
  app.footer("Exit codes: 0 ok, 1 check failed, 2 invalid input, 3 divergence.\n"
             "GEOLOSS_THREADS caps worker threads.");

  FlagSet synth_f, solve_f, grad_f, eval_f;
  std::string instance, pred_dir, gt_dir;

  auto* synth = app.add_subcommand("synth", "render a synthetic scene with ground truth");
  add_config(synth, synth_f);
  synth_f.add(synth, "scene", "scene", defaults.scene, "wall, road, corridor or a scene file");
  synth_f.add(synth, "out", "out", "", "output directory");
  synth_f.add(synth, "seed", "seed", "", "texture seed (default: the scene's own)");

  auto* solve = app.add_subcommand("solve", "recover inverse depth, normals and pose");
  solve->add_option("instance", instance, "directory with left_t/right_t[/left_prev/right_prev].ppm, calib.txt")
      ->required();
  add_config(solve, solve_f);
  solve_f.add(solve, "out", "out", "", "output directory");
  add_solver_flags(solve, solve_f, defaults);

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every loss gradient");
  add_config(grad, grad_f);
  grad_f.add(grad, "seed", "seed", "1", "random instance seed");
  grad_f.add(grad, "tolerance", "tolerance", fmt(defaults.tolerance), "max relative error");

  auto* ev = app.add_subcommand("eval", "depth and normal metrics of a prediction");
  ev->add_option("pred", pred_dir, "directory with dinv.pfm and normal.pfm")->required();
  ev->add_option("gt", gt_dir, "ground-truth directory")->required();
  add_config(ev, eval_f);
  eval_f.add(ev, "cap", "cap", "inf", "maximum ground-truth depth in meters");
  eval_f.add(ev, "crop", "crop", crop_text(defaults.crop), "x0,y0,x1,y1 as fractions of the frame");
  eval_f.add(ev, "out", "out", "", "where to write metrics.csv (default: pred)");
  eval_f.median = ev->add_flag("--median-scale", eval_f.median_flag, "scale prediction by the median ratio");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "geoloss: " << e.what() << '\n';
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return kInvalidInput;
  }

  try {
    check_threads_env();
    RunConfig cfg;
    if (synth->parsed()) {
      synth_f.apply(cfg);
      return cmd_synth(cfg, out);
    }
    if (solve->parsed()) {
      solve_f.apply(cfg);
      return cmd_solve(cfg, instance, out);
    }
    if (grad->parsed()) {
      grad_f.apply(cfg);
      return cmd_gradcheck(cfg, out, err);
    }
    eval_f.apply(cfg);
    return cmd_eval(cfg, pred_dir, gt_dir, out);
  } catch (const Error& e) {
    err << "geoloss: " << e.what() << '\n';
    return e.code() == ErrorCode::NonFiniteLoss ? kDiverged : kInvalidInput;
  } catch (const std::exception& e) {
    err << "geoloss: " << e.what() << '\n';
    return kInvalidInput;
  }
}

}  // namespace geoloss::cli
