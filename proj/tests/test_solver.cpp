#include <doctest.h>

#include "geoloss/solver.hpp"
#include "support.hpp"

using namespace geoloss;

namespace {

struct Fixture {
  synth::SceneSpec spec;
  synth::OracleInstance inst;
  StereoSequence seq;

  explicit Fixture(const std::string& name) : spec(synth::scene_by_name(name)), inst(synth::render(spec)) {
    seq = support::sequence_of(inst);
    seq.dinv_prev = inst.dinv_prev;
    seq.normals_prev = inst.normals_prev;
  }

  SolveState at_truth(const SolverConfig& cfg) const {
    SolveState s = initialize(seq, cfg);
    s.dinv = inst.dinv;
    s.normals = inst.normals;
    s.xi = inst.pose.xi();
    return s;
  }
};

void check_projected(const SolveState& s, const Intrinsicsd& k, double dinv_max) {
  double worst_norm = 0, worst_facing = -1;
  for (int y = 0; y < s.normals.height(); ++y)
    for (int x = 0; x < s.normals.width(); ++x) {
      worst_norm = std::max(worst_norm, std::abs(s.normals(x, y).norm() - 1));
      worst_facing = std::max(worst_facing, s.normals(x, y).dot(backproject(double(x), double(y), k)));
    }
  CHECK(worst_norm < 1e-9);
  CHECK(worst_facing < 0);
  CHECK(s.dinv.grid.data().minCoeff() >= 0);
  CHECK(s.dinv.grid.data().maxCoeff() <= dinv_max);
}

}  // namespace

TEST_CASE("initialize uses the documented defaults") {
  const Fixture f("road");
  SolverConfig cfg;
  const SolveState s = initialize(f.seq, cfg);
  CHECK((s.dinv.grid.data() == 0.1).all());
  for (int y = 0; y < 96; y += 5)
    for (int x = 0; x < 128; x += 5) CHECK((s.normals(x, y) - Vec3<double>(0, 0, -1)).norm() == 0);
  CHECK(s.xi.isZero());
  CHECK(s.iteration == 0);

  cfg.seed = 12345;
  const SolveState t = initialize(f.seq, cfg);
  CHECK((t.dinv.grid.data() == s.dinv.grid.data()).all());
  CHECK((t.normals.grid.data() == s.normals.grid.data()).all());
}

TEST_CASE("stereo photometric loss is near zero when initialized at the oracle") {
  const Fixture f("wall");
  SolverConfig cfg;
  cfg.initial_dinv_map = f.inst.dinv;
  const SolveState s = initialize(f.seq, cfg);
  const auto l = photometric_loss(f.seq.left_t, f.seq.right_t, nullptr, s.dinv, f.seq.k, f.seq.left_to_right,
                                  RigidTransformd::identity(), false);
  const long n = l.stereo_mask.count();
  CHECK(n > 128 * 96 / 2);
  CHECK(l.stereo_value / double(n) < 1e-3);
}

TEST_CASE("step with zero gradients only advances the counter") {
  const Fixture f("corridor");
  SolverConfig cfg;
  cfg.weights = LossWeights::zero();
  SolveState s = initialize(f.seq, cfg);
  const SolveState before = s;
  step(s, f.seq, cfg);
  CHECK(s.iteration == 1);
  CHECK((s.dinv.grid.data() == before.dinv.grid.data()).all());
  CHECK((s.normals.grid.data() == before.normals.grid.data()).all());
  CHECK(s.xi == before.xi);
  CHECK(s.history.size() == 1);
}

TEST_CASE("step with a zero learning rate leaves the variables unchanged") {
  const Fixture f("road");
  SolverConfig cfg;
  SolveState s = initialize(f.seq, cfg);
  s.learning_rate = 0;
  const SolveState before = s;
  step(s, f.seq, cfg);
  CHECK((s.dinv.grid.data() == before.dinv.grid.data()).all());
  CHECK((s.normals.grid.data() == before.normals.grid.data()).all());
  CHECK(s.xi == before.xi);
}

TEST_CASE("one step from the oracle geometry does not increase the loss" * doctest::test_suite("unattained")) {
  for (const std::string name : {"wall", "road", "corridor"}) {
    CAPTURE(name);
    const Fixture f(name);
    SolverConfig cfg;
    SolveState s = f.at_truth(cfg);
    const double before = evaluate(s, f.seq, cfg, false).report.total;
    step(s, f.seq, cfg);
    const double after = evaluate(s, f.seq, cfg, false).report.total;
    CAPTURE(before);
    CAPTURE(after);
    CHECK(after - before <= 1e-9);
  }
}

TEST_CASE("downsample_sequence") {
  const Fixture f("road");
  const auto l0 = downsample_sequence(f.seq, 0);
  CHECK((l0.left_t.data() == f.seq.left_t.data()).all());
  CHECK(l0.k.fx == f.seq.k.fx);

  const auto l1 = downsample_sequence(f.seq, 1);
  CHECK(l1.width() == 64);
  CHECK(l1.height() == 48);
  CHECK(l1.k.fx == f.seq.k.fx / 2);
  CHECK(l1.k.fy == f.seq.k.fy / 2);
  CHECK(l1.k.cx == (f.seq.k.cx - 0.5) / 2);
  REQUIRE(l1.left_prev.has_value());
  CHECK(l1.left_prev->width() == 64);

  StereoSequence flat = f.seq;
  flat.left_t = ImageGridd(128, 96, 3, 0.4);
  for (int level = 0; level < 3; ++level)
    CHECK((downsample_sequence(flat, level).left_t.data() - 0.4).abs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(downsample_sequence(f.seq, 3), Error);
  try {
    downsample_sequence(f.seq, 3);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridTooSmall);
  }
}

TEST_CASE("steps keep normals unit and camera-facing and inverse depth in range") {
  const Fixture f("corridor");
  SolverConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.dinv_max = 0.5;
  SolveState s = initialize(f.seq, cfg);
  for (int i = 0; i < 20; ++i) {
    step(s, f.seq, cfg);
    check_projected(s, f.seq.k, cfg.dinv_max);
  }
}

TEST_CASE("solve is deterministic and its moving-average loss does not rise") {
  const Fixture f("wall");
  StereoSequence seq = support::sequence_of(f.inst);
  SolverConfig cfg;
  cfg.pyramid_levels = 1;
  cfg.max_iterations = 150;
  cfg.learning_rate = 2e-3;
  const auto a = solve(seq, cfg), b = solve(seq, cfg);
  CHECK((a.state.dinv.grid.data() == b.state.dinv.grid.data()).all());
  CHECK((a.state.normals.grid.data() == b.state.normals.grid.data()).all());
  CHECK(a.state.xi == b.state.xi);
  REQUIRE(a.dinv_prev.has_value());

  const auto& h = a.trace;
  REQUIRE(h.size() >= 100);
  auto window = [&](std::size_t end) {
    double s = 0;
    for (std::size_t i = end - 50; i < end; ++i) s += h[i].total;
    return s / 50;
  };
  for (std::size_t end = 60; end <= h.size(); end += 10) CHECK(window(end) <= window(end - 10));
  CHECK(h.back().total < h.front().total);
}

TEST_CASE("solver configuration validation") {
  const Fixture f("wall");
  auto rejects = [&](auto mutate) {
    SolverConfig cfg;
    mutate(cfg);
    CHECK_THROWS_AS(solve(f.seq, cfg), Error);
  };
  rejects([](SolverConfig& c) { c.learning_rate = 0; });
  rejects([](SolverConfig& c) { c.adam_beta1 = 1; });
  rejects([](SolverConfig& c) { c.adam_beta2 = -0.1; });
  rejects([](SolverConfig& c) { c.pyramid_levels = 0; });
  rejects([](SolverConfig& c) { c.weights[Term::Photometric] = -1; });
  rejects([](SolverConfig& c) { c.pyramid_levels = 4; });

  StereoSequence bad = f.seq;
  bad.right_t = ImageGridd(64, 48, 3);
  CHECK_THROWS_AS(solve(bad, SolverConfig{}), Error);
}

TEST_CASE("frozen blocks keep their initial values") {
  const Fixture f("wall");
  SolverConfig cfg;
  cfg.pyramid_levels = 2;
  cfg.max_iterations = 5;
  cfg.optimize_depth = cfg.optimize_normals = false;
  cfg.initial_dinv_map = f.inst.dinv;
  cfg.initial_normals = f.inst.normals;
  const auto r = solve(f.seq, cfg);
  CHECK((r.state.dinv.grid.data() == f.inst.dinv.grid.data()).all());
  CHECK(r.trace.size() == 10);
  CHECK(r.trace[4].level == 1);
  CHECK(r.trace[5].level == 0);
}

TEST_CASE("trace CSV") {
  const auto dir = support::scratch_dir("trace");
  TraceRow r;
  r.iteration = 3;
  r.terms = {1, 2, 3, 4, 5, 6};
  r.total = 21;
  r.learning_rate = 1e-3;
  write_trace_csv(dir / "t.csv", {r});
  CHECK(support::file_bytes(dir / "t.csv") == "iter,L_P,L_DN,L_N,L_NS,L_DC,L_NC,total,lr\n3,1,2,3,4,5,6,21,0.001\n");
}
