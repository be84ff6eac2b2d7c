#include "geoloss/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace geoloss::gradcheck {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sum of three random plane waves rescaled to [lo, hi].
class SmoothField {
 public:
  SmoothField(std::mt19937_64& rng, double lo, double hi, double min_period, double max_period) : lo_(lo), hi_(hi) {
    std::uniform_real_distribution<double> period(min_period, max_period);
    std::uniform_real_distribution<double> unit(0, 1);
    for (auto& w : waves_) {
      const double a = unit(rng) * std::numbers::pi;
      const double p = period(rng);
      w = {std::cos(a) / p, std::sin(a) / p, unit(rng) * 2 * std::numbers::pi, 0.5 + unit(rng)};
      total_ += w.amp;
    }
  }

  double operator()(int x, int y) const {
    double s = 0;
    for (const auto& w : waves_) s += w.amp * std::sin(2 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
    return lo_ + (hi_ - lo_) * 0.5 * (1 + s / total_);
  }

 private:
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<Wave, 3> waves_{};
  double lo_, hi_, total_ = 0;
};

ImageGridd smooth_image(std::mt19937_64& rng, int w, int h, int channels, double lo, double hi, double pmin,
                        double pmax) {
  ImageGridd g(w, h, channels);
  for (int c = 0; c < channels; ++c) {
    SmoothField f(rng, lo, hi, pmin, pmax);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) g(x, y, c) = f(x, y);
  }
  return g;
}

NormalMapd smooth_normals(std::mt19937_64& rng, int w, int h, const Vec3<double>& center, double spread) {
  SmoothField fx(rng, -spread, spread, 3, 7), fy(rng, -spread, spread, 3, 7);
  NormalMapd n{ImageGridd(w, h, 3)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      n.set(x, y, Vec3<double>(center.x() + fx(x, y), center.y() + fy(x, y), center.z()).normalized());
  return n;
}

struct Vars {
  InverseDepthMapd dinv, dinv_prev;
  NormalMapd normals, normals_prev;
  Vec6<double> xi;
};

using Evaluator = std::function<TermResult(const Vars&, bool)>;

enum class Var { Dinv, Normal, DinvPrev, NormalPrev };

struct LossSpec {
  std::string name;
  Evaluator eval;
  std::vector<Var> pixel_vars;
  bool pose = false;
  bool smooth = false;  // no L1 kinks: every pixel is a valid probe
};

void tangent_basis(const Vec3<double>& n, Vec3<double>& t1, Vec3<double>& t2) {
  Eigen::Index i;
  n.cwiseAbs().minCoeff(&i);
  t1 = n.cross(Vec3<double>::Unit(i)).normalized();
  t2 = n.cross(t1);
}

}  // namespace

RandomInstance random_instance(std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(seed);
  RandomInstance r;
  r.k = Intrinsicsd{40, 40, (width - 1) / 2.0, (height - 1) / 2.0};
  r.left_to_right = RigidTransformd::translation_only(Vec3<double>(-0.3, 0, 0));
  r.left_t = smooth_image(rng, width, height, 3, 0.55, 0.95, 6, 14);
  r.right_t = smooth_image(rng, width, height, 3, 0.05, 0.45, 6, 14);
  r.left_prev = smooth_image(rng, width, height, 3, 0.05, 0.45, 6, 14);
  r.dinv = InverseDepthMapd{smooth_image(rng, width, height, 1, 0.15, 0.45, 3, 7)};
  r.dinv_prev = InverseDepthMapd{smooth_image(rng, width, height, 1, 0.6, 0.9, 3, 7)};
  r.normals = smooth_normals(rng, width, height, Vec3<double>(0.5, 0.4, -1.0), 0.1);
  r.normals_prev = smooth_normals(rng, width, height, Vec3<double>(-0.5, -0.4, -0.4), 0.1);
  std::uniform_real_distribution<double> trans(-0.1, 0.1), rot(-0.02, 0.02);
  r.xi << trans(rng), trans(rng), trans(rng), rot(rng), rot(rng), rot(rng);
  return r;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

Report run(const Options& opt) {
  const RandomInstance inst = random_instance(opt.seed, opt.width, opt.height);
  const Vars base{inst.dinv, inst.dinv_prev, inst.normals, inst.normals_prev, inst.xi};
  const NormalMapd computed = normal_from_depth(inst.dinv, inst.k);

  std::vector<LossSpec> specs;
  specs.push_back({"L_P",
                   [&](const Vars& v, bool g) -> TermResult {
                     return photometric_loss(inst.left_t, inst.right_t, &inst.left_prev, v.dinv, inst.k,
                                             inst.left_to_right, RigidTransformd::exp(v.xi), g);
                   },
                   {Var::Dinv}, true, false});
  specs.push_back({"L_DN",
                   [&](const Vars& v, bool g) {
                     return depth_normal_consistency_loss(v.dinv, v.normals, inst.left_t, inst.k, 1.0, 1.0, g);
                   },
                   {Var::Dinv, Var::Normal}, false, false});
  specs.push_back({"L_N", [&](const Vars& v, bool g) { return normal_direction_loss(v.normals, computed, g); },
                   {Var::Normal}, false, true});
  specs.push_back({"L_NS", [&](const Vars& v, bool g) { return normal_smoothness_loss(v.normals, inst.left_t, g); },
                   {Var::Normal}, false, false});
  specs.push_back({"L_DC",
                   [&](const Vars& v, bool g) {
                     return temporal_consistency_losses(v.dinv, v.dinv_prev, v.normals, v.normals_prev, inst.k,
                                                        RigidTransformd::exp(v.xi), g)
                         .depth;
                   },
                   {Var::Dinv, Var::DinvPrev}, true, false});
  specs.push_back({"L_NC",
                   [&](const Vars& v, bool g) {
                     return temporal_consistency_losses(v.dinv, v.dinv_prev, v.normals, v.normals_prev, inst.k,
                                                        RigidTransformd::exp(v.xi), g)
                         .normal;
                   },
                   {Var::Dinv, Var::Normal, Var::NormalPrev}, true, false});

  Report report;
  report.pass = true;
  std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<int> px(0, opt.width - 1), py(0, opt.height - 1);

  for (const auto& spec : specs) {
    const TermResult ref = spec.eval(base, true);
    LossCheck check;
    check.loss = spec.name;

    auto record = [&](Probe p) {
      p.rel_error = relative_error(p.analytic, p.numeric, opt.relative_floor);
      ++check.probes;
      if (p.rel_error >= check.max_rel_error) {
        check.max_rel_error = p.rel_error;
        check.worst = p;
      }
    };
    auto central = [&](const std::function<void(Vars&, double)>& perturb, double h) {
      Vars plus = base, minus = base;
      perturb(plus, h);
      perturb(minus, -h);
      return (spec.eval(plus, false).value - spec.eval(minus, false).value) / (2 * h);
    };

    int accepted = 0;
    for (int attempt = 0; attempt < 200 * opt.probes && accepted < opt.probes; ++attempt) {
      const int x = px(rng), y = py(rng);
      bool ok = true;
      for (Var v : spec.pixel_vars) {
        const bool prev = v == Var::DinvPrev || v == Var::NormalPrev;
        const double m = prev ? ref.kink_margin_prev(x, y) : ref.kink_margin(x, y);
        if (spec.smooth) continue;
        if (!(m >= opt.kink_threshold) || std::isinf(m)) ok = false;
      }
      if (!ok) continue;
      ++accepted;

      for (Var v : spec.pixel_vars) {
        if (v == Var::Dinv || v == Var::DinvPrev) {
          const bool prev = v == Var::DinvPrev;
          Probe p{prev ? "dinv_prev" : "dinv", x, y, 0,
                  prev ? ref.grad.d_dinv_prev(x, y) : ref.grad.d_dinv(x, y), 0, 0};
          p.numeric = central(
              [&](Vars& vars, double h) { (prev ? vars.dinv_prev : vars.dinv)(x, y) += h; }, opt.step);
          record(p);
        } else {
          const bool prev = v == Var::NormalPrev;
          const Vec3<double> n = prev ? base.normals_prev(x, y) : base.normals(x, y);
          const ImageGridd& g = prev ? ref.grad.d_normals_prev : ref.grad.d_normals;
          Vec3<double> t[2];
          tangent_basis(n, t[0], t[1]);
          for (int c = 0; c < 2; ++c) {
            Probe p{prev ? "normal_prev" : "normal", x, y, c, g.vec3(x, y).dot(t[c]), 0, 0};
            p.numeric = central(
                [&](Vars& vars, double h) {
                  (prev ? vars.normals_prev : vars.normals).set(x, y, (n + h * t[c]).normalized());
                },
                opt.step);
            record(p);
          }
        }
      }
    }

    if (spec.pose) {
      // The pose moves every warped sample at once, so the step stays well
      // inside the pose margin.
      const double h = std::clamp(0.1 * ref.pose_margin, 1e-9, opt.step);
      for (int c = 0; c < 6; ++c) {
        Probe p{"xi", -1, -1, c, ref.grad.d_xi[c], 0, 0};
        p.numeric = central([&](Vars& vars, double s) { vars.xi[c] += s; }, h);
        record(p);
      }
    }

    check.pass = accepted == opt.probes && check.max_rel_error < opt.tolerance;
    report.pass = report.pass && check.pass;
    report.losses.push_back(check);
  }
  return report;
}

std::string format_report(const Report& r, double tolerance) {
  std::ostringstream s;
  for (const auto& c : r.losses) {
    s << std::left << std::setw(6) << c.loss << std::right << " checks=" << std::setw(4) << c.probes
      << " max_rel_err=" << std::scientific << std::setprecision(3) << c.max_rel_error << " tol=" << tolerance
      << "  " << (c.pass ? "PASS" : "FAIL");
    if (!c.pass) {
      s << "  worst: " << c.worst.variable;
      if (c.worst.x >= 0) s << " pixel (" << c.worst.x << ", " << c.worst.y << ")";
      s << " component " << c.worst.component << " analytic=" << c.worst.analytic << " numeric=" << c.worst.numeric;
    }
    s << std::defaultfloat << '\n';
  }
  return s.str();
}

}  // namespace geoloss::gradcheck
