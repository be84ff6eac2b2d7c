#include <doctest.h>

#include <random>

#include "geoloss/eval.hpp"
#include "support.hpp"

using namespace geoloss;

namespace {

ImageGridd row(std::initializer_list<double> v) {
  ImageGridd g(int(v.size()), 1, 1);
  int i = 0;
  for (double x : v) g(i++, 0) = x;
  return g;
}

NormalMapd normals_at_angles(std::initializer_list<double> degrees, NormalMapd& gt) {
  NormalMapd pred{ImageGridd(int(degrees.size()), 1, 3)};
  gt = NormalMapd{ImageGridd(int(degrees.size()), 1, 3)};
  int i = 0;
  for (double d : degrees) {
    const double r = d * M_PI / 180;
    gt.set(i, 0, Vec3<double>(0, 0, -1));
    pred.set(i, 0, Vec3<double>(std::sin(r), 0, -std::cos(r)));
    ++i;
  }
  return pred;
}

}  // namespace

TEST_CASE("depth metrics") {
  const ImageGridd gt = row({2, 4, 8});
  const auto all = support::full_mask(3, 1);

  SUBCASE("identical") {
    const auto m = eval::depth_metrics(gt, gt, all);
    CHECK(m.abs_rel == 0);
    CHECK(m.sq_rel == 0);
    CHECK(m.rmse == 0);
    CHECK(m.rmse_log == 0);
    CHECK(m.delta1 == 1);
    CHECK(m.delta3 == 1);
    CHECK(m.count == 3);
  }
  SUBCASE("uniform 1.3 scale") {
    ImageGridd p = gt;
    p.data() *= 1.3;
    const auto m = eval::depth_metrics(p, gt, all);
    CHECK(std::abs(m.abs_rel - 0.3) < 1e-12);
    CHECK(m.delta1 == 0);
    CHECK(m.delta2 == 1);
    CHECK(m.delta3 == 1);
    const auto med = eval::depth_metrics(p, gt, all, true);
    CHECK(med.abs_rel < 1e-12);
  }
  SUBCASE("three-pixel fixture") {
    const auto m = eval::depth_metrics(row({2, 5, 6}), gt, all);
    CHECK(std::abs(m.abs_rel - 1.0 / 6.0) < 1e-9);
    CHECK(std::abs(m.rmse - std::sqrt(5.0 / 3.0)) < 1e-9);
    CHECK(std::abs(m.sq_rel - (0 + 1.0 / 4 + 4.0 / 8) / 3) < 1e-9);
    CHECK(std::abs(m.rmse_log - std::sqrt((std::pow(std::log(1.25), 2) + std::pow(std::log(0.75), 2)) / 3)) < 1e-9);
    // Ratios 1, 1.25 and 4/3: 1.25 is not strictly below the threshold.
    CHECK(std::abs(m.delta1 - 1.0 / 3.0) < 1e-9);
    CHECK(m.delta2 == 1);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(eval::depth_metrics(gt, gt, ValidityMask(3, 1, false)), Error);
    CHECK_THROWS_AS(eval::depth_metrics(row({1, 0, 2}), gt, all), Error);
    CHECK_THROWS_AS(eval::depth_metrics(row({1, 2}), gt, all), Error);
  }
}

TEST_CASE("depth metric properties") {
  std::mt19937_64 rng(1);
  const ImageGridd g = support::random_grid(rng, 20, 10, 1, 1, 80);
  const ImageGridd p = support::random_grid(rng, 20, 10, 1, 1, 80);
  const auto mask = support::full_mask(20, 10);
  const auto a = eval::depth_metrics(p, g, mask), b = eval::depth_metrics(g, p, mask);
  CHECK(a.delta1 == b.delta1);
  CHECK(a.delta2 == b.delta2);
  CHECK(a.delta3 == b.delta3);
  CHECK(a.delta1 <= a.delta2);
  CHECK(a.delta2 <= a.delta3);

  ImageGridd far = g;
  far.data() *= 1.25 * 1.25 * 1.25 * 1.001;
  const auto f = eval::depth_metrics(far, g, mask);
  CHECK(f.delta1 == 0);
  CHECK(f.delta2 == 0);
  CHECK(f.delta3 == 0);
}

TEST_CASE("normal metrics") {
  NormalMapd gt;
  SUBCASE("identical") {
    const auto pred = normals_at_angles({0, 0, 0}, gt);
    const auto m = eval::normal_metrics(pred, gt, support::full_mask(3, 1));
    CHECK(m.mean_deg == 0);
    CHECK(m.median_deg == 0);
    CHECK(m.pct_11_25 == 1);
    CHECK(m.pct_30 == 1);
  }
  SUBCASE("all at 20 degrees") {
    const auto pred = normals_at_angles({20, 20, 20, 20}, gt);
    const auto m = eval::normal_metrics(pred, gt, support::full_mask(4, 1));
    CHECK(m.mean_deg == doctest::Approx(20).epsilon(1e-12));
    CHECK(m.median_deg == doctest::Approx(20).epsilon(1e-12));
    CHECK(m.pct_11_25 == 0);
    CHECK(m.pct_22_5 == 1);
    CHECK(m.pct_30 == 1);
  }
  SUBCASE("two-pixel fixture") {
    const auto pred = normals_at_angles({10, 40}, gt);
    const auto m = eval::normal_metrics(pred, gt, support::full_mask(2, 1));
    CHECK(std::abs(m.mean_deg - 25) < 1e-9);
    CHECK(std::abs(m.median_deg - 25) < 1e-9);
    CHECK(m.pct_11_25 == 0.5);
    CHECK(m.pct_22_5 == 0.5);
    CHECK(m.pct_30 == 0.5);
  }
  SUBCASE("errors") {
    const auto pred = normals_at_angles({10, 40}, gt);
    CHECK_THROWS_AS(eval::normal_metrics(pred, gt, ValidityMask(2, 1, false)), Error);
    NormalMapd bad = pred;
    bad.set(0, 0, Vec3<double>(0, 0, -2));
    CHECK_THROWS_AS(eval::normal_metrics(bad, gt, support::full_mask(2, 1)), Error);
  }
}

TEST_CASE("normal metrics are invariant to a common rotation") {
  std::mt19937_64 rng(3);
  NormalMapd a{ImageGridd(16, 8, 3)}, b{ImageGridd(16, 8, 3)};
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 16; ++x) {
      a.set(x, y, support::random_unit(rng));
      b.set(x, y, support::random_unit(rng));
    }
  const Mat3<double> r = Eigen::AngleAxisd(0.7, Vec3<double>(1, 2, -0.5).normalized()).toRotationMatrix();
  NormalMapd ra = a, rb = b;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 16; ++x) {
      ra.set(x, y, Vec3<double>(r * a(x, y)));
      rb.set(x, y, Vec3<double>(r * b(x, y)));
    }
  const auto mask = support::full_mask(16, 8);
  const auto m1 = eval::normal_metrics(a, b, mask), m2 = eval::normal_metrics(ra, rb, mask);
  CHECK(std::abs(m1.mean_deg - m2.mean_deg) < 1e-9);
  CHECK(std::abs(m1.median_deg - m2.median_deg) < 1e-9);
  CHECK(m1.pct_11_25 <= m1.pct_22_5);
  CHECK(m1.pct_22_5 <= m1.pct_30);
}

TEST_CASE("evaluation mask") {
  const ImageGridd gt(128, 96, 1, 10.0);
  CHECK(eval::build_mask(gt).count() == 128 * 96);

  ImageGridd holes = gt;
  holes(3, 4) = 0;
  holes(5, 6) = 100;
  const auto m = eval::build_mask(holes, 80);
  CHECK(m.count() == 128 * 96 - 2);
  CHECK_FALSE(m(3, 4));
  CHECK_FALSE(m(5, 6));
  CHECK(eval::build_mask(holes)(5, 6));

  CHECK(eval::build_mask(gt, std::numeric_limits<double>::infinity(), eval::CropRect{0.25, 0.25, 0.75, 0.75})
            .count() == 3072);
  CHECK(eval::build_mask(gt, 5).count() == 0);

  CHECK_THROWS_AS(eval::CropRect::parse("0.5,0,0.4,1"), Error);
  CHECK_THROWS_AS(eval::CropRect::parse("0,0,1"), Error);
  const auto c = eval::CropRect::parse("0.1, 0.2, 0.9, 1");
  CHECK(c.x0 == 0.1);
  CHECK(c.y1 == 1);
  CHECK_THROWS_AS(eval::build_mask(gt, 0), Error);
}

TEST_CASE("metrics table and CSV") {
  eval::DepthMetrics d;
  d.abs_rel = 0.125;
  eval::NormalMetrics n;
  n.mean_deg = 3.5;
  const std::string t = eval::format_table(d, n);
  CHECK(t.find("abs_rel") != std::string::npos);
  CHECK(t.find("0.1250") != std::string::npos);
  const auto dir = support::scratch_dir("eval_csv");
  eval::write_csv(dir / "m.csv", d, n);
  const std::string csv = support::file_bytes(dir / "m.csv");
  CHECK(csv.rfind("abs_rel,sq_rel,rmse,rmse_log,delta1,delta2,delta3,", 0) == 0);
  CHECK(csv.find("\n0.125,") != std::string::npos);
}
