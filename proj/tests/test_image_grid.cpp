#include <doctest.h>

#include <random>

#include "geoloss/image_grid.hpp"
#include "support.hpp"

using namespace geoloss;

TEST_CASE("ImageGrid rejects bad shapes") {
  CHECK_THROWS_AS(ImageGridd(0, 4, 1), Error);
  CHECK_THROWS_AS(ImageGridd(4, 4, 4), Error);
  ImageGridd g(3, 2, 2, 0.5);
  CHECK(g.pixel_count() == 6);
  g(2, 1, 1) = 7;
  CHECK(g.data()[(1 * 3 + 2) * 2 + 1] == 7);
}

TEST_CASE("depth conversion is exactly invertible") {
  for (double d : {0.5, 1.0, 3.7, 80.0}) CHECK(depth_from_inverse(inverse_from_depth(d)) == doctest::Approx(d).epsilon(1e-15));
  CHECK(depth_from_inverse(0.0) == doctest::Approx(1e4));
}

TEST_CASE("bilinear_sample") {
  ImageGridd g(4, 3, 1);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) g(x, y) = 10 * y + x * x;

  SUBCASE("integer position gives the pixel") {
    const auto s = bilinear_sample(g, Vec2<double>(2, 1));
    CHECK(s.valid);
    CHECK(s.value[0] == 14);
  }
  SUBCASE("midpoint of 0 and 1") {
    ImageGridd h(2, 2, 1);
    h(1, 0) = 1;
    h(1, 1) = 1;
    const auto s = bilinear_sample(h, Vec2<double>(0.5, 0.5));
    CHECK(s.value[0] == doctest::Approx(0.5));
    CHECK(s.d_q(0, 0) == doctest::Approx(1));
    CHECK(s.d_q(0, 1) == doctest::Approx(0));
  }
  SUBCASE("outside the grid is invalid and zero") {
    const auto s = bilinear_sample(g, Vec2<double>(-0.5, 0));
    CHECK_FALSE(s.valid);
    CHECK(s.value[0] == 0);
    CHECK(s.d_q.isZero());
    CHECK_FALSE(bilinear_sample(g, Vec2<double>(3.0001, 1)).valid);
    CHECK_FALSE(bilinear_sample(g, Vec2<double>(1, 2.0001)).valid);
    CHECK(bilinear_sample(g, Vec2<double>(3, 2)).valid);
  }
}

TEST_CASE("bilinear_sample gradient matches central differences") {
  std::mt19937_64 rng(3);
  const ImageGridd g = support::random_grid(rng, 9, 7, 3, 0, 1);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  std::uniform_int_distribution<int> ix(0, 7), iy(0, 5);
  const double h = 1e-4;
  for (int i = 0; i < 100; ++i) {
    const Vec2<double> q(ix(rng) + u(rng), iy(rng) + u(rng));
    const auto s = bilinear_sample(g, q);
    for (int a = 0; a < 2; ++a) {
      Vec2<double> e = Vec2<double>::Zero();
      e[a] = h;
      const auto sp = bilinear_sample(g, Vec2<double>(q + e)), sm = bilinear_sample(g, Vec2<double>(q - e));
      for (int c = 0; c < 3; ++c) {
        const double fd = (sp.value[c] - sm.value[c]) / (2 * h);
        CHECK(std::abs(fd - s.d_q(c, a)) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("bilinear_sample reproduces affine fields exactly") {
  ImageGridd g(12, 10, 2);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 12; ++x) {
      g(x, y, 0) = 0.3 * x - 1.7 * y + 2;
      g(x, y, 1) = -0.05 * x + 0.01 * y;
    }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(0, 11), uy(0, 9);
  for (int i = 0; i < 200; ++i) {
    const Vec2<double> q(ux(rng), uy(rng));
    const auto s = bilinear_sample(g, q);
    CHECK(std::abs(s.value[0] - (0.3 * q.x() - 1.7 * q.y() + 2)) < 1e-12);
    CHECK(std::abs(s.value[1] - (-0.05 * q.x() + 0.01 * q.y())) < 1e-12);
  }
}

TEST_CASE("spatial_gradients") {
  CHECK_THROWS_AS(spatial_gradients(ImageGridd(1, 5, 1)), Error);
  SUBCASE("constant") {
    const auto s = spatial_gradients(ImageGridd(5, 4, 3, 0.25));
    CHECK(s.dx.data().isZero());
    CHECK(s.dy.data().isZero());
  }
  SUBCASE("ramp in x") {
    ImageGridd g(5, 4, 1);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 5; ++x) g(x, y) = x;
    const auto s = spatial_gradients(g);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 5; ++x) {
        CHECK(s.dx(x, y) == (x == 4 ? 0 : 1));
        CHECK(s.dy(x, y) == 0);
      }
  }
  SUBCASE("2x2") {
    ImageGridd g(2, 2, 1);
    g(0, 0) = 0;
    g(1, 0) = 2;
    g(0, 1) = 1;
    g(1, 1) = 3;
    const auto s = spatial_gradients(g);
    CHECK(s.dx(0, 0) == 2);
    CHECK(s.dy(0, 0) == 1);
  }
}

TEST_CASE("edge_weight") {
  CHECK((edge_weight(ImageGridd(6, 5, 3, 0.4), 1.0, 1.0).data() == 1.0).all());

  ImageGridd g(3, 3, 1);
  g(1, 1) = 0;
  g(2, 1) = 0.6;
  g(1, 2) = 0.8;
  CHECK(edge_weight(g, 1.0, 1.0)(1, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(edge_weight(g, 2.0, 2.0)(1, 1) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));

  std::mt19937_64 rng(8);
  const ImageGridd r = support::random_grid(rng, 8, 8, 3, 0, 1);
  const ImageGridd w0 = edge_weight(r, 0.0, 1.0);
  CHECK((w0.data() == 1.0).all());
  const ImageGridd w = edge_weight(r, 1.0, 1.0);
  CHECK((w.data() > 0).all());
  CHECK((w.data() <= 1).all());
}

TEST_CASE("edge_weight uses the channel mean and decreases with the gradient") {
  ImageGridd g(2, 2, 3);
  g(1, 0, 0) = 0.3;
  g(1, 0, 1) = 0.6;
  g(1, 0, 2) = 0.0;
  CHECK(edge_weight(g, 1.0, 1.0)(0, 0) == doctest::Approx(std::exp(-0.3)).epsilon(1e-14));

  double prev = 1.0;
  for (double step : {0.01, 0.1, 0.5, 1.0, 4.0}) {
    ImageGridd h(2, 2, 1);
    h(1, 0) = step;
    const double v = edge_weight(h, 1.0, 1.0)(0, 0);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("downsample_box and upsample_bilinear") {
  ImageGridd g(6, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) g(x, y) = x + 10 * y;
  const auto d = downsample_box(g);
  CHECK(d.width() == 3);
  CHECK(d.height() == 2);
  CHECK(d(0, 0) == doctest::Approx(0.25 * (0 + 1 + 10 + 11)));
  CHECK(d(2, 1) == doctest::Approx(0.25 * (24 + 25 + 34 + 35)));

  const auto c = downsample_box(ImageGridd(7, 5, 3, 0.3));
  CHECK(c.width() == 3);
  CHECK((c.data() - 0.3).abs().maxCoeff() < 1e-15);

  // Affine fields survive a down/up round trip away from the clamped border.
  ImageGridd a(16, 12, 1);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x) a(x, y) = 0.5 * x - 0.25 * y;
  const auto up = upsample_bilinear(downsample_box(a), 16, 12);
  for (int y = 1; y < 11; ++y)
    for (int x = 1; x < 15; ++x) CHECK(std::abs(up(x, y) - a(x, y)) < 1e-12);
}

TEST_CASE("project_normals normalizes and faces the camera") {
  const Intrinsicsd k{50, 50, 4, 3};
  NormalMapd n{ImageGridd(9, 7, 3)};
  std::mt19937_64 rng(2);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 9; ++x) n.set(x, y, Vec3<double>(3 * support::random_unit(rng)));
  n.set(0, 0, Vec3<double>::Zero());
  project_normals(n, k);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 9; ++x) {
      CHECK(std::abs(n(x, y).norm() - 1) < 1e-12);
      CHECK(n(x, y).dot(backproject(double(x), double(y), k)) < 0);
    }
  CHECK((n(0, 0) - Vec3<double>(0, 0, -1)).norm() == 0);
}
