#include <doctest.h>

#include <bit>
#include <cstring>
#include <random>

#include "geoloss/io.hpp"
#include "support.hpp"

using namespace geoloss;
namespace fs = std::filesystem;

namespace {

float le_float(const std::string& bytes, std::size_t off) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= std::uint32_t(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

TEST_CASE("PFM layout: header, scale -1, little-endian, bottom-up") {
  const auto dir = support::scratch_dir("pfm_layout");
  ImageGridd g(3, 2, 1);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 3; ++x) g(x, y) = 10 * y + x + 0.5;
  io::write_pfm(dir / "a.pfm", g);
  const std::string bytes = support::file_bytes(dir / "a.pfm");
  const std::string header = "Pf\n3 2\n-1.0\n";
  REQUIRE(bytes.size() == header.size() + 6 * 4);
  CHECK(bytes.substr(0, header.size()) == header);
  // First stored scanline is the bottom row.
  CHECK(le_float(bytes, header.size()) == 10.5f);
  CHECK(le_float(bytes, header.size() + 8) == 12.5f);
  CHECK(le_float(bytes, header.size() + 12) == 0.5f);

  ImageGridd n(2, 2, 3, 0.25);
  io::write_pfm(dir / "n.pfm", n);
  CHECK(support::file_bytes(dir / "n.pfm").substr(0, 3) == "PF\n");
}

TEST_CASE("PFM round trip is exact at float precision") {
  const auto dir = support::scratch_dir("pfm_round");
  std::mt19937_64 rng(1);
  for (int c : {1, 3}) {
    const ImageGridd g = support::random_grid(rng, 17, 11, c, -3, 3);
    io::write_pfm(dir / "g.pfm", g);
    const ImageGridd r = io::read_pfm(dir / "g.pfm");
    REQUIRE(r.same_shape(g));
    for (Eigen::Index i = 0; i < g.data().size(); ++i) CHECK(r.data()[i] == double(float(g.data()[i])));
  }
}

TEST_CASE("PFM reader accepts big-endian files and rejects garbage") {
  const auto dir = support::scratch_dir("pfm_be");
  {
    std::ofstream out(dir / "be.pfm", std::ios::binary);
    out << "Pf\n2 1\n1.0\n";
    for (float v : {1.5f, -2.0f}) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 3; i >= 0; --i) out.put(char((bits >> (8 * i)) & 0xff));
    }
  }
  const ImageGridd g = io::read_pfm(dir / "be.pfm");
  CHECK(g(0, 0) == 1.5);
  CHECK(g(1, 0) == -2.0);

  {
    std::ofstream out(dir / "short.pfm", std::ios::binary);
    out << "Pf\n4 4\n-1.0\nxx";
  }
  CHECK_THROWS_AS(io::read_pfm(dir / "short.pfm"), Error);
  {
    std::ofstream out(dir / "bad.pfm", std::ios::binary);
    out << "P7\n1 1\n-1.0\n0000";
  }
  CHECK_THROWS_AS(io::read_pfm(dir / "bad.pfm"), Error);
  CHECK_THROWS_AS(io::read_pfm(dir / "missing.pfm"), Error);
  CHECK_THROWS_AS(io::write_pfm(dir / "two.pfm", ImageGridd(2, 2, 2)), Error);
}

TEST_CASE("PPM and PGM round trip at 8 bits") {
  const auto dir = support::scratch_dir("pnm");
  std::mt19937_64 rng(2);
  for (int c : {1, 3}) {
    const ImageGridd g = support::random_grid(rng, 13, 9, c, 0, 1);
    io::write_pnm(dir / "g.pnm", g);
    const std::string bytes = support::file_bytes(dir / "g.pnm");
    CHECK(bytes.substr(0, 2) == (c == 3 ? "P6" : "P5"));
    const ImageGridd r = io::read_pnm(dir / "g.pnm");
    REQUIRE(r.same_shape(g));
    CHECK((r.data() - g.data()).abs().maxCoeff() <= 0.5 / 255 + 1e-12);
    io::write_pnm(dir / "h.pnm", r);
    CHECK(support::file_bytes(dir / "h.pnm") == bytes);
  }
}

TEST_CASE("key = value parsing") {
  const auto kv = io::parse_key_values("# comment\n a = 1 \nb=two words # trailing\n\n");
  CHECK(kv.size() == 2);
  CHECK(kv.at("a") == "1");
  CHECK(kv.at("b") == "two words");
  CHECK_THROWS_AS(io::parse_key_values("a = 1\na = 2\n"), Error);
  CHECK_THROWS_AS(io::parse_key_values("just text\n"), Error);
  CHECK_THROWS_AS(io::parse_key_values(" = 3\n"), Error);

  CHECK(io::parse_double(" 2.5 ", "x") == 2.5);
  CHECK_THROWS_AS(io::parse_double("2.5x", "x"), Error);
  CHECK(io::parse_int("-7", "n") == -7);
  CHECK_THROWS_AS(io::parse_int("7.5", "n"), Error);
  const auto v = io::parse_doubles("1, 2 3,4", "v");
  CHECK(v == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("calibration and pose round trip") {
  const auto dir = support::scratch_dir("calib");
  io::Calibration c;
  c.k = Intrinsicsd{100.25, 99.5, 63.5, 47.5};
  c.left_to_right = RigidTransformd::translation_only(Vec3<double>(-0.54, 0, 0));
  c.width = 128;
  c.height = 96;
  io::write_calibration(dir / "calib.txt", c);
  const auto r = io::read_calibration(dir / "calib.txt");
  CHECK(r.width == 128);
  CHECK(r.height == 96);
  CHECK(r.k.fx == c.k.fx);
  CHECK(r.k.cy == c.k.cy);
  CHECK((r.left_to_right.xi() - c.left_to_right.xi()).norm() == 0);
  const auto kv = io::read_key_values(dir / "calib.txt");
  CHECK(io::parse_doubles(kv.at("K"), "K") == std::vector<double>{100.25, 0, 63.5, 0, 99.5, 47.5, 0, 0, 1});

  Vec6<double> xi;
  xi << 0.1, -0.2, 0.5, 0.01, -0.003, 0.002;
  io::write_pose(dir / "pose.txt", RigidTransformd::exp(xi));
  CHECK((io::read_pose(dir / "pose.txt").xi() - xi).norm() == 0);

  io::write_key_values(dir / "bad.txt", {{"width", "128"}});
  CHECK_THROWS_AS(io::read_calibration(dir / "bad.txt"), Error);
}
