#include <gtest/gtest.h>

#include "shapecomp/errors.hpp"
#include "shapecomp/mesh_io.hpp"
#include "testutil.hpp"

using namespace shapecomp;

TEST(Off, MinimalTriangle) {
  const Mesh m = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  EXPECT_EQ(m.vertex_count(), 3);
  EXPECT_EQ(m.topology().faces().size(), 1u);
  EXPECT_DOUBLE_EQ(m.vertices()(1, 0), 1.0);
}

TEST(Off, CommentsIgnored) {
  const Mesh m = parse_off("# header\nOFF\n3 1 0 # counts\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  EXPECT_EQ(m.vertex_count(), 3);
}

TEST(Off, QuadRejected) {
  EXPECT_THROW(parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"), ParseError);
}

TEST(Off, ErrorsCarryLine) {
  try {
    parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6u);
  }
  try {
    parse_off("OFX\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  EXPECT_THROW(parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n"), ParseError);
}

TEST(Off, RoundTripLevelThree) {
  const Mesh m = icosphere(3);
  const auto dir = testutil::temp_dir("off");
  save_mesh(m, dir / "m.off");
  const Mesh back = load_mesh(dir / "m.off");
  EXPECT_EQ(back.fingerprint(), m.fingerprint());
  EXPECT_LT(max_row_distance(back.vertices(), m.vertices()), 1e-14);
}

TEST(Xyz, SinglePoint) {
  const PointCloud c = parse_xyz("0 0 0\n");
  EXPECT_EQ(c.size(), 1);
}

TEST(Xyz, EmptyRejected) {
  EXPECT_THROW(parse_xyz(""), ParseError);
}

TEST(Xyz, NonNumericCarriesLine) {
  try {
    parse_xyz("0 0 0\n1 a 2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Xyz, RandomRoundTripBitwiseText) {
  CounterRng rng(17);
  const Tensor p = testutil::random_tensor(1000, 3, rng, 100.0);
  const std::string text = format_xyz(p);
  const PointCloud back = parse_xyz(text);
  EXPECT_EQ(format_xyz(back.points()), text);
  EXPECT_EQ(back.points(), p);
}

TEST(FormatDouble, RoundTrips) {
  CounterRng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(Io, MissingFile) {
  EXPECT_THROW(load_mesh("/nonexistent/path.off"), IoError);
}
