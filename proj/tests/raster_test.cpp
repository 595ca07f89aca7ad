#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace lunarsfs;
using lunarsfs::test::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

const char* kHeader3x3 =
    "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\nnodata_value -9999\n";

}  // namespace

TEST(RasterGrid, RejectsDegenerateShapes) {
  EXPECT_THROW(RasterGrid(1, 5, 1.0), InputError);
  EXPECT_THROW(RasterGrid(5, 5, 0.0), InputError);
  EXPECT_THROW(RasterGrid(5, 5, -1.0), InputError);
}

TEST(RasterGrid, PixelCentersMapToWorld) {
  RasterGrid g(4, 5, 2.0, 100.0, 200.0);
  const WorldPoint top_left = g.world_of(0, 0);
  EXPECT_DOUBLE_EQ(top_left.x, 101.0);
  EXPECT_DOUBLE_EQ(top_left.y, 200.0 + 3.5 * 2.0);
  const WorldPoint w = g.world_of(3, 4);
  EXPECT_DOUBLE_EQ(w.x, 100.0 + 4.5 * 2.0);
  EXPECT_DOUBLE_EQ(w.y, 201.0);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      const WorldPoint p = g.world_of(r, c);
      const PixelPoint px = g.pixel_of(p.x, p.y);
      EXPECT_NEAR(px.row, static_cast<double>(r), 1e-12);
      EXPECT_NEAR(px.col, static_cast<double>(c), 1e-12);
      const WorldPoint back = g.world_of(static_cast<std::size_t>(std::lround(px.row)),
                                        static_cast<std::size_t>(std::lround(px.col)));
      EXPECT_DOUBLE_EQ(back.x, p.x);
      EXPECT_DOUBLE_EQ(back.y, p.y);
    }
}

TEST(ReadGrid, ParsesConstantAsc) {
  TempDir dir("raster_const");
  std::string s = kHeader3x3;
  s += "1.0 1.0 1.0\n1.0 1.0 1.0\n1.0 1.0 1.0\n";
  write_text(dir / "a.asc", s);
  const RasterGrid g = read_grid(dir / "a.asc");
  EXPECT_EQ(g.rows(), 3u);
  EXPECT_EQ(g.cols(), 3u);
  for (double v : g.values()) EXPECT_EQ(v, 1.0);
}

TEST(ReadGrid, NodataCountsInMask) {
  TempDir dir("raster_nodata");
  std::string s = kHeader3x3;
  s += "1 2 3\n4 -9999 6\n7 8 9\n";
  write_text(dir / "a.asc", s);
  const RasterGrid g = read_grid(dir / "a.asc");
  EXPECT_EQ(ValidMask(g).count(), 8u);
  EXPECT_FALSE(g.valid(1, 1));
  EXPECT_EQ(g(0, 2), 3.0);
  EXPECT_EQ(g(2, 0), 7.0);
}

TEST(ReadGrid, SixteenBitPgmScalesToUnit) {
  TempDir dir("raster_pgm16");
  std::string s = "P5\n2 2\n65535\n";
  for (int i = 0; i < 4; ++i) s += i == 0 ? std::string("\xff\xff", 2) : std::string("\x00\x00", 2);
  write_text(dir / "a.pgm", s);
  const RasterGrid g = read_grid(dir / "a.pgm");
  EXPECT_EQ(g(0, 0), 1.0);
  EXPECT_EQ(g(1, 1), 0.0);
}

TEST(ReadGrid, ReportsLineNumbers) {
  TempDir dir("raster_errors");
  {
    std::string s = kHeader3x3;
    s += "1 2 3\n4 5\n7 8 9\n";
    write_text(dir / "short.asc", s);
    try {
      (void)read_grid(dir / "short.asc");
      FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 8u);
    }
  }
  {
    std::string s = kHeader3x3;
    s += "1 2 3\n4 five 6\n7 8 9\n";
    write_text(dir / "token.asc", s);
    try {
      (void)read_grid(dir / "token.asc");
      FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 8u);
      EXPECT_NE(std::string(e.what()).find("five"), std::string::npos);
    }
  }
  {
    write_text(dir / "header.asc", "ncols 3\nnrows\n");
    try {
      (void)read_grid(dir / "header.asc");
      FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 2u);
    }
  }
  {
    std::string s = kHeader3x3;
    s += "1 2 3\nnan 5 6\n7 8 9\n";
    write_text(dir / "nan.asc", s);
    EXPECT_THROW((void)read_grid(dir / "nan.asc"), ParseError);
  }
  EXPECT_THROW((void)read_grid(dir / "missing.asc"), InputError);
}

TEST(WriteGrid, AscRoundTripWithinPrecision) {
  TempDir dir("raster_roundtrip");
  std::mt19937_64 rng(11);
  RasterGrid g = lunarsfs::test::random_grid(8, 8, -500.0, 500.0, rng, 0.5);
  write_grid(g, dir / "g.asc");
  const RasterGrid back = read_grid(dir / "g.asc");
  ASSERT_TRUE(back.same_geometry(g));
  double peak = 0.0;
  for (double v : g.values()) peak = std::max(peak, std::abs(v));
  EXPECT_LE(lunarsfs::test::max_abs_diff(g, back), 1e-5 * peak);
}

TEST(WriteGrid, ZeroGridRoundTripsExactly) {
  TempDir dir("raster_zero");
  RasterGrid g(5, 4, 1.0);
  write_grid(g, dir / "g.asc");
  EXPECT_TRUE(read_grid(dir / "g.asc") == g);
}

TEST(WriteGrid, NodataSurvivesAsc) {
  TempDir dir("raster_nodata_rt");
  RasterGrid g(3, 3, 1.0, 0.0, 0.0, -32768.0, 2.5);
  g.set_nodata(1, 2);
  write_grid(g, dir / "g.asc");
  const RasterGrid back = read_grid(dir / "g.asc");
  EXPECT_EQ(back.nodata_value(), -32768.0);
  EXPECT_FALSE(back.valid(1, 2));
  EXPECT_EQ(back.count_valid(), 8u);
}

TEST(WriteGrid, PgmRejectsNodata) {
  TempDir dir("raster_pgm_nodata");
  RasterGrid g(3, 3, 1.0, 0.0, 0.0, kDefaultNodata, 0.5);
  g.set_nodata(0, 0);
  try {
    write_grid(g, dir / "g.pgm");
    FAIL() << "expected an error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("nodata in image output"), std::string::npos);
  }
}

TEST(WriteGrid, PgmQuantizesToMaxval) {
  TempDir dir("raster_pgm_rt");
  std::mt19937_64 rng(5);
  const RasterGrid g = lunarsfs::test::random_grid(6, 7, 0.0, 1.0, rng);
  for (unsigned maxval : {255u, 65535u}) {
    const auto path = dir / ("g" + std::to_string(maxval) + ".pgm");
    write_grid(g, path, WriteOptions{6, maxval});
    const RasterGrid back = read_grid(path);
    EXPECT_LE(lunarsfs::test::max_abs_diff(g, back), 0.5 / maxval + 1e-15);
  }
}

TEST(BilinearSample, ConstantField) {
  RasterGrid g(6, 6, 2.0, 10.0, 20.0, kDefaultNodata, 5.0);
  EXPECT_EQ(bilinear_sample(g, 13.3, 27.1).value(), 5.0);
}

TEST(BilinearSample, MidpointOfRampIsMean) {
  const RasterGrid g = lunarsfs::test::make_grid(4, 4, 1.0, [](double x, double) { return x; });
  const WorldPoint a = g.world_of(1, 1), b = g.world_of(1, 2);
  const auto v = bilinear_sample(g, 0.5 * (a.x + b.x), a.y);
  ASSERT_TRUE(v);
  EXPECT_DOUBLE_EQ(*v, 0.5 * (g(1, 1) + g(1, 2)));
}

TEST(BilinearSample, OutsideHullIsNodata) {
  RasterGrid g(4, 4, 1.0, 0.0, 0.0, kDefaultNodata, 1.0);
  EXPECT_FALSE(bilinear_sample(g, -0.5, 2.0));
  EXPECT_FALSE(bilinear_sample(g, 2.0, 4.5));
  EXPECT_TRUE(bilinear_sample(g, 0.5, 0.5));
  EXPECT_TRUE(bilinear_sample(g, 3.5, 3.5));
}

TEST(BilinearSample, NodataNeighbourPoisonsSample) {
  RasterGrid g(4, 4, 1.0, 0.0, 0.0, kDefaultNodata, 1.0);
  g.set_nodata(1, 1);
  const WorldPoint w = g.world_of(1, 1);
  EXPECT_FALSE(bilinear_sample(g, w.x + 0.3, w.y - 0.3));
  EXPECT_TRUE(bilinear_sample(g, g.world_of(3, 3).x - 0.2, g.world_of(3, 3).y + 0.2));
}

TEST(ValidMask, ConsistentWithSentinelAndIdempotent) {
  RasterGrid g(3, 4, 1.0, 0.0, 0.0, -1.0, 0.0);
  g(0, 1) = -1.0;
  g(2, 3) = -1.0;
  g(1, 1) = -1.0000001;
  const ValidMask m(g);
  EXPECT_EQ(m.count(), 10u);
  EXPECT_FALSE(m(0, 1));
  EXPECT_TRUE(m(1, 1));
  const ValidMask again(g);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(m(r, c), again(r, c));
}

TEST(StretchToUnit, MapsRangeToUnitInterval) {
  RasterGrid g(2, 2, 1.0);
  g(0, 0) = -2.0;
  g(0, 1) = 0.0;
  g(1, 0) = 2.0;
  g(1, 1) = 6.0;
  const RasterGrid s = stretch_to_unit(g);
  EXPECT_EQ(s(0, 0), 0.0);
  EXPECT_EQ(s(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.25);
}
