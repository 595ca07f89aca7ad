#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace lunarsfs;
using lunarsfs::test::make_grid;

TEST(Geometry, DirectionsAreUnitAndOriented) {
  for (double inc : {0.0, 30.0, 70.0, 89.0})
    for (double az : {0.0, 45.0, 200.0, 315.0}) {
      IlluminationGeometry g;
      g.sun_incidence = inc;
      g.sun_azimuth = az;
      EXPECT_NEAR(g.sun_dir().norm(), 1.0, 1e-12);
      EXPECT_NEAR(g.view_dir().norm(), 1.0, 1e-12);
    }
  // Azimuth 90 is due east.
  const Vec3 east = direction_from_angles(90.0, 90.0);
  EXPECT_NEAR(east.x, 1.0, 1e-15);
  EXPECT_NEAR(east.y, 0.0, 1e-15);
  const Vec3 north = direction_from_angles(90.0, 0.0);
  EXPECT_NEAR(north.y, 1.0, 1e-15);
}

TEST(Geometry, RenderRejectsGrazingSun) {
  IlluminationGeometry g;
  g.sun_incidence = 90.0;
  EXPECT_THROW(g.check_renderable(), InputError);
}

TEST(Albedo, Range) {
  EXPECT_THROW(Albedo(0.0), InputError);
  EXPECT_THROW(Albedo(1.5), InputError);
  EXPECT_NO_THROW(Albedo(1.0));
}

TEST(ComputeGradients, ExactOnPlaneInMeters) {
  const RasterGrid g = make_grid(7, 9, 2.5, [](double x, double) { return 2.0 * x; });
  const NormalField nf = compute_gradients(g);
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) {
      EXPECT_NEAR(nf.p(r, c), 2.0, 1e-12);
      EXPECT_NEAR(nf.q(r, c), 0.0, 1e-12);
    }
  EXPECT_TRUE(nf.central(3, 4));
  EXPECT_FALSE(nf.central(0, 4));
}

TEST(ComputeGradients, NorthIsUp) {
  const RasterGrid g = make_grid(5, 5, 1.0, [](double, double y) { return 3.0 * y; });
  const NormalField nf = compute_gradients(g);
  EXPECT_NEAR(nf.q(2, 2), 3.0, 1e-12);
}

TEST(ComputeGradients, FlatAndUnitSlopeNormals) {
  const RasterGrid flat(4, 4, 1.0);
  const Vec3 n = compute_gradients(flat).normal(1, 1);
  EXPECT_EQ(n.x, 0.0);
  EXPECT_EQ(n.y, 0.0);
  EXPECT_EQ(n.z, 1.0);
  const RasterGrid tilted = make_grid(4, 4, 1.0, [](double x, double) { return x; });
  const Vec3 m = compute_gradients(tilted).normal(1, 1);
  EXPECT_NEAR(m.x, -1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(m.y, 0.0, 1e-15);
  EXPECT_NEAR(m.z, 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(ComputeGradients, OneSidedNextToNodataAndMasksIsolated) {
  RasterGrid g = make_grid(5, 5, 1.0, [](double x, double y) { return x + 2.0 * y; });
  g.set_nodata(2, 3);
  // Isolated valid pixel: no horizontal neighbours.
  g.set_nodata(0, 0);
  g.set_nodata(0, 2);
  const NormalField nf = compute_gradients(g);
  EXPECT_TRUE(nf.valid(2, 2));
  EXPECT_FALSE(nf.central(2, 2));
  EXPECT_NEAR(nf.p(2, 2), 1.0, 1e-12);
  EXPECT_NEAR(nf.q(2, 2), 2.0, 1e-12);
  EXPECT_FALSE(nf.valid(0, 1));
  EXPECT_FALSE(nf.valid(2, 3));
  EXPECT_THROW((void)compute_gradients(RasterGrid(3, 3, 1.0, 0, 0, 0.0, 0.0)), InputError);
}

TEST(CosAngles, FlatSurface) {
  const NormalField nf = compute_gradients(RasterGrid(3, 3, 1.0));
  IlluminationGeometry g;
  g.sun_incidence = 0.0;
  EXPECT_NEAR(cos_angles(nf, g).cos_i(1, 1), 1.0, 1e-15);
  g.sun_incidence = 60.0;
  EXPECT_NEAR(cos_angles(nf, g).cos_i(1, 1), 0.5, 1e-12);
}

TEST(CosAngles, BackFacingSlopeClampsToZero) {
  // Slope rising to the east (facing west), sun low in the east.
  const RasterGrid g = make_grid(4, 4, 1.0, [](double x, double) { return 2.0 * x; });
  IlluminationGeometry geom;
  geom.sun_incidence = 80.0;
  geom.sun_azimuth = 90.0;
  const CosineGrids cg = cos_angles(compute_gradients(g), geom);
  EXPECT_EQ(cg.cos_i(1, 1), 0.0);
  EXPECT_GT(cg.cos_e(1, 1), 0.0);
}

TEST(LunarLambert, PointValues) {
  EXPECT_EQ(lunar_lambert(1.0, 1.0, Albedo(1.0)).value(), 1.0);
  EXPECT_NEAR(lunar_lambert(0.5, 1.0, Albedo(0.5)).value(), 11.0 / 24.0, 1e-12);
  EXPECT_LT(lunar_lambert(0.7, 0.9, Albedo(1e-9)).value(), 1e-8);
  EXPECT_EQ(lunar_lambert(0.0, 0.9, Albedo(0.4)).value(), 0.0);
  EXPECT_FALSE(lunar_lambert(0.5, 0.0, Albedo(0.4)).has_value());
  EXPECT_FALSE(lunar_lambert(0.5, -0.2, Albedo(0.4)).has_value());
}

TEST(LunarLambert, MatchesAngleOracle) {
  for (double a : {0.1, 0.5, 0.93})
    for (double i : {0.0, 20.0, 55.0, 80.0})
      for (double e : {0.0, 15.0, 60.0}) {
        const double ci = std::cos(i * M_PI / 180.0), ce = std::cos(e * M_PI / 180.0);
        EXPECT_NEAR(lunar_lambert(ci, ce, Albedo(a)).value(), lunarsfs::test::lunar_lambert_oracle(a, i, e), 1e-14);
      }
}

TEST(LunarLambert, PartialsMatchDifferences) {
  for (double a : {0.3, 1.0}) {
    const double ci = 0.4, ce = 0.8, h = 1e-6;
    const ReflectancePartials d = lunar_lambert_partials(ci, ce, a);
    const Albedo al(a);
    EXPECT_NEAR(d.value, lunar_lambert(ci, ce, al).value(), 1e-15);
    EXPECT_NEAR(d.d_cos_i, (*lunar_lambert(ci + h, ce, al) - *lunar_lambert(ci - h, ce, al)) / (2 * h), 1e-8);
    EXPECT_NEAR(d.d_cos_e, (*lunar_lambert(ci, ce + h, al) - *lunar_lambert(ci, ce - h, al)) / (2 * h), 1e-8);
  }
}

TEST(Render, FlatDemIsConstant) {
  IlluminationGeometry g;
  g.sun_incidence = 35.0;
  g.view_zenith = 10.0;
  g.view_azimuth = 120.0;
  const RasterGrid img = render(RasterGrid(6, 6, 1.0, 0, 0, kDefaultNodata, 4.0), g, Albedo(0.6));
  const double expect = lunarsfs::test::lunar_lambert_oracle(0.6, 35.0, 10.0);
  for (double v : img.values()) EXPECT_NEAR(v, expect, 1e-14);
}

TEST(Render, SunFacingWallIsBrighter) {
  TerrainSpec spec;
  spec.size = 96;
  spec.features.push_back(Crater{{48, 48}, 40, 10, 0});
  const RasterGrid dem = generate_dem(spec);
  IlluminationGeometry g;
  g.sun_incidence = 70.0;
  g.sun_azimuth = 90.0;  // sun in the east lights the western inner wall
  const RasterGrid img = render(dem, g, Albedo(1.0));
  double west = 0.0, east = 0.0;
  std::size_t nw = 0, ne = 0;
  for (std::size_t r = 38; r < 58; ++r) {
    for (std::size_t c = 14; c < 34; ++c) west += img(r, c), ++nw;
    for (std::size_t c = 62; c < 82; ++c) east += img(r, c), ++ne;
  }
  EXPECT_GT(west / nw, east / ne);
}

TEST(Render, GainBiasIsAffine) {
  const RasterGrid dem = make_grid(8, 8, 1.0, [](double x, double y) { return 0.1 * x * y; });
  IlluminationGeometry g;
  g.sun_incidence = 50.0;
  const RasterGrid base = render(dem, g, Albedo(0.8));
  const RasterGrid scaled = render(dem, g, Albedo(0.8), 2.0, 0.1);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(scaled.values()[i], 2.0 * base.values()[i] + 0.1, 1e-14);
}

TEST(Render, NodataPropagates) {
  RasterGrid dem(5, 5, 1.0);
  dem.set_nodata(2, 2);
  IlluminationGeometry g;
  const RasterGrid img = render(dem, g, Albedo(1.0));
  EXPECT_FALSE(img.valid(2, 2));
  EXPECT_TRUE(img.valid(2, 1));
}

TEST(Hillshade, FlatIsUniformAndInRange) {
  const RasterGrid hs = hillshade(RasterGrid(5, 5, 1.0));
  for (double v : hs.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_NEAR(v, hs(0, 0), 1e-15);
  }
}
