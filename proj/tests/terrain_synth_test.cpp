#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace lunarsfs;

TEST(GenerateDem, EmptySpecIsZeroPlane) {
  TerrainSpec spec;
  spec.size = 16;
  const RasterGrid g = generate_dem(spec);
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(GenerateDem, CraterFloorReachesDepth) {
  TerrainSpec spec;
  spec.size = 65;
  spec.features.push_back(Crater{{32.5, 32.5}, 20.0, 10.0, 1.5});
  const RasterGrid g = generate_dem(spec);
  const double lo = *std::min_element(g.values().begin(), g.values().end());
  EXPECT_NEAR(lo, -10.0, 1e-9);
  EXPECT_NEAR(g(32, 32), -10.0, 1e-9);
  // The rim crest sits on the bowl edge.
  EXPECT_NEAR(g(32, 52), 1.5, 0.05);
}

TEST(GenerateDem, MesaAndHillShapes) {
  TerrainSpec spec;
  spec.size = 64;
  spec.features.push_back(Mesa{{20.5, 20.5}, 8.0, 5.0, 1.0});
  spec.features.push_back(GaussianHill{{48.5, 48.5}, 3.0, 2.0});
  const RasterGrid g = generate_dem(spec);
  const std::size_t mr = 64 - 1 - 20, hr = 64 - 1 - 48;
  EXPECT_NEAR(g(mr, 20), 5.0, 1e-6);
  EXPECT_NEAR(g(hr, 48), 2.0, 1e-12);
  EXPECT_NEAR(g(hr, 51), 2.0 * std::exp(-0.5), 1e-12);
  EXPECT_NEAR(g(0, 63), 0.0, 1e-6);
}

TEST(GenerateDem, DeterministicPerSeed) {
  TerrainSpec spec;
  spec.size = 40;
  spec.noise_amplitude = 0.5;
  spec.seed = 42;
  spec.features.push_back(Crater{{20, 20}, 10, 3, 0.5});
  const RasterGrid a = generate_dem(spec), b = generate_dem(spec);
  EXPECT_TRUE(a == b);
  spec.seed = 43;
  EXPECT_FALSE(a == generate_dem(spec));
  EXPECT_EQ(a.count_valid(), a.size());
}

TEST(GenerateDem, NoiseHasRequestedRms) {
  TerrainSpec spec;
  spec.size = 64;
  spec.noise_amplitude = 0.25;
  spec.seed = 9;
  const RasterGrid g = generate_dem(spec);
  double ss = 0.0, mean = 0.0;
  for (double v : g.values()) mean += v;
  mean /= static_cast<double>(g.size());
  for (double v : g.values()) ss += (v - mean) * (v - mean);
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(g.size())), 0.25, 1e-12);
}

TEST(GenerateDem, RejectsFeatureOutsideGrid) {
  TerrainSpec spec;
  spec.size = 32;
  spec.features.push_back(Crater{{40.0, 10.0}, 5.0, 1.0, 0.0});
  EXPECT_THROW((void)generate_dem(spec), InputError);
}

TEST(DegradeDem, IdentityWhenNothingRequested) {
  TerrainSpec spec;
  spec.size = 32;
  spec.noise_amplitude = 1.0;
  const RasterGrid g = generate_dem(spec);
  EXPECT_TRUE(degrade_dem(g, 0.0, 0.0, 0.0, 1) == g);
}

TEST(DegradeDem, OffsetOnly) {
  TerrainSpec spec;
  spec.size = 32;
  spec.noise_amplitude = 1.0;
  spec.seed = 2;
  const RasterGrid g = generate_dem(spec);
  const RasterGrid d = degrade_dem(g, 0.0, 5.0, 0.0, 1);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(d.values()[i], g.values()[i] + 5.0);
}

TEST(DegradeDem, GapFractionOnHundredGrid) {
  const RasterGrid g(100, 100, 1.0);
  const RasterGrid d = degrade_dem(g, 0.0, 0.0, 0.2, 77);
  const std::size_t gaps = d.size() - d.count_valid();
  EXPECT_GE(gaps, 1500u);
  EXPECT_LE(gaps, 2500u);
  EXPECT_TRUE(degrade_dem(g, 0.0, 0.0, 0.2, 77) == d);
}

TEST(DegradeDem, RejectsBadFraction) {
  const RasterGrid g(10, 10, 1.0);
  EXPECT_THROW((void)degrade_dem(g, 0.0, 0.0, 1.0, 1), InputError);
  EXPECT_THROW((void)degrade_dem(g, 0.0, 0.0, -0.1, 1), InputError);
}

TEST(GaussianSmooth, PreservesMean) {
  TerrainSpec spec;
  spec.size = 50;
  spec.features.push_back(Crater{{10, 12}, 9, 6, 1});
  spec.features.push_back(Mesa{{35, 30}, 8, 4, 1.5});
  const RasterGrid g = generate_dem(spec);
  for (double sigma : {0.5, 2.0, 4.0, 9.0}) {
    const RasterGrid s = gaussian_smooth(g, sigma);
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      a += g.values()[i];
      b += s.values()[i];
    }
    const double n = static_cast<double>(g.size());
    EXPECT_LE(std::abs(a / n - b / n), 1e-6 * lunarsfs::test::relief(g)) << "sigma " << sigma;
  }
}

TEST(GaussianSmooth, KeepsAffineInteriorAndConstants) {
  const RasterGrid c(20, 20, 1.0, 0.0, 0.0, kDefaultNodata, 3.0);
  const RasterGrid s = gaussian_smooth(c, 3.0);
  for (double v : s.values()) EXPECT_NEAR(v, 3.0, 1e-12);
  const RasterGrid ramp = lunarsfs::test::make_grid(40, 40, 1.0, [](double x, double y) { return 0.5 * x - y; });
  const RasterGrid sr = gaussian_smooth(ramp, 2.0);
  EXPECT_NEAR(sr(20, 20), ramp(20, 20), 1e-9);
}

TEST(TerrainSpecParser, ReadsAllKeys) {
  std::istringstream in(
      "# crater field\n"
      "size = 48\n"
      "cell_size = 2\n"
      "noise_amplitude = 0.1\n"
      "seed = 7\n"
      "crater = 30 30 12 4 1\n"
      "mesa = 60 60 10 3 2\n"
      "hill = 20 70 4 1.5\n");
  const TerrainSpec spec = parse_terrain_spec(in);
  EXPECT_EQ(spec.size, 48u);
  EXPECT_EQ(spec.cell_size, 2.0);
  EXPECT_EQ(spec.seed, 7u);
  ASSERT_EQ(spec.features.size(), 3u);
  EXPECT_EQ(std::get<Crater>(spec.features[0]).rim_height, 1.0);
  EXPECT_EQ(std::get<Mesa>(spec.features[1]).flank_width, 2.0);
  EXPECT_EQ(std::get<GaussianHill>(spec.features[2]).height, 1.5);
}

TEST(TerrainSpecParser, ErrorsCarryLine) {
  std::istringstream in("size = 48\ncrater = 1 2 3\n");
  try {
    (void)parse_terrain_spec(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream bad("size = 48\n\nvolcano = 1\n");
  try {
    (void)parse_terrain_spec(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}
