#pragma once

// Fixtures and independent oracles shared by the test binaries.

#include <lunarsfs/lunarsfs.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <unistd.h>

namespace lunarsfs::test {

// Scratch directory unique to this process, removed by the destructor.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("lunarsfs_" + tag + "_" + std::to_string(static_cast<long>(::getpid())));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Reflectance evaluated straight from the angle definitions.
inline double lunar_lambert_oracle(double albedo, double incidence_deg, double emission_deg) {
  const double ci = std::cos(incidence_deg * M_PI / 180.0);
  const double ce = std::cos(emission_deg * M_PI / 180.0);
  return albedo * (2.0 * ci / (ci + ce) + (1.0 - albedo) * ci);
}

inline RasterGrid make_grid(std::size_t rows, std::size_t cols, double cell,
                            const std::function<double(double, double)>& f) {
  RasterGrid g(rows, cols, cell);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const WorldPoint w = g.world_of(r, c);
      g(r, c) = f(w.x, w.y);
    }
  return g;
}

inline RasterGrid random_grid(std::size_t rows, std::size_t cols, double lo, double hi, std::mt19937_64& rng,
                              double cell = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  RasterGrid g(rows, cols, cell);
  for (double& v : g.values()) v = u(rng);
  return g;
}

// Smooth random terrain whose slopes stay below `max_slope` (rise over run).
inline RasterGrid random_terrain(std::size_t n, double max_slope, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RasterGrid g(n, n, 1.0);
  for (double& v : g.values()) v = u(rng);
  g = gaussian_smooth(g, 2.0);
  const NormalField nf = compute_gradients(g);
  double peak = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    peak = std::max(peak, std::hypot(nf.p.values()[i], nf.q.values()[i]));
  const double k = peak > 0.0 ? max_slope / peak : 1.0;
  for (double& v : g.values()) v *= k;
  return g;
}

inline double rms(const RasterGrid& a, const RasterGrid& b,
                  const std::function<bool(std::size_t, std::size_t)>& keep = {}) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) {
      if (keep && !keep(r, c)) continue;
      const double d = a(r, c) - b(r, c);
      s += d * d;
      ++n;
    }
  return std::sqrt(s / static_cast<double>(n));
}

inline double max_abs_diff(const RasterGrid& a, const RasterGrid& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

inline double relief(const RasterGrid& g) {
  const auto [lo, hi] = std::minmax_element(g.values().begin(), g.values().end());
  return *hi - *lo;
}

// Closed-loop crater problem: 128 x 128 grid at 1 m, a 10 m deep bowl, the
// initial DEM the truth smoothed with a 4 px Gaussian, and the image rendered
// from the truth under a 70 degree sun with a known gain.
struct CraterFixture {
  RasterGrid truth;
  RasterGrid z0;
  RasterGrid image;
  ValidMask footprint;
  IlluminationGeometry geom;
  SfsConfig cfg;  // W = 50, C = 1e-3, N = 200, radiometry known
};

inline constexpr double kFixtureGain = 12.0;

inline CraterFixture crater_fixture() {
  TerrainSpec spec;
  spec.size = 128;
  spec.cell_size = 1.0;
  spec.features.push_back(Crater{{64.0, 64.0}, 56.0, 10.0, 0.0});
  CraterFixture f;
  f.truth = generate_dem(spec);
  f.z0 = gaussian_smooth(f.truth, 4.0);
  f.geom.sun_incidence = 70.0;
  f.geom.sun_azimuth = 45.0;
  f.image = render(f.truth, f.geom, Albedo(1.0), kFixtureGain, 0.0);
  f.footprint = ValidMask(f.image);
  f.cfg.smoothness_weight = 50.0;
  f.cfg.prior_weight = 1e-3;
  f.cfg.max_iterations = 200;
  f.cfg.fit_radiometry = false;
  f.cfg.fixed_gain = kFixtureGain;
  return f;
}

// The same scene seen by a camera shifted half an image width: only the
// western half of the DEM maps into the image.
struct HalfCoverage {
  RasterGrid image;  // camera space
  AffineCamera camera;
  MapProjection mp;
};

inline HalfCoverage half_coverage(const CraterFixture& f) {
  const RasterGrid full = render(f.truth, f.geom, Albedo(1.0), kFixtureGain, 0.0);
  const std::size_t shift = f.truth.cols() / 2;
  RasterGrid img = RasterGrid::like(full, 0.0);
  for (std::size_t r = 0; r < img.rows(); ++r)
    for (std::size_t c = shift; c < img.cols(); ++c) img(r, c) = full(r, c - shift);
  auto p = AffineCamera::nadir_for(f.z0).matrix();
  p[3] += static_cast<double>(shift);
  AffineCamera cam(p);
  MapProjection mp = mapproject(img, cam, f.z0);
  return {std::move(img), cam, std::move(mp)};
}

}  // namespace lunarsfs::test
