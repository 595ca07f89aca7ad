#pragma once

// Evaluation of SfS outputs: slope statistics, difference maps, photometric
// residual and transects.

#include <lunarsfs/error.hpp>
#include <lunarsfs/photometry.hpp>
#include <lunarsfs/raster.hpp>
#include <lunarsfs/sfs_solver.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace lunarsfs {

struct SlopeStats {
  double sigma_s = 0.0;     // degrees, population standard deviation
  double mean_slope = 0.0;  // degrees
  std::size_t n_pixels = 0;
};

/// Slope angle statistics over pixels whose gradient comes from central
/// differences on both axes, optionally restricted to `mask`.
inline SlopeStats slope_stddev(const RasterGrid& dem, const ValidMask* mask = nullptr) {
  if (mask && !mask->matches(dem)) throw InputError("slope_stddev: mask size does not match the DEM");
  const NormalField nf = compute_gradients(dem);
  // Two passes for a numerically stable variance.
  std::vector<double> slopes;
  for (std::size_t r = 0; r < dem.rows(); ++r)
    for (std::size_t c = 0; c < dem.cols(); ++c)
      if (nf.central(r, c) && (!mask || (*mask)(r, c)))
        slopes.push_back(rad2deg(std::atan(std::hypot(nf.p(r, c), nf.q(r, c)))));
  if (slopes.size() < 2) throw InputError("slope_stddev: fewer than 2 pixels with a full gradient stencil");
  double mean = 0.0;
  for (double s : slopes) mean += s;
  mean /= static_cast<double>(slopes.size());
  double var = 0.0;
  for (double s : slopes) var += (s - mean) * (s - mean);
  var /= static_cast<double>(slopes.size());
  return {std::sqrt(var), mean, slopes.size()};
}

inline SlopeStats slope_stddev(const RasterGrid& dem, const ValidMask& mask) { return slope_stddev(dem, &mask); }

/// 100 * (sigma_s(z_sfs) - sigma_s(z0)) / sigma_s(z0).
inline double delta_sigma_pct(const RasterGrid& z_sfs, const RasterGrid& z0, const ValidMask* mask = nullptr) {
  const double s0 = slope_stddev(z0, mask).sigma_s;
  if (!(s0 > 0.0)) throw NumericalError("slope spread of the initial DEM is zero");
  return 100.0 * (slope_stddev(z_sfs, mask).sigma_s - s0) / s0;
}

struct DifferenceSummary {
  double mean = 0.0;
  double rms = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

struct HeightDifference {
  RasterGrid dz;
  DifferenceSummary summary;
};

inline DifferenceSummary summarize(const RasterGrid& g, const ValidMask* mask = nullptr) {
  DifferenceSummary s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0, sq = 0.0;
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (!g.valid(r, c) || (mask && !(*mask)(r, c))) continue;
      const double v = g(r, c);
      sum += v;
      sq += v * v;
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
      ++s.count;
    }
  }
  if (s.count == 0) return {};
  s.mean = sum / static_cast<double>(s.count);
  s.rms = std::sqrt(sq / static_cast<double>(s.count));
  return s;
}

/// dz = z_sfs - z0, nodata where either input is nodata.
inline HeightDifference height_difference(const RasterGrid& z_sfs, const RasterGrid& z0) {
  require_same_geometry(z_sfs, z0, "height_difference");
  RasterGrid dz = RasterGrid::like(z_sfs, z_sfs.nodata_value());
  for (std::size_t r = 0; r < dz.rows(); ++r)
    for (std::size_t c = 0; c < dz.cols(); ++c)
      if (z_sfs.valid(r, c) && z0.valid(r, c)) dz(r, c) = z_sfs(r, c) - z0(r, c);
  DifferenceSummary s = summarize(dz);
  return {std::move(dz), s};
}

/// Median of |v| over valid pixels inside (or outside) the mask.
inline std::optional<double> median_abs(const RasterGrid& g, const ValidMask& mask, bool inside) {
  std::vector<double> v;
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c)
      if (g.valid(r, c) && mask(r, c) == inside) v.push_back(std::abs(g(r, c)));
  if (v.empty()) return std::nullopt;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

/// Mean squared image residual over the data pixels; equals the energy's data
/// term divided by (pixel count * cell area).
inline double photometric_residual(const RasterGrid& z, const RasterGrid& image, const ValidMask& footprint,
                                   const IlluminationGeometry& geom, double albedo, double gain = 1.0,
                                   double bias = 0.0) {
  if (footprint.count() == 0) throw InputError("photometric_residual: empty footprint");
  SfsConfig cfg;
  cfg.albedo = albedo;
  cfg.smoothness_weight = 0.0;
  cfg.prior_weight = 0.0;
  const detail::SfsProblem prob(z, image, footprint, geom, cfg);
  const std::vector<double> u(z.size(), 0.0);
  const std::size_t n = prob.data_mask(u).count();
  if (n == 0) throw InputError("photometric_residual: no footprint pixel has a defined reflectance");
  const EnergyBreakdown e = prob.energy(u, {gain, bias});
  return e.data_term / (static_cast<double>(n) * z.cell_area());
}

/// Roughness ratio RMS(L z_sfs) / RMS(L z0) over interior pixels.
inline double roughness_ratio(const RasterGrid& z_sfs, const RasterGrid& z0) {
  require_same_geometry(z_sfs, z0, "roughness_ratio");
  auto lap_rms = [](const RasterGrid& z) {
    double s = 0.0;
    std::size_t n = 0;
    const double k = 1.0 / (z.cell_size() * z.cell_size());
    for (std::size_t r = 1; r + 1 < z.rows(); ++r) {
      for (std::size_t c = 1; c + 1 < z.cols(); ++c) {
        if (!z.valid(r, c) || !z.valid(r - 1, c) || !z.valid(r + 1, c) || !z.valid(r, c - 1) || !z.valid(r, c + 1))
          continue;
        const double l = (z(r - 1, c) + z(r + 1, c) + z(r, c - 1) + z(r, c + 1) - 4.0 * z(r, c)) * k;
        s += l * l;
        ++n;
      }
    }
    return n ? std::sqrt(s / static_cast<double>(n)) : 0.0;
  };
  const double a = lap_rms(z_sfs), b = lap_rms(z0);
  if (b == 0.0) return a == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return a / b;
}

// ---------------------------------------------------------------------------
// Transects

struct Transect {
  WorldPoint start;
  WorldPoint end;
  double spacing = 1.0;
  std::vector<double> distance;                          // meters from start
  std::vector<std::vector<std::optional<double>>> samples;  // [raster][station]

  void write_csv(std::ostream& out, const std::vector<std::string>& names = {}) const {
    out << "distance_m";
    for (std::size_t k = 0; k < samples.size(); ++k)
      out << ',' << (k < names.size() ? names[k] : "z" + std::to_string(k));
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < distance.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.10g", distance[i]);
      out << buf;
      for (const auto& col : samples) {
        out << ',';
        if (col[i]) {
          std::snprintf(buf, sizeof buf, "%.10g", *col[i]);
          out << buf;
        }
      }
      out << '\n';
    }
  }
};

/// Bilinear samples of every raster at stations start + k * spacing along the
/// segment, up to and including the segment length.
inline Transect extract_profile(const std::vector<const RasterGrid*>& rasters, WorldPoint start, WorldPoint end,
                                double spacing) {
  const double len = std::hypot(end.x - start.x, end.y - start.y);
  if (!(len > 0.0)) throw InputError("extract_profile: zero-length segment");
  if (!(spacing > 0.0)) throw InputError("extract_profile: spacing must be positive");
  if (rasters.empty()) throw InputError("extract_profile: no rasters");
  Transect t{start, end, spacing, {}, std::vector<std::vector<std::optional<double>>>(rasters.size())};
  auto n = static_cast<std::size_t>(std::floor(len / spacing * (1.0 + 1e-12))) + 1;
  while (n > 1 && static_cast<double>(n - 1) * spacing > len) --n;
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) * spacing;
    const double f = d / len;
    const double x = start.x + f * (end.x - start.x), y = start.y + f * (end.y - start.y);
    t.distance.push_back(d);
    for (std::size_t k = 0; k < rasters.size(); ++k) {
      auto v = bilinear_sample(*rasters[k], x, y);
      any = any || v.has_value();
      t.samples[k].push_back(v);
    }
  }
  if (!any) throw InputError("extract_profile: segment does not intersect any raster");
  return t;
}

}  // namespace lunarsfs
