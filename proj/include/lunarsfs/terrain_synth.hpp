#pragma once

// Synthetic ground-truth terrain and degraded "stereo-like" initial DEMs.

#include <lunarsfs/error.hpp>
#include <lunarsfs/raster.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace lunarsfs {

// Paraboloid bowl reaching -depth at the center and 0 at `radius`, plus a
// raised-cosine rim of half-width kRimWidthFraction * radius centered on the
// bowl edge.
struct Crater {
  WorldPoint center;
  double radius = 0.0;
  double depth = 0.0;
  double rim_height = 0.0;

  static constexpr double kRimWidthFraction = 0.25;
};

// Flat plateau with a tanh flank.
struct Mesa {
  WorldPoint center;
  double radius = 0.0;
  double height = 0.0;
  double flank_width = 1.0;
};

struct GaussianHill {
  WorldPoint center;
  double sigma = 1.0;
  double height = 0.0;
};

using TerrainFeature = std::variant<Crater, Mesa, GaussianHill>;

struct TerrainSpec {
  std::size_t size = 128;  // pixels per side
  double cell_size = 1.0;
  std::vector<TerrainFeature> features;
  double noise_amplitude = 0.0;  // RMS of the band-limited noise, meters
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Smoothing

namespace detail {

// Half-sample symmetric reflection into [0, n).
inline std::size_t reflect_index(long long i, std::size_t n) {
  const long long period = 2 * static_cast<long long>(n);
  long long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long long>(n) ? m : period - 1 - m);
}

inline std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<long long>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (long long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace detail

/// Separable Gaussian blur with symmetric-reflection boundaries. On gap-free
/// grids the operator conserves the sample sum; nodata samples are excluded
/// through normalized convolution and stay nodata.
inline RasterGrid gaussian_smooth(const RasterGrid& in, double sigma) {
  if (sigma < 0.0) throw InputError("smoothing sigma must be non-negative");
  if (sigma == 0.0) return in;
  const auto kernel = detail::gaussian_kernel(sigma);
  const auto radius = static_cast<long long>(kernel.size() / 2);
  const std::size_t rows = in.rows(), cols = in.cols();

  std::vector<double> val(in.size()), wt(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const bool ok = !in.is_nodata(in.values()[i]);
    val[i] = ok ? in.values()[i] : 0.0;
    wt[i] = ok ? 1.0 : 0.0;
  }
  auto pass = [&](std::vector<double>& v, std::vector<double>& w, bool along_cols) {
    std::vector<double> nv(v.size(), 0.0), nw(w.size(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        double sv = 0.0, sw = 0.0;
        for (long long k = -radius; k <= radius; ++k) {
          const double kw = kernel[static_cast<std::size_t>(k + radius)];
          const std::size_t idx =
              along_cols ? r * cols + detail::reflect_index(static_cast<long long>(c) + k, cols)
                         : detail::reflect_index(static_cast<long long>(r) + k, rows) * cols + c;
          sv += kw * v[idx];
          sw += kw * w[idx];
        }
        nv[r * cols + c] = sv;
        nw[r * cols + c] = sw;
      }
    }
    v.swap(nv);
    w.swap(nw);
  };
  pass(val, wt, true);
  pass(val, wt, false);

  const bool gap_free = !in.has_nodata();
  RasterGrid out = RasterGrid::like(in);
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in.is_nodata(in.values()[i]))
      out.values()[i] = in.nodata_value();
    else
      out.values()[i] = gap_free ? val[i] : val[i] / wt[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generation

namespace detail {

inline double feature_height(const Crater& f, double x, double y) {
  const double r = std::hypot(x - f.center.x, y - f.center.y);
  double z = 0.0;
  if (r < f.radius) {
    const double t = r / f.radius;
    z -= f.depth * (1.0 - t * t);
  }
  const double w = Crater::kRimWidthFraction * f.radius;
  const double d = std::abs(r - f.radius);
  if (w > 0.0 && d < w) z += f.rim_height * 0.5 * (1.0 + std::cos(std::numbers::pi * d / w));
  return z;
}

inline double feature_height(const Mesa& f, double x, double y) {
  const double r = std::hypot(x - f.center.x, y - f.center.y);
  return f.height * 0.5 * (1.0 - std::tanh((r - f.radius) / f.flank_width));
}

inline double feature_height(const GaussianHill& f, double x, double y) {
  const double dx = x - f.center.x, dy = y - f.center.y;
  return f.height * std::exp(-0.5 * (dx * dx + dy * dy) / (f.sigma * f.sigma));
}

inline void check_feature(const TerrainFeature& feat, double extent) {
  std::visit(
      [&](const auto& f) {
        if (!(f.center.x >= 0.0 && f.center.x <= extent && f.center.y >= 0.0 && f.center.y <= extent))
          throw InputError("terrain feature center lies outside the grid");
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Crater>) {
          if (f.radius < 0 || f.depth < 0 || f.rim_height < 0)
            throw InputError("crater radius, depth and rim height must be non-negative");
        } else if constexpr (std::is_same_v<T, Mesa>) {
          if (f.radius < 0 || f.height < 0 || !(f.flank_width > 0))
            throw InputError("mesa needs radius, height >= 0 and flank_width > 0");
        } else {
          if (f.height < 0 || !(f.sigma > 0)) throw InputError("hill needs height >= 0 and sigma > 0");
        }
      },
      feat);
}

}  // namespace detail

/// Deterministic DEM: features summed over a zero plane, plus seeded white
/// noise low-passed by a 2-pixel Gaussian and rescaled to `noise_amplitude` RMS.
inline RasterGrid generate_dem(const TerrainSpec& spec) {
  if (spec.size < 2) throw InputError("terrain size must be at least 2");
  if (!(spec.cell_size > 0)) throw InputError("terrain cell size must be positive");
  if (spec.noise_amplitude < 0) throw InputError("noise amplitude must be non-negative");
  const double extent = static_cast<double>(spec.size) * spec.cell_size;
  for (const auto& f : spec.features) detail::check_feature(f, extent);

  RasterGrid dem(spec.size, spec.size, spec.cell_size);
  for (std::size_t r = 0; r < dem.rows(); ++r) {
    for (std::size_t c = 0; c < dem.cols(); ++c) {
      const WorldPoint p = dem.world_of(r, c);
      double z = 0.0;
      for (const auto& f : spec.features)
        z += std::visit([&](const auto& ff) { return detail::feature_height(ff, p.x, p.y); }, f);
      dem(r, c) = z;
    }
  }
  if (spec.noise_amplitude > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    RasterGrid noise = RasterGrid::like(dem);
    for (double& v : noise.values()) v = gauss(rng);
    noise = gaussian_smooth(noise, 2.0);
    double mean = 0.0;
    for (double v : noise.values()) mean += v;
    mean /= static_cast<double>(noise.size());
    double ss = 0.0;
    for (double v : noise.values()) ss += (v - mean) * (v - mean);
    const double rms = std::sqrt(ss / static_cast<double>(noise.size()));
    const double scale = rms > 0 ? spec.noise_amplitude / rms : 0.0;
    for (std::size_t i = 0; i < dem.size(); ++i)
      dem.values()[i] += (noise.values()[i] - mean) * scale;
  }
  return dem;
}

/// Smoothed, offset copy of `dem` with seeded disk-shaped gaps (radius 2-6 px)
/// added until at least `gap_fraction` of the grid is nodata.
inline RasterGrid degrade_dem(const RasterGrid& dem, double smooth_sigma, double offset,
                              double gap_fraction, std::uint64_t seed) {
  if (!(gap_fraction >= 0.0 && gap_fraction < 1.0))
    throw InputError("gap fraction must be in [0, 1)");
  RasterGrid out = gaussian_smooth(dem, smooth_sigma);
  if (offset != 0.0) {
    for (double& v : out.values())
      if (!out.is_nodata(v)) v += offset;
  }
  const auto target = static_cast<std::size_t>(std::ceil(gap_fraction * static_cast<double>(out.size())));
  std::size_t holes = out.size() - out.count_valid();
  if (holes >= target) return out;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long long> pick_r(0, static_cast<long long>(out.rows()) - 1);
  std::uniform_int_distribution<long long> pick_c(0, static_cast<long long>(out.cols()) - 1);
  std::uniform_int_distribution<int> pick_radius(2, 6);
  while (holes < target) {
    const long long cr = pick_r(rng), cc = pick_c(rng);
    const int rad = pick_radius(rng);
    for (long long r = cr - rad; r <= cr + rad; ++r) {
      for (long long c = cc - rad; c <= cc + rad; ++c) {
        if (r < 0 || c < 0 || r >= static_cast<long long>(out.rows()) ||
            c >= static_cast<long long>(out.cols()))
          continue;
        if ((r - cr) * (r - cr) + (c - cc) * (c - cc) > rad * rad) continue;
        const auto rr = static_cast<std::size_t>(r), ccu = static_cast<std::size_t>(c);
        if (out.valid(rr, ccu)) {
          out.set_nodata(rr, ccu);
          ++holes;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config file
//
//   # comment
//   size = 128
//   cell_size = 1.0
//   noise_amplitude = 0.2
//   seed = 7
//   crater = <cx> <cy> <radius> <depth> <rim_height>
//   mesa = <cx> <cy> <radius> <height> <flank_width>
//   hill = <cx> <cy> <sigma> <height>
//
// Feature keys may repeat; coordinates are meters from the lower-left corner.

inline TerrainSpec parse_terrain_spec(std::istream& in) {
  TerrainSpec spec;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    const std::string lhs = line.substr(0, eq == std::string::npos ? line.size() : eq);
    auto head = detail::split_ws(lhs);
    if (head.empty()) continue;
    if (eq == std::string::npos || head.size() != 1) throw ParseError("expected 'key = value'", lineno);
    const std::string key = detail::lower(head[0]);
    const std::string rest = line.substr(eq + 1);
    std::vector<double> nums;
    for (auto tok : detail::split_ws(rest)) nums.push_back(detail::parse_number(tok, lineno));
    auto need = [&](std::size_t n) {
      if (nums.size() != n)
        throw ParseError("'" + key + "' expects " + std::to_string(n) + " value(s)", lineno);
    };
    if (key == "size") {
      need(1);
      if (nums[0] < 2 || nums[0] != std::floor(nums[0])) throw ParseError("size must be an integer >= 2", lineno);
      spec.size = static_cast<std::size_t>(nums[0]);
    } else if (key == "cell_size") {
      need(1);
      spec.cell_size = nums[0];
    } else if (key == "noise_amplitude") {
      need(1);
      spec.noise_amplitude = nums[0];
    } else if (key == "seed") {
      need(1);
      if (nums[0] < 0 || nums[0] != std::floor(nums[0])) throw ParseError("seed must be a non-negative integer", lineno);
      spec.seed = static_cast<std::uint64_t>(nums[0]);
    } else if (key == "crater") {
      need(5);
      spec.features.emplace_back(Crater{{nums[0], nums[1]}, nums[2], nums[3], nums[4]});
    } else if (key == "mesa") {
      need(5);
      spec.features.emplace_back(Mesa{{nums[0], nums[1]}, nums[2], nums[3], nums[4]});
    } else if (key == "hill") {
      need(4);
      spec.features.emplace_back(GaussianHill{{nums[0], nums[1]}, nums[2], nums[3]});
    } else {
      throw ParseError("unknown key '" + key + "'", lineno);
    }
  }
  return spec;
}

inline TerrainSpec read_terrain_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return parse_terrain_spec(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.message(), e.line());
  }
}

}  // namespace lunarsfs
