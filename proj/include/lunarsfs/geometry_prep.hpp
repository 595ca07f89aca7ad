#pragma once

// DEM preparation ahead of SfS: mapprojection of the shading image through an
// affine camera, vertical alignment, priority blending, harmonic gap infill
// and acquisition-geometry diagnostics.

#include <lunarsfs/error.hpp>
#include <lunarsfs/photometry.hpp>
#include <lunarsfs/raster.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace lunarsfs {

/// 2x4 affine projection (x, y, z, 1) -> (u, v), where u is the image column
/// and v the image row in pixel-center coordinates.
class AffineCamera {
 public:
  explicit AffineCamera(const std::array<double, 8>& p) : p_(p) {
    // Rank of the left 2x3 block: at least one non-zero 2x2 minor.
    const double m01 = p_[0] * p_[5] - p_[1] * p_[4];
    const double m02 = p_[0] * p_[6] - p_[2] * p_[4];
    const double m12 = p_[1] * p_[6] - p_[2] * p_[5];
    double scale = 0.0;
    for (int i : {0, 1, 2, 4, 5, 6}) scale = std::max(scale, std::abs(p_[static_cast<std::size_t>(i)]));
    const double tol = 1e-12 * scale * scale;
    if (!std::isfinite(scale) || (std::abs(m01) <= tol && std::abs(m02) <= tol && std::abs(m12) <= tol))
      throw InputError("degenerate camera: projection block has rank < 2");
  }

  /// Camera mapping each pixel center of `grid` to the same (row, col) of an
  /// image with identical layout, ignoring height.
  static AffineCamera nadir_for(const RasterGrid& grid) {
    const double s = grid.cell_size();
    return AffineCamera({1.0 / s, 0.0, 0.0, -grid.origin_x() / s - 0.5,  //
                         0.0, -1.0 / s, 0.0, static_cast<double>(grid.rows()) - 0.5 + grid.origin_y() / s});
  }

  PixelPoint project(double x, double y, double z) const {
    return {p_[4] * x + p_[5] * y + p_[6] * z + p_[7], p_[0] * x + p_[1] * y + p_[2] * z + p_[3]};
  }

  const std::array<double, 8>& matrix() const { return p_; }

 private:
  std::array<double, 8> p_;
};

/// Eight whitespace-separated floats, row-major.
inline AffineCamera read_camera(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open camera file '" + path.string() + "'");
  std::array<double, 8> p{};
  std::string line;
  std::size_t n = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (auto tok : detail::split_ws(line)) {
      if (n == 8) throw ParseError("camera file has more than 8 values", lineno);
      p[n++] = detail::parse_number(tok, lineno);
    }
  }
  if (n != 8) throw ParseError("camera file needs exactly 8 values, found " + std::to_string(n), lineno);
  return AffineCamera(p);
}

inline void write_camera(const AffineCamera& cam, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  char buf[40];
  const auto& p = cam.matrix();
  for (std::size_t i = 0; i < 8; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", p[i]);
    out << buf << (i == 3 || i == 7 ? "\n" : " ");
  }
}

// ---------------------------------------------------------------------------
// Mapprojection

struct MapProjection {
  RasterGrid image;    // on the DEM grid
  ValidMask footprint;
  double footprint_fraction = 0.0;  // of valid DEM pixels
};

inline MapProjection mapproject(const RasterGrid& image, const AffineCamera& camera, const RasterGrid& dem) {
  MapProjection out{RasterGrid::like(dem, dem.nodata_value()), ValidMask(dem.rows(), dem.cols()), 0.0};
  std::size_t dem_valid = 0, hits = 0;
  for (std::size_t r = 0; r < dem.rows(); ++r) {
    for (std::size_t c = 0; c < dem.cols(); ++c) {
      if (!dem.valid(r, c)) continue;
      ++dem_valid;
      const WorldPoint w = dem.world_of(r, c);
      const PixelPoint px = camera.project(w.x, w.y, dem(r, c));
      if (auto v = sample_pixel(image, px.row, px.col)) {
        out.image(r, c) = *v;
        out.footprint.set(r, c, true);
        ++hits;
      }
    }
  }
  if (dem_valid == 0) throw InputError("mapproject: DEM has no valid samples");
  out.footprint_fraction = static_cast<double>(hits) / static_cast<double>(dem_valid);
  return out;
}

// ---------------------------------------------------------------------------
// Vertical alignment

struct VerticalAlignment {
  double offset = 0.0;  // added to z0
  RasterGrid aligned;
  double rms_after = 0.0;
  std::size_t overlap = 0;
};

/// Closed-form minimizer of the mean squared vertical misfit over the valid
/// overlap: the mean of (z_ref - z0).
inline VerticalAlignment vertical_align(const RasterGrid& z0, const RasterGrid& z_ref) {
  require_same_geometry(z0, z_ref, "vertical_align");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < z0.rows(); ++r) {
    for (std::size_t c = 0; c < z0.cols(); ++c) {
      if (!z0.valid(r, c) || !z_ref.valid(r, c)) continue;
      sum += z_ref(r, c) - z0(r, c);
      ++n;
    }
  }
  if (n == 0) throw InputError("vertical_align: grids have no valid overlap");
  VerticalAlignment out{sum / static_cast<double>(n), z0, 0.0, n};
  for (double& v : out.aligned.values())
    if (!out.aligned.is_nodata(v)) v += out.offset;
  double ss = 0.0;
  for (std::size_t r = 0; r < z0.rows(); ++r) {
    for (std::size_t c = 0; c < z0.cols(); ++c) {
      if (!z0.valid(r, c) || !z_ref.valid(r, c)) continue;
      const double d = out.aligned(r, c) - z_ref(r, c);
      ss += d * d;
    }
  }
  out.rms_after = std::sqrt(ss / static_cast<double>(n));
  return out;
}

// ---------------------------------------------------------------------------
// Blending and infill

/// Primary where valid, else secondary where valid, else nodata.
inline RasterGrid priority_blend(const RasterGrid& primary, const RasterGrid& secondary) {
  require_same_geometry(primary, secondary, "priority_blend");
  RasterGrid out = primary;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c)
      if (!primary.valid(r, c)) out(r, c) = secondary.valid(r, c) ? secondary(r, c) : out.nodata_value();
  return out;
}

struct InfillOptions {
  double tolerance = 1e-4;  // meters
  std::size_t max_iters = 10000;
};

struct InfillResult {
  RasterGrid dem;
  std::size_t iterations = 0;
  double max_residual = 0.0;  // largest |z - mean of 4-neighbours| over filled pixels
};

/// Discrete harmonic fill of nodata regions with the valid samples as fixed
/// boundary values (grid edges act as reflecting boundaries). Solved by
/// conjugate gradients; stops once the last update and the mean-value
/// residual both fall below a fraction of `tolerance`, or at `max_iters`.
inline InfillResult infill_gaps(const RasterGrid& dem, const InfillOptions& opt = {}) {
  const std::size_t rows = dem.rows(), cols = dem.cols();
  std::vector<long long> unknown(dem.size(), -1);
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < dem.size(); ++i) {
    if (dem.is_nodata(dem.values()[i])) {
      unknown[i] = static_cast<long long>(cells.size());
      cells.push_back(i);
    }
  }
  InfillResult out{dem, 0, 0.0};
  if (cells.empty()) return out;
  if (cells.size() == dem.size()) throw InputError("infill: grid has no valid samples");

  auto neighbours = [&](std::size_t i, auto&& fn) {
    const std::size_t r = i / cols, c = i % cols;
    if (r > 0) fn(i - cols);
    if (r + 1 < rows) fn(i + cols);
    if (c > 0) fn(i - 1);
    if (c + 1 < cols) fn(i + 1);
  };

  // Every gap component must touch at least one valid sample.
  {
    std::vector<char> seen(cells.size(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (seen[k]) continue;
      bool anchored = false;
      double anchor_sum = 0.0;
      std::size_t anchor_n = 0;
      std::vector<std::size_t> component;
      stack.push_back(k);
      seen[k] = 1;
      while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        component.push_back(u);
        neighbours(cells[u], [&](std::size_t j) {
          if (unknown[j] < 0) {
            anchored = true;
            anchor_sum += dem.values()[j];
            ++anchor_n;
          } else if (!seen[static_cast<std::size_t>(unknown[j])]) {
            seen[static_cast<std::size_t>(unknown[j])] = 1;
            stack.push_back(static_cast<std::size_t>(unknown[j]));
          }
        });
      }
      if (!anchored) throw InputError("infill: gap component has no valid neighbour");
      // Start from the mean of the component's boundary values.
      for (std::size_t u : component) out.dem.values()[cells[u]] = anchor_sum / static_cast<double>(anchor_n);
    }
  }

  // Operator on the unknowns: (A x)_i = deg_i * x_i - sum of unknown neighbours.
  // Right-hand side: sum of known neighbours.
  const std::size_t n = cells.size();
  std::vector<double> x(n), b(n, 0.0), deg(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = out.dem.values()[cells[k]];
    neighbours(cells[k], [&](std::size_t j) {
      deg[k] += 1.0;
      if (unknown[j] < 0) b[k] += dem.values()[j];
    });
  }
  auto apply = [&](const std::vector<double>& v, std::vector<double>& av) {
    for (std::size_t k = 0; k < n; ++k) {
      double s = deg[k] * v[k];
      neighbours(cells[k], [&](std::size_t j) {
        if (unknown[j] >= 0) s -= v[static_cast<std::size_t>(unknown[j])];
      });
      av[k] = s;
    }
  };
  // Residual in mean-value form: (b - A x) / deg = mean(neighbours) - x.
  auto mean_value_residual = [&](const std::vector<double>& res) {
    double m = 0.0;
    for (std::size_t k = 0; k < n; ++k) m = std::max(m, std::abs(res[k]) / deg[k]);
    return m;
  };

  // Jacobi-preconditioned CG on the SPD system A x = b.
  std::vector<double> res(n), z(n), p(n), ap(n);
  apply(x, ap);
  for (std::size_t k = 0; k < n; ++k) res[k] = b[k] - ap[k];
  for (std::size_t k = 0; k < n; ++k) z[k] = res[k] / deg[k];
  p = z;
  double rz = 0.0;
  for (std::size_t k = 0; k < n; ++k) rz += res[k] * z[k];
  const double stop = 0.01 * opt.tolerance;
  std::size_t it = 0;
  double last_change = std::numeric_limits<double>::infinity();
  while (it < opt.max_iters && !(last_change < stop && mean_value_residual(res) < stop)) {
    if (rz == 0.0) break;
    apply(p, ap);
    double pap = 0.0;
    for (std::size_t k = 0; k < n; ++k) pap += p[k] * ap[k];
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    last_change = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] += alpha * p[k];
      res[k] -= alpha * ap[k];
      last_change = std::max(last_change, std::abs(alpha * p[k]));
    }
    double rz_new = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      z[k] = res[k] / deg[k];
      rz_new += res[k] * z[k];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    ++it;
  }
  for (std::size_t k = 0; k < n; ++k) out.dem.values()[cells[k]] = x[k];
  out.iterations = it;

  // Report the true mean-value residual of the written result.
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    neighbours(cells[k], [&](std::size_t j) { s += out.dem.values()[j]; });
    worst = std::max(worst, std::abs(s / deg[k] - x[k]));
  }
  out.max_residual = worst;
  return out;
}

// ---------------------------------------------------------------------------
// Acquisition geometry

enum class Verdict { Suitable, Marginal, Unsuitable };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Suitable:
      return "suitable";
    case Verdict::Marginal:
      return "marginal";
    case Verdict::Unsuitable:
      return "unsuitable";
  }
  return "unknown";
}

struct SuitabilityThresholds {
  double suitable_max_pitch = 15.0;     // degrees
  double unsuitable_min_pitch = 25.0;   // degrees
  double suitable_min_footprint = 0.9;
  double unsuitable_max_footprint = 0.5;  // footprint below this is unsuitable
};

struct GeometrySuitability {
  double delta_incidence = 0.0;  // degrees
  double delta_pitch = 0.0;      // degrees
  double footprint_fraction = 0.0;
  Verdict verdict = Verdict::Marginal;
};

/// Separation of the shading acquisition from the mean stereo geometry.
inline GeometrySuitability geometry_diagnostics(const IlluminationGeometry& stereo1,
                                                const IlluminationGeometry& stereo2,
                                                const IlluminationGeometry& shading, double footprint_fraction,
                                                const SuitabilityThresholds& th = {}) {
  GeometrySuitability out;
  out.delta_incidence = std::abs(shading.sun_incidence - 0.5 * (stereo1.sun_incidence + stereo2.sun_incidence));
  out.delta_pitch = std::abs(shading.pitch - 0.5 * (stereo1.pitch + stereo2.pitch));
  out.footprint_fraction = footprint_fraction;
  if (out.delta_pitch >= th.unsuitable_min_pitch || footprint_fraction < th.unsuitable_max_footprint)
    out.verdict = Verdict::Unsuitable;
  else if (out.delta_pitch <= th.suitable_max_pitch && footprint_fraction >= th.suitable_min_footprint)
    out.verdict = Verdict::Suitable;
  else
    out.verdict = Verdict::Marginal;
  return out;
}

// Geometry config files use the same key = value grammar as terrain specs:
//   incidence, azimuth, view_zenith, view_azimuth, pitch (degrees).
inline IlluminationGeometry parse_geometry(std::istream& in) {
  IlluminationGeometry g;
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
    auto vals = detail::split_ws(std::string_view(line).substr(eq + 1));
    if (vals.size() != 1) throw ParseError("expected a single value", lineno);
    const double v = detail::parse_number(vals[0], lineno);
    const std::string key = detail::lower(head[0]);
    if (key == "incidence" || key == "sun_incidence")
      g.sun_incidence = v;
    else if (key == "azimuth" || key == "sun_azimuth")
      g.sun_azimuth = v;
    else if (key == "view_zenith")
      g.view_zenith = v;
    else if (key == "view_azimuth")
      g.view_azimuth = v;
    else if (key == "pitch")
      g.pitch = v;
    else
      throw ParseError("unknown key '" + key + "'", lineno);
  }
  return g;
}

inline IlluminationGeometry read_geometry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open geometry file '" + path.string() + "'");
  try {
    return parse_geometry(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.message(), e.line());
  }
}

}  // namespace lunarsfs
