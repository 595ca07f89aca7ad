#pragma once

// Surface normals, illumination geometry and the Lunar-Lambertian reflectance
// model. Local frame is east-north-up; azimuths are clockwise from north.

#include <lunarsfs/error.hpp>
#include <lunarsfs/raster.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

namespace lunarsfs {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Unit vector pointing toward a source at the given zenith angle and
/// azimuth (degrees clockwise from north).
inline Vec3 direction_from_angles(double zenith_deg, double azimuth_deg) {
  const double t = deg2rad(zenith_deg), a = deg2rad(azimuth_deg);
  return {std::sin(t) * std::sin(a), std::sin(t) * std::cos(a), std::cos(t)};
}

struct IlluminationGeometry {
  double sun_incidence = 45.0;  // solar zenith angle over a flat surface, degrees
  double sun_azimuth = 315.0;
  double view_zenith = 0.0;
  double view_azimuth = 0.0;
  double pitch = 0.0;  // signed along-track tilt; metadata only

  Vec3 sun_dir() const { return direction_from_angles(sun_incidence, sun_azimuth); }
  Vec3 view_dir() const { return direction_from_angles(view_zenith, view_azimuth); }

  void check_renderable() const {
    if (!(sun_incidence >= 0.0 && sun_incidence < 90.0))
      throw InputError("sun incidence must lie in [0, 90) degrees");
    if (!(view_zenith >= 0.0 && view_zenith < 90.0))
      throw InputError("view zenith must lie in [0, 90) degrees");
  }
};

class Albedo {
 public:
  explicit Albedo(double a) : value_(a) {
    if (!(a > 0.0 && a <= 1.0)) throw InputError("albedo must lie in (0, 1]");
  }
  double value() const { return value_; }

 private:
  double value_;
};

// ---------------------------------------------------------------------------
// Finite differences

/// Two-point difference along one axis: d = (z[plus] - z[minus]) * inv_span.
struct Difference {
  std::size_t plus = 0;
  std::size_t minus = 0;
  double inv_span = 0.0;
  bool central = false;
};

enum class Axis { East, North };

/// Central where both neighbours are valid, one-sided at borders and next to
/// nodata, nullopt when the pixel itself or both neighbours are invalid.
template <typename ValidFn>
std::optional<Difference> axis_difference(std::size_t rows, std::size_t cols, double cell, std::size_t r,
                                          std::size_t c, Axis axis, ValidFn&& valid) {
  if (!valid(r, c)) return std::nullopt;
  const std::size_t self = r * cols + c;
  bool has_plus = false, has_minus = false;
  std::size_t plus = 0, minus = 0;
  if (axis == Axis::East) {
    if (c + 1 < cols && valid(r, c + 1)) {
      has_plus = true;
      plus = self + 1;
    }
    if (c > 0 && valid(r, c - 1)) {
      has_minus = true;
      minus = self - 1;
    }
  } else {
    // North is toward row 0.
    if (r > 0 && valid(r - 1, c)) {
      has_plus = true;
      plus = self - cols;
    }
    if (r + 1 < rows && valid(r + 1, c)) {
      has_minus = true;
      minus = self + cols;
    }
  }
  if (has_plus && has_minus) return Difference{plus, minus, 0.5 / cell, true};
  if (has_plus) return Difference{plus, self, 1.0 / cell, false};
  if (has_minus) return Difference{self, minus, 1.0 / cell, false};
  return std::nullopt;
}

/// Per-pixel p = dz/dx (east), q = dz/dy (north) and the derived unit normals.
struct NormalField {
  RasterGrid p;
  RasterGrid q;
  ValidMask valid;    // both derivatives defined
  ValidMask central;  // both derivatives from central differences

  Vec3 normal(std::size_t r, std::size_t c) const {
    const double pp = p(r, c), qq = q(r, c);
    const double m = std::sqrt(1.0 + pp * pp + qq * qq);
    return {-pp / m, -qq / m, 1.0 / m};
  }
};

inline NormalField compute_gradients(const RasterGrid& dem) {
  if (dem.count_valid() == 0) throw InputError("cannot differentiate an all-nodata grid");
  NormalField nf{RasterGrid::like(dem, dem.nodata_value()), RasterGrid::like(dem, dem.nodata_value()),
                 ValidMask(dem.rows(), dem.cols()), ValidMask(dem.rows(), dem.cols())};
  auto valid = [&](std::size_t r, std::size_t c) { return dem.valid(r, c); };
  const auto z = dem.values();
  for (std::size_t r = 0; r < dem.rows(); ++r) {
    for (std::size_t c = 0; c < dem.cols(); ++c) {
      const auto dx = axis_difference(dem.rows(), dem.cols(), dem.cell_size(), r, c, Axis::East, valid);
      const auto dy = axis_difference(dem.rows(), dem.cols(), dem.cell_size(), r, c, Axis::North, valid);
      if (!dx || !dy) continue;
      nf.p(r, c) = (z[dx->plus] - z[dx->minus]) * dx->inv_span;
      nf.q(r, c) = (z[dy->plus] - z[dy->minus]) * dy->inv_span;
      nf.valid.set(r, c, true);
      nf.central.set(r, c, dx->central && dy->central);
    }
  }
  return nf;
}

// ---------------------------------------------------------------------------
// Reflectance

struct CosineGrids {
  RasterGrid cos_i;  // clamped below at 0
  RasterGrid cos_e;
};

inline CosineGrids cos_angles(const NormalField& nf, const IlluminationGeometry& geom) {
  const Vec3 sun = geom.sun_dir(), view = geom.view_dir();
  CosineGrids out{RasterGrid::like(nf.p, nf.p.nodata_value()), RasterGrid::like(nf.p, nf.p.nodata_value())};
  for (std::size_t r = 0; r < nf.p.rows(); ++r) {
    for (std::size_t c = 0; c < nf.p.cols(); ++c) {
      if (!nf.valid(r, c)) continue;
      const Vec3 n = nf.normal(r, c);
      out.cos_i(r, c) = std::max(0.0, n.dot(sun));
      out.cos_e(r, c) = n.dot(view);
    }
  }
  return out;
}

/// R = A * [2 cos_i / (cos_i + cos_e) + (1 - A) cos_i]. Undefined (nullopt)
/// when the surface faces away from the viewer.
inline std::optional<double> lunar_lambert(double cos_i, double cos_e, Albedo albedo) {
  if (!(cos_e > 0.0)) return std::nullopt;
  if (cos_i <= 0.0) return 0.0;
  const double a = albedo.value();
  return a * (2.0 * cos_i / (cos_i + cos_e) + (1.0 - a) * cos_i);
}

struct ReflectancePartials {
  double value = 0.0;
  double d_cos_i = 0.0;
  double d_cos_e = 0.0;
};

/// Reflectance and its partial derivatives; requires cos_e > 0. At and below
/// the terminator the value and both partials are zero.
inline ReflectancePartials lunar_lambert_partials(double cos_i, double cos_e, double albedo) {
  if (cos_i <= 0.0) return {};
  const double s = cos_i + cos_e;
  const double a = albedo;
  return {a * (2.0 * cos_i / s + (1.0 - a) * cos_i), a * (2.0 * cos_e / (s * s) + (1.0 - a)),
          a * (-2.0 * cos_i / (s * s))};
}

/// Forward image model I = gain * R + bias with a single orthographic view
/// direction. Nodata wherever the normal or the reflectance is undefined.
inline RasterGrid render(const RasterGrid& dem, const IlluminationGeometry& geom, Albedo albedo,
                         double gain = 1.0, double bias = 0.0) {
  geom.check_renderable();
  const NormalField nf = compute_gradients(dem);
  const CosineGrids cg = cos_angles(nf, geom);
  RasterGrid img = RasterGrid::like(dem, dem.nodata_value());
  for (std::size_t r = 0; r < dem.rows(); ++r) {
    for (std::size_t c = 0; c < dem.cols(); ++c) {
      if (!nf.valid(r, c)) continue;
      if (auto refl = lunar_lambert(cg.cos_i(r, c), cg.cos_e(r, c), albedo))
        img(r, c) = gain * *refl + bias;
    }
  }
  return img;
}

/// Lambertian shaded relief in [0, 1]; undefined pixels are set to 0 so the
/// result can be written as an image directly.
inline RasterGrid hillshade(const RasterGrid& dem, double azimuth_deg = 315.0, double elevation_deg = 45.0) {
  const NormalField nf = compute_gradients(dem);
  const Vec3 sun = direction_from_angles(90.0 - elevation_deg, azimuth_deg);
  RasterGrid out = RasterGrid::like(dem, 0.0);
  for (std::size_t r = 0; r < dem.rows(); ++r)
    for (std::size_t c = 0; c < dem.cols(); ++c)
      if (nf.valid(r, c)) out(r, c) = std::max(0.0, nf.normal(r, c).dot(sun));
  return out;
}

}  // namespace lunarsfs
