#pragma once

// Variational shape-from-shading.
//
//   E(z) = sum_{x in data set} (I - gain * R(n(z)) - bias)^2 * a
//        + W * sum_{interior x} (L u)^2 * a
//        + C * sum_{x} (z - z0)^2 * a
//
// with a the cell area, L the 5-point Laplacian scaled per square meter and
// u = z - z0 (default) or u = z. The data set is the footprint restricted to
// pixels where the reflectance is defined. Integrals become sums times cell
// area so W and C keep their meaning across resolutions.

#include <lunarsfs/error.hpp>
#include <lunarsfs/photometry.hpp>
#include <lunarsfs/raster.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace lunarsfs {

enum class SmoothnessTarget {
  Update,  // Laplacian of z - z0
  Height,  // Laplacian of z
};

enum class DescentDirection {
  GaussNewton,  // Gauss-Newton step from matrix-free PCG
  Steepest,
};

struct SfsConfig {
  double smoothness_weight = 50.0;  // W
  double prior_weight = 1e-3;       // C
  std::size_t max_iterations = 10;  // N
  double albedo = 1.0;              // A
  bool fit_radiometry = true;
  double fixed_gain = 1.0;  // used when fit_radiometry is off
  double fixed_bias = 0.0;

  // Line search and termination.
  double step_init = 2.0;  // largest trial displacement of any pixel, meters
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  double grad_tolerance = 1e-9;  // sup-norm of dE/dz
  double min_step = 1e-7;        // meters

  SmoothnessTarget smoothness_target = SmoothnessTarget::Update;
  DescentDirection direction = DescentDirection::GaussNewton;
  std::size_t cg_max_iterations = 150;
  double cg_relative_tolerance = 1e-3;

  void validate() const {
    if (!(smoothness_weight >= 0.0) || !(prior_weight >= 0.0))
      throw InputError("smoothness and prior weights must be non-negative");
    if (max_iterations < 1) throw InputError("max_iterations must be at least 1");
    (void)Albedo{albedo};
    if (!(step_init > 0.0)) throw InputError("step_init must be positive");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw InputError("armijo_c must lie in (0, 1)");
    if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) throw InputError("armijo_shrink must lie in (0, 1)");
    if (!(grad_tolerance >= 0.0) || !(min_step > 0.0))
      throw InputError("grad_tolerance must be >= 0 and min_step > 0");
  }
};

struct Radiometry {
  double gain = 1.0;
  double bias = 0.0;
};

struct EnergyBreakdown {
  double data_term = 0.0;
  double smooth_term = 0.0;
  double prior_term = 0.0;
  double total = 0.0;
  double gain = 1.0;
  double bias = 0.0;
};

struct SfsResult {
  RasterGrid z_sfs;
  std::size_t iterations_run = 0;
  std::vector<EnergyBreakdown> energy_trace;  // entry 0 is the initial state
  bool converged = false;
  ValidMask footprint;
  std::string stop_reason;
};

/// Ordinary least squares I ~ gain * R + bias over pixels valid in the mask
/// and in both grids. Constant reflectance falls back to gain 1 and the mean
/// difference as bias.
inline Radiometry fit_radiometric_gain(const RasterGrid& image, const RasterGrid& reflectance,
                                       const ValidMask& footprint) {
  require_same_geometry(image, reflectance, "fit_radiometric_gain");
  double sr = 0, si = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < image.rows(); ++r)
    for (std::size_t c = 0; c < image.cols(); ++c)
      if (footprint(r, c) && image.valid(r, c) && reflectance.valid(r, c)) {
        sr += reflectance(r, c);
        si += image(r, c);
        ++n;
      }
  if (n == 0) throw InputError("fit_radiometric_gain: empty footprint");
  const double mr = sr / static_cast<double>(n), mi = si / static_cast<double>(n);
  double srr = 0, sri = 0, sabs = 0;
  for (std::size_t r = 0; r < image.rows(); ++r)
    for (std::size_t c = 0; c < image.cols(); ++c)
      if (footprint(r, c) && image.valid(r, c) && reflectance.valid(r, c)) {
        const double dr = reflectance(r, c) - mr;
        srr += dr * dr;
        sri += dr * (image(r, c) - mi);
        sabs += reflectance(r, c) * reflectance(r, c);
      }
  if (!(srr > 1e-24 * std::max(sabs, 1e-300))) return {1.0, mi - mr};
  const double gain = sri / srr;
  return {gain, mi - gain * mr};
}

namespace detail {

// Fixed discretization of one SfS problem: stencils, data pixels, weights.
// The unknown is the update u = z - z0; slopes of z0 are taken once, so a
// constant shift of z0 leaves every iterate of u unchanged.
class SfsProblem {
 public:
  SfsProblem(const RasterGrid& z0, const RasterGrid& image, const ValidMask& footprint,
             const IlluminationGeometry& geom, const SfsConfig& cfg)
      : z0_(z0), image_(image), cfg_(cfg), rows_(z0.rows()), cols_(z0.cols()) {
    cfg.validate();
    require_same_geometry(z0, image, "sfs");
    if (!footprint.matches(z0)) throw InputError("sfs: footprint size does not match the DEM");
    if (z0.has_nodata()) throw InputError("sfs: initial DEM has gaps; run infill first");
    sun_ = geom.sun_dir();
    view_ = geom.view_dir();
    area_ = z0.cell_area();
    inv_h2_ = 1.0 / (z0.cell_size() * z0.cell_size());

    auto all_valid = [](std::size_t, std::size_t) { return true; };
    dx_.resize(z0.size());
    dy_.resize(z0.size());
    in_data_.assign(z0.size(), 0);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) {
        const std::size_t i = r * cols_ + c;
        dx_[i] = *axis_difference(rows_, cols_, z0.cell_size(), r, c, Axis::East, all_valid);
        dy_[i] = *axis_difference(rows_, cols_, z0.cell_size(), r, c, Axis::North, all_valid);
        if (footprint(r, c)) {
          if (!image.valid(r, c)) throw InputError("sfs: footprint includes nodata image pixels");
          in_data_[i] = 1;
        }
      }
    }
    const auto zv = z0.values();
    p0_.resize(size());
    q0_.resize(size());
    lap0_.assign(size(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      p0_[i] = (zv[dx_[i].plus] - zv[dx_[i].minus]) * dx_[i].inv_span;
      q0_[i] = (zv[dy_[i].plus] - zv[dy_[i].minus]) * dy_[i].inv_span;
    }
    for (std::size_t r = 1; r + 1 < rows_; ++r)
      for (std::size_t c = 1; c + 1 < cols_; ++c) lap0_[r * cols_ + c] = stencil_laplacian(zv, r, c);
    footprint_count_ = footprint.count();
    if (footprint_count_ == 0 && cfg.smoothness_weight == 0.0 && cfg.prior_weight == 0.0)
      throw InputError("sfs: empty footprint with W = C = 0 leaves the objective undefined");
  }

  std::size_t size() const { return z0_.size(); }
  const RasterGrid& z0() const { return z0_; }
  const SfsConfig& config() const { return cfg_; }

  struct PixelShading {
    bool used = false;  // contributes to the data term
    double reflectance = 0.0;
    double dr_dp = 0.0;
    double dr_dq = 0.0;
  };

  // u = z - z0 for a height field on the same grid.
  std::vector<double> update_of(const RasterGrid& z) const {
    std::vector<double> u(size());
    for (std::size_t i = 0; i < size(); ++i) u[i] = z.values()[i] - z0_.values()[i];
    return u;
  }

  PixelShading shade(std::span<const double> u, std::size_t i) const {
    const Difference& ex = dx_[i];
    const Difference& ny = dy_[i];
    const double p = p0_[i] + (u[ex.plus] - u[ex.minus]) * ex.inv_span;
    const double q = q0_[i] + (u[ny.plus] - u[ny.minus]) * ny.inv_span;
    const double m2 = 1.0 + p * p + q * q;
    const double m = std::sqrt(m2);
    const double ci = (-p * sun_.x - q * sun_.y + sun_.z) / m;
    const double ce = (-p * view_.x - q * view_.y + view_.z) / m;
    if (!(ce > 0.0)) return {};
    const ReflectancePartials rp = lunar_lambert_partials(ci, ce, cfg_.albedo);
    const double dci_dp = -sun_.x / m - ci * p / m2;
    const double dci_dq = -sun_.y / m - ci * q / m2;
    const double dce_dp = -view_.x / m - ce * p / m2;
    const double dce_dq = -view_.y / m - ce * q / m2;
    return {true, rp.value, rp.d_cos_i * dci_dp + rp.d_cos_e * dce_dp, rp.d_cos_i * dci_dq + rp.d_cos_e * dce_dq};
  }

  RasterGrid reflectance(std::span<const double> u) const {
    RasterGrid out = RasterGrid::like(z0_, z0_.nodata_value());
    for (std::size_t i = 0; i < size(); ++i) {
      const PixelShading s = shade(u, i);
      if (s.used) out.values()[i] = s.reflectance;
    }
    return out;
  }

  ValidMask data_mask(std::span<const double> u) const {
    ValidMask m(rows_, cols_);
    for (std::size_t i = 0; i < size(); ++i)
      if (in_data_[i] && shade(u, i).used) m.set(i / cols_, i % cols_, true);
    return m;
  }

  Radiometry fit(std::span<const double> u) const {
    if (!cfg_.fit_radiometry) return {cfg_.fixed_gain, cfg_.fixed_bias};
    ValidMask m(rows_, cols_);
    for (std::size_t i = 0; i < size(); ++i) m.set(i / cols_, i % cols_, in_data_[i] != 0);
    if (m.count() == 0) return {cfg_.fixed_gain, cfg_.fixed_bias};
    return fit_radiometric_gain(image_, reflectance(u), m);
  }

  double stencil_laplacian(std::span<const double> v, std::size_t r, std::size_t c) const {
    const std::size_t i = r * cols_ + c;
    return (v[i - cols_] + v[i + cols_] + v[i - 1] + v[i + 1] - 4.0 * v[i]) * inv_h2_;
  }

  double laplacian(std::span<const double> u, std::size_t r, std::size_t c) const {
    const double lu = stencil_laplacian(u, r, c);
    return cfg_.smoothness_target == SmoothnessTarget::Update ? lu : lap0_[r * cols_ + c] + lu;
  }

  EnergyBreakdown energy(std::span<const double> u, const Radiometry& rad) const {
    EnergyBreakdown e;
    e.gain = rad.gain;
    e.bias = rad.bias;
    const auto img = image_.values();
    // Row-major accumulation: per-row partial sums added in row order.
    for (std::size_t r = 0; r < rows_; ++r) {
      double d = 0.0, s = 0.0, p = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) {
        const std::size_t i = r * cols_ + c;
        if (in_data_[i]) {
          const PixelShading sh = shade(u, i);
          if (sh.used) {
            const double res = img[i] - rad.gain * sh.reflectance - rad.bias;
            d += res * res;
          }
        }
        if (r > 0 && c > 0 && r + 1 < rows_ && c + 1 < cols_) {
          const double l = laplacian(u, r, c);
          s += l * l;
        }
        p += u[i] * u[i];
      }
      e.data_term += d * area_;
      e.smooth_term += s * area_;
      e.prior_term += p * area_;
    }
    e.total = e.data_term + cfg_.smoothness_weight * e.smooth_term + cfg_.prior_weight * e.prior_term;
    return e;
  }

  // Gradient of the energy with gain and bias held fixed. Also caches the data
  // Jacobian for Gauss-Newton products.
  std::vector<double> gradient(std::span<const double> u, const Radiometry& rad) {
    std::vector<double> g(size(), 0.0);
    jac_p_.assign(size(), 0.0);
    jac_q_.assign(size(), 0.0);
    jac_used_.assign(size(), 0);
    gain_ = rad.gain;
    const auto img = image_.values();
    for (std::size_t i = 0; i < size(); ++i) {
      if (!in_data_[i]) continue;
      const PixelShading sh = shade(u, i);
      if (!sh.used) continue;
      jac_used_[i] = 1;
      jac_p_[i] = sh.dr_dp;
      jac_q_[i] = sh.dr_dq;
      const double res = img[i] - rad.gain * sh.reflectance - rad.bias;
      const double k = -2.0 * area_ * rad.gain * res;
      scatter_jt(g, i, k * sh.dr_dp, k * sh.dr_dq);
    }
    if (cfg_.smoothness_weight != 0.0) {
      const double k = 2.0 * area_ * cfg_.smoothness_weight;
      for (std::size_t r = 1; r + 1 < rows_; ++r)
        for (std::size_t c = 1; c + 1 < cols_; ++c) scatter_lt(g, r, c, k * laplacian(u, r, c));
    }
    if (cfg_.prior_weight != 0.0) {
      const double k = 2.0 * area_ * cfg_.prior_weight;
      for (std::size_t i = 0; i < size(); ++i) g[i] += k * u[i];
    }
    return g;
  }

  // Gauss-Newton Hessian product using the Jacobian cached by gradient().
  void gn_apply(const std::vector<double>& x, std::vector<double>& out, double damping,
                const std::vector<double>& diag) const {
    std::fill(out.begin(), out.end(), 0.0);
    const double kd = 2.0 * area_ * gain_ * gain_;
    for (std::size_t i = 0; i < size(); ++i) {
      if (!jac_used_[i]) continue;
      const Difference& ex = dx_[i];
      const Difference& ny = dy_[i];
      const double jx = jac_p_[i] * (x[ex.plus] - x[ex.minus]) * ex.inv_span +
                        jac_q_[i] * (x[ny.plus] - x[ny.minus]) * ny.inv_span;
      scatter_jt(out, i, kd * jx * jac_p_[i], kd * jx * jac_q_[i]);
    }
    if (cfg_.smoothness_weight != 0.0) {
      const double ks = 2.0 * area_ * cfg_.smoothness_weight;
      for (std::size_t r = 1; r + 1 < rows_; ++r)
        for (std::size_t c = 1; c + 1 < cols_; ++c) scatter_lt(out, r, c, ks * stencil_laplacian(x, r, c));
    }
    const double kp = 2.0 * area_ * cfg_.prior_weight;
    for (std::size_t i = 0; i < size(); ++i) out[i] += kp * x[i] + damping * diag[i] * x[i];
  }

  std::vector<double> gn_diagonal() const {
    std::vector<double> d(size(), 0.0);
    const double kd = 2.0 * area_ * gain_ * gain_;
    for (std::size_t i = 0; i < size(); ++i) {
      if (!jac_used_[i]) continue;
      // Merge coincident stencil entries before squaring.
      std::size_t idx[4];
      double coef[4];
      int n = 0;
      auto add = [&](std::size_t j, double v) {
        for (int k = 0; k < n; ++k)
          if (idx[k] == j) {
            coef[k] += v;
            return;
          }
        idx[n] = j;
        coef[n] = v;
        ++n;
      };
      const Difference& ex = dx_[i];
      const Difference& ny = dy_[i];
      add(ex.plus, jac_p_[i] * ex.inv_span);
      add(ex.minus, -jac_p_[i] * ex.inv_span);
      add(ny.plus, jac_q_[i] * ny.inv_span);
      add(ny.minus, -jac_q_[i] * ny.inv_span);
      for (int k = 0; k < n; ++k) d[idx[k]] += kd * coef[k] * coef[k];
    }
    if (cfg_.smoothness_weight != 0.0) {
      const double ks = 2.0 * area_ * cfg_.smoothness_weight * inv_h2_ * inv_h2_;
      for (std::size_t r = 1; r + 1 < rows_; ++r) {
        for (std::size_t c = 1; c + 1 < cols_; ++c) {
          const std::size_t i = r * cols_ + c;
          d[i] += 16.0 * ks;
          d[i - cols_] += ks;
          d[i + cols_] += ks;
          d[i - 1] += ks;
          d[i + 1] += ks;
        }
      }
    }
    const double kp = 2.0 * area_ * cfg_.prior_weight;
    for (double& v : d) v += kp;
    return d;
  }

 private:
  void scatter_jt(std::vector<double>& g, std::size_t i, double gp, double gq) const {
    const Difference& ex = dx_[i];
    const Difference& ny = dy_[i];
    g[ex.plus] += gp * ex.inv_span;
    g[ex.minus] -= gp * ex.inv_span;
    g[ny.plus] += gq * ny.inv_span;
    g[ny.minus] -= gq * ny.inv_span;
  }

  void scatter_lt(std::vector<double>& g, std::size_t r, std::size_t c, double v) const {
    const std::size_t i = r * cols_ + c;
    const double t = v * inv_h2_;
    g[i] -= 4.0 * t;
    g[i - cols_] += t;
    g[i + cols_] += t;
    g[i - 1] += t;
    g[i + 1] += t;
  }

  const RasterGrid& z0_;
  const RasterGrid& image_;
  SfsConfig cfg_;
  std::size_t rows_, cols_;
  Vec3 sun_, view_;
  double area_ = 1.0;
  double inv_h2_ = 1.0;
  std::vector<Difference> dx_, dy_;
  std::vector<double> p0_, q0_, lap0_;
  std::vector<std::uint8_t> in_data_;
  std::size_t footprint_count_ = 0;

  double gain_ = 1.0;
  std::vector<double> jac_p_, jac_q_;
  std::vector<std::uint8_t> jac_used_;
};

inline double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Jacobi-preconditioned CG on (H + damping * diag(H)) d = -g.
inline std::vector<double> gauss_newton_direction(const SfsProblem& prob, const std::vector<double>& g,
                                                  double damping) {
  const std::size_t n = g.size();
  const std::vector<double> diag = prob.gn_diagonal();
  std::vector<double> precond(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = diag[i] * (1.0 + damping);
    precond[i] = d > 0.0 ? 1.0 / d : 1.0;
  }
  std::vector<double> x(n, 0.0), r(n), z(n), p(n), ap(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = -g[i];
  for (std::size_t i = 0; i < n; ++i) z[i] = precond[i] * r[i];
  p = z;
  double rz = dot(r, z);
  const double target = prob.config().cg_relative_tolerance * std::sqrt(dot(g, g));
  for (std::size_t it = 0; it < prob.config().cg_max_iterations; ++it) {
    prob.gn_apply(p, ap, damping, diag);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    if (std::sqrt(dot(r, r)) <= target) break;
    for (std::size_t i = 0; i < n; ++i) z[i] = precond[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return x;
}

}  // namespace detail

/// Energy with gain and bias held at the given values.
inline EnergyBreakdown energy(const RasterGrid& z, const RasterGrid& image, const ValidMask& footprint,
                              const RasterGrid& z0, const IlluminationGeometry& geom, const SfsConfig& cfg,
                              const Radiometry& radiometry) {
  require_same_geometry(z, z0, "energy");
  if (z.has_nodata()) throw InputError("energy: height field has gaps");
  const detail::SfsProblem prob(z0, image, footprint, geom, cfg);
  return prob.energy(prob.update_of(z), radiometry);
}

/// Energy with gain and bias fitted to `z` when cfg.fit_radiometry is set,
/// otherwise (1, 0).
inline EnergyBreakdown energy(const RasterGrid& z, const RasterGrid& image, const ValidMask& footprint,
                              const RasterGrid& z0, const IlluminationGeometry& geom, const SfsConfig& cfg) {
  require_same_geometry(z, z0, "energy");
  if (z.has_nodata()) throw InputError("energy: height field has gaps");
  const detail::SfsProblem prob(z0, image, footprint, geom, cfg);
  const std::vector<double> u = prob.update_of(z);
  return prob.energy(u, prob.fit(u));
}

/// Analytic dE/dz per pixel, gain and bias held constant.
inline RasterGrid energy_gradient(const RasterGrid& z, const RasterGrid& image, const ValidMask& footprint,
                                  const RasterGrid& z0, const IlluminationGeometry& geom, const SfsConfig& cfg,
                                  const Radiometry& radiometry) {
  require_same_geometry(z, z0, "energy_gradient");
  if (z.has_nodata()) throw InputError("energy_gradient: height field has gaps");
  detail::SfsProblem prob(z0, image, footprint, geom, cfg);
  const auto g = prob.gradient(prob.update_of(z), radiometry);
  RasterGrid out = RasterGrid::like(z0);
  std::copy(g.begin(), g.end(), out.values().begin());
  return out;
}

inline RasterGrid energy_gradient(const RasterGrid& z, const RasterGrid& image, const ValidMask& footprint,
                                  const RasterGrid& z0, const IlluminationGeometry& geom, const SfsConfig& cfg) {
  detail::SfsProblem prob(z0, image, footprint, geom, cfg);
  return energy_gradient(z, image, footprint, z0, geom, cfg, prob.fit(prob.update_of(z)));
}

/// Rendered reflectance of `z` (nodata where undefined), as seen by the solver.
inline RasterGrid solver_reflectance(const RasterGrid& z, const IlluminationGeometry& geom, double albedo) {
  SfsConfig cfg;
  cfg.albedo = albedo;
  const ValidMask none(z.rows(), z.cols());
  cfg.prior_weight = 1.0;
  const detail::SfsProblem prob(z, z, none, geom, cfg);
  return prob.reflectance(std::vector<double>(z.size(), 0.0));
}

/// Minimizes the energy starting from z0. Each iteration computes a descent
/// direction, backtracks until the Armijo condition holds and accepts only
/// strict energy decreases; gain and bias are refitted after every accepted
/// step when enabled.
inline SfsResult solve(const RasterGrid& z0, const RasterGrid& image, const ValidMask& footprint,
                       const IlluminationGeometry& geom, const SfsConfig& cfg) {
  detail::SfsProblem prob(z0, image, footprint, geom, cfg);
  SfsResult out{z0, 0, {}, false, footprint, ""};
  std::vector<double> u(z0.size(), 0.0);

  Radiometry rad = prob.fit(u);
  EnergyBreakdown e = prob.energy(u, rad);
  if (!std::isfinite(e.total)) throw NumericalError("sfs: non-finite energy at iteration 0");
  out.energy_trace.push_back(e);

  double damping = 1e-3;
  double last_alpha = 0.0;
  std::vector<double> trial(u.size());
  for (std::size_t iter = 1; iter <= cfg.max_iterations; ++iter) {
    const std::vector<double> g = prob.gradient(u, rad);
    const double gmax = detail::sup_norm(g);
    if (!std::isfinite(gmax)) throw NumericalError("sfs: non-finite gradient at iteration " + std::to_string(iter));
    if (gmax < cfg.grad_tolerance) {
      out.converged = true;
      out.stop_reason = "gradient below tolerance";
      break;
    }

    std::vector<double> d;
    if (cfg.direction == DescentDirection::GaussNewton) d = detail::gauss_newton_direction(prob, g, damping);
    double slope = d.empty() ? 0.0 : detail::dot(g, d);
    const bool newton = !d.empty() && slope < 0.0;
    if (!newton) {
      d.resize(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i];
      slope = detail::dot(g, d);
    }
    const double dmax = detail::sup_norm(d);
    double alpha = newton ? 1.0 : (last_alpha > 0.0 ? 2.0 * last_alpha : cfg.step_init / dmax);
    alpha = std::min(alpha, cfg.step_init / dmax);

    bool accepted = false;
    bool backtracked = false;
    EnergyBreakdown trial_e;
    while (alpha * dmax >= cfg.min_step) {
      for (std::size_t i = 0; i < u.size(); ++i) trial[i] = u[i] + alpha * d[i];
      trial_e = prob.energy(trial, rad);
      if (std::isfinite(trial_e.total) && trial_e.total < e.total &&
          trial_e.total <= e.total + cfg.armijo_c * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= cfg.armijo_shrink;
      backtracked = true;
    }
    out.iterations_run = iter;
    if (!accepted) {
      out.converged = true;
      out.stop_reason = "step below min_step";
      break;
    }
    u.swap(trial);
    last_alpha = alpha;
    if (newton) damping = backtracked ? std::min(damping * 10.0, 1e6) : std::max(damping * 0.3, 1e-9);

    rad = prob.fit(u);
    e = prob.energy(u, rad);
    if (!std::isfinite(e.total)) throw NumericalError("sfs: non-finite energy at iteration " + std::to_string(iter));
    out.energy_trace.push_back(e);
  }
  if (out.stop_reason.empty()) out.stop_reason = "iteration limit";
  for (std::size_t i = 0; i < u.size(); ++i) out.z_sfs.values()[i] = z0.values()[i] + u[i];
  return out;
}

inline void write_energy_trace(const std::vector<EnergyBreakdown>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << "iter,data,smooth,prior,total,gain,bias\n";
  char buf[256];
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& e = trace[k];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", k, e.data_term, e.smooth_term,
                  e.prior_term, e.total, e.gain, e.bias);
    out << buf;
  }
}

}  // namespace lunarsfs
