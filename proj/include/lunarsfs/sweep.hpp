#pragma once

// Three-stage (W, C, N) parameter sweep with noise flagging.
//
// Stage 1 sweeps W over decades, stage 2 refines W inside the best decade and
// stage 3 varies C and N one at a time at the selected W*.

#include <lunarsfs/error.hpp>
#include <lunarsfs/metrics.hpp>
#include <lunarsfs/raster.hpp>
#include <lunarsfs/sfs_solver.hpp>
#include <lunarsfs/tiling.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace lunarsfs {

inline constexpr double kDefaultRhoMax = 2.5;

/// Noisy when RMS(L z_sfs) / RMS(L z0) exceeds rho_max.
inline bool flag_noise(const RasterGrid& z_sfs, const RasterGrid& z0, double rho_max = kDefaultRhoMax) {
  return roughness_ratio(z_sfs, z0) > rho_max;
}

struct SweepRow {
  double W = 0.0;
  double C = 0.0;
  std::size_t N = 0;
  double delta_sigma_s_pct = std::numeric_limits<double>::quiet_NaN();
  double eps_R = std::numeric_limits<double>::quiet_NaN();
  bool noisy = false;
  std::size_t iters = 0;
  double wall_s = 0.0;
  std::string error;  // empty on success; not part of the CSV

  bool ok() const { return error.empty() && std::isfinite(delta_sigma_s_pct); }
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::optional<double> w_star;
};

struct SweepPlan {
  int stage = 1;
  std::vector<SfsConfig> runs;
  std::optional<double> base_decade;  // stage 2
  std::optional<double> fixed_w;      // stage 3
};

/// Largest W among non-noisy rows whose delta sigma lies within `margin`
/// percentage points of the best non-noisy delta sigma.
inline std::optional<double> select_w_star(const std::vector<SweepRow>& rows, double margin = 2.0) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows)
    if (r.ok() && !r.noisy) best = std::max(best, r.delta_sigma_s_pct);
  if (!std::isfinite(best)) return std::nullopt;
  std::optional<double> w;
  for (const auto& r : rows)
    if (r.ok() && !r.noisy && r.delta_sigma_s_pct >= best - margin && (!w || r.W > *w)) w = r.W;
  return w;
}

/// Stage plans. `base` supplies every setting the stage does not vary.
inline SweepPlan plan_stage(int stage, const SfsConfig& base, const SweepReport* prior = nullptr) {
  SweepPlan plan;
  plan.stage = stage;
  auto with = [&](double w, double c, std::size_t n) {
    SfsConfig cfg = base;
    cfg.smoothness_weight = w;
    cfg.prior_weight = c;
    cfg.max_iterations = n;
    return cfg;
  };
  switch (stage) {
    case 1:
      for (double w : {1e4, 1e3, 1e2, 1e1}) plan.runs.push_back(with(w, 1e-3, 10));
      return plan;
    case 2: {
      if (!prior) throw InputError("sweep stage 2 needs the stage 1 report");
      const SweepRow* best = nullptr;
      for (const auto& r : prior->rows)
        if (r.ok() && !r.noisy && (!best || r.delta_sigma_s_pct > best->delta_sigma_s_pct)) best = &r;
      if (!best) throw InputError("sweep stage 2: every stage 1 run is noisy or failed; no productive decade");
      const double d = std::pow(10.0, std::floor(std::log10(best->W) + 1e-9));
      plan.base_decade = d;
      for (double f : {1.0, 0.75, 0.5, 0.25}) plan.runs.push_back(with(f * d, 1e-3, 10));
      return plan;
    }
    case 3: {
      if (!prior) throw InputError("sweep stage 3 needs the stage 2 report");
      const auto w = prior->w_star ? prior->w_star : select_w_star(prior->rows);
      if (!w) throw InputError("sweep stage 3: no non-noisy run in the stage 2 report");
      plan.fixed_w = *w;
      for (double c : {1e-1, 1e-2, 1e-3, 1e-4}) plan.runs.push_back(with(*w, c, 10));
      for (std::size_t n : {5, 10, 20, 50}) plan.runs.push_back(with(*w, 1e-3, n));
      return plan;
    }
    default:
      throw InputError("sweep stage must be 1, 2 or 3");
  }
}

/// W = 1e8 run with the stage 1 secondary parameters.
inline SfsConfig control_config(const SfsConfig& base) {
  SfsConfig cfg = base;
  cfg.smoothness_weight = 1e8;
  cfg.prior_weight = 1e-3;
  cfg.max_iterations = 10;
  return cfg;
}

struct SweepInputs {
  const RasterGrid* z0 = nullptr;
  const RasterGrid* image = nullptr;
  const ValidMask* footprint = nullptr;
  IlluminationGeometry geom;
  const ValidMask* sigma_mask = nullptr;  // region for delta sigma; footprint when null
  std::optional<TileScheme> tiles;
  std::size_t workers = 1;
  double rho_max = kDefaultRhoMax;
};

struct SweepRun {
  SweepRow row;
  std::optional<SfsResult> result;
};

inline SweepRun run_config(const SfsConfig& cfg, const SweepInputs& in) {
  SweepRun out;
  out.row.W = cfg.smoothness_weight;
  out.row.C = cfg.prior_weight;
  out.row.N = cfg.max_iterations;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    SfsResult res = in.tiles ? solve_tiled(*in.z0, *in.image, *in.footprint, in.geom, cfg, *in.tiles, in.workers)
                             : solve(*in.z0, *in.image, *in.footprint, in.geom, cfg);
    const ValidMask* mask = in.sigma_mask ? in.sigma_mask : in.footprint;
    out.row.delta_sigma_s_pct = delta_sigma_pct(res.z_sfs, *in.z0, mask);
    const EnergyBreakdown& last = res.energy_trace.back();
    out.row.eps_R = photometric_residual(res.z_sfs, *in.image, *in.footprint, in.geom, cfg.albedo, last.gain, last.bias);
    out.row.noisy = flag_noise(res.z_sfs, *in.z0, in.rho_max);
    out.row.iters = res.iterations_run;
    out.result = std::move(res);
  } catch (const Error& e) {
    out.row.error = e.what();
    out.row.noisy = true;
  }
  out.row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Runs every config sequentially. Failures are recorded in their row.
inline SweepReport execute_sweep(const SweepPlan& plan, const SweepInputs& in) {
  if (!in.z0 || !in.image || !in.footprint) throw InputError("sweep: missing solve inputs");
  SweepReport rep;
  for (const SfsConfig& cfg : plan.runs) rep.rows.push_back(run_config(cfg, in).row);
  if (plan.stage == 3 && plan.fixed_w)
    rep.w_star = plan.fixed_w;
  else
    rep.w_star = select_w_star(rep.rows);
  return rep;
}

// ---------------------------------------------------------------------------
// Report CSV

inline constexpr const char* kSweepHeader = "W,C,N,delta_sigma_s_pct,eps_R,noisy,iters,wall_s";

inline void write_report(const SweepReport& rep, std::ostream& out) {
  out << kSweepHeader << '\n';
  char buf[256];
  for (const auto& r : rep.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu,%.17g,%.17g,%d,%zu,%.6f\n", r.W, r.C, r.N, r.delta_sigma_s_pct,
                  r.eps_R, r.noisy ? 1 : 0, r.iters, r.wall_s);
    out << buf;
  }
}

inline void write_report(const SweepReport& rep, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  write_report(rep, out);
}

inline SweepReport parse_report(std::istream& in) {
  SweepReport rep;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty sweep report", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSweepHeader) throw ParseError("unexpected sweep report header", lineno);
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      f.push_back(line.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (f.size() != 8) throw ParseError("expected 8 fields", lineno);
    auto num = [&](const std::string& s) {
      if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
      return detail::parse_number(s, lineno);
    };
    SweepRow r;
    r.W = num(f[0]);
    r.C = num(f[1]);
    r.N = static_cast<std::size_t>(num(f[2]));
    r.delta_sigma_s_pct = num(f[3]);
    r.eps_R = num(f[4]);
    r.noisy = num(f[5]) != 0.0;
    r.iters = static_cast<std::size_t>(num(f[6]));
    r.wall_s = num(f[7]);
    if (!std::isfinite(r.delta_sigma_s_pct)) r.error = "failed run";
    rep.rows.push_back(r);
  }
  rep.w_star = select_w_star(rep.rows);
  return rep;
}

inline SweepReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return parse_report(in);
}

}  // namespace lunarsfs
