// lunarsfs: command-line front end. One subcommand per processing step plus
// `pipeline` for the full chain.
//
// Exit codes: 0 success, 2 usage error, 3 input/parse error, 4 numerical failure.

#include <lunarsfs/lunarsfs.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace lunarsfs;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumerical = 4;

const WriteOptions kDemPrecision{9, 255};

// Masks on disk are grids; any valid sample > 0.5 is inside.
ValidMask read_mask(const fs::path& path, const RasterGrid& like) {
  const RasterGrid g = read_grid(path);
  if (g.rows() != like.rows() || g.cols() != like.cols())
    throw InputError("mask '" + path.string() + "' does not match the grid size");
  ValidMask m(g.rows(), g.cols());
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) m.set(r, c, g.valid(r, c) && g(r, c) > 0.5);
  return m;
}

void write_mask(const ValidMask& m, const RasterGrid& like, const fs::path& path) {
  RasterGrid g = RasterGrid::like(like, 0.0);
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) = m(r, c) ? 1.0 : 0.0;
  write_grid(g, path);
}

// Writes to the file when a path is given, else standard output.
void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

WorldPoint parse_point(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw InputError("expected 'x,y', got '" + s + "'");
  return {detail::parse_number(s.substr(0, comma), 0), detail::parse_number(s.substr(comma + 1), 0)};
}

// ---------------------------------------------------------------------------
// Shared SfS options

struct SfsOptions {
  SfsConfig cfg;
  bool no_fit = false;
  std::string image, camera, initial_dem, geometry, footprint;
  std::size_t tile_size = 0;
  std::size_t tile_overlap = 16;
  std::size_t workers = 1;
  std::string descent = "gauss-newton";
  std::string smoothness_target = "update";
};

void add_sfs_params(CLI::App* app, SfsOptions& o) {
  app->add_option("--smoothness-weight", o.cfg.smoothness_weight, "Smoothness weight W")->capture_default_str();
  app->add_option("--initial-dem-constraint-weight", o.cfg.prior_weight, "Initial-DEM constraint weight C")
      ->capture_default_str();
  app->add_option("--max-iterations", o.cfg.max_iterations, "Iteration limit N")->capture_default_str();
  app->add_option("--albedo", o.cfg.albedo, "Albedo A in (0, 1]")->capture_default_str();
  app->add_flag("--no-radiometric-fit", o.no_fit, "Hold gain and bias at --gain/--bias instead of fitting them");
  app->add_option("--gain", o.cfg.fixed_gain, "Image gain when the radiometric fit is off")->capture_default_str();
  app->add_option("--bias", o.cfg.fixed_bias, "Image bias when the radiometric fit is off")->capture_default_str();
  app->add_option("--step-init", o.cfg.step_init, "Largest trial displacement per iteration (m)")
      ->capture_default_str();
  app->add_option("--grad-tolerance", o.cfg.grad_tolerance, "Stop when the gradient sup-norm falls below this")
      ->capture_default_str();
  app->add_option("--min-step", o.cfg.min_step, "Stop when the accepted displacement falls below this (m)")
      ->capture_default_str();
  app->add_option("--descent", o.descent, "Descent direction")
      ->check(CLI::IsMember({"gauss-newton", "steepest"}))
      ->capture_default_str();
  app->add_option("--smoothness-target", o.smoothness_target, "Laplacian applied to the update (z - z0) or to z")
      ->check(CLI::IsMember({"update", "height"}))
      ->capture_default_str();
  app->add_option("--tile-size", o.tile_size, "Solve in tiles of this many pixels (0: one grid)");
  app->add_option("--tile-overlap", o.tile_overlap, "Tile overlap in pixels")->capture_default_str();
  app->add_option("--workers", o.workers, "Worker threads for tiled solves")->capture_default_str();
}

void add_sfs_inputs(CLI::App* app, SfsOptions& o) {
  app->add_option("--image", o.image, "Shading image (ASC or PGM)")->required();
  app->add_option("--camera", o.camera, "Affine camera file; without it the image must be on the DEM grid");
  app->add_option("--initial-dem", o.initial_dem, "Gap-free initial DEM z0 (ASC)")->required();
  app->add_option("--geometry", o.geometry, "Illumination geometry config of the shading image")->required();
  app->add_option("--footprint", o.footprint, "Mask grid restricting the data term");
}

SfsConfig finalize(const SfsOptions& o) {
  SfsConfig cfg = o.cfg;
  cfg.fit_radiometry = !o.no_fit;
  cfg.direction = o.descent == "steepest" ? DescentDirection::Steepest : DescentDirection::GaussNewton;
  cfg.smoothness_target = o.smoothness_target == "height" ? SmoothnessTarget::Height : SmoothnessTarget::Update;
  cfg.validate();
  return cfg;
}

struct SfsInputs {
  RasterGrid z0;
  RasterGrid image;
  ValidMask footprint;
  IlluminationGeometry geom;
};

SfsInputs load_sfs_inputs(const SfsOptions& o) {
  RasterGrid z0 = read_grid(o.initial_dem);
  RasterGrid raw = read_grid(o.image);
  IlluminationGeometry geom = read_geometry(o.geometry);
  RasterGrid image = raw;
  ValidMask fp(raw.rows(), raw.cols());
  if (!o.camera.empty()) {
    MapProjection mp = mapproject(raw, read_camera(o.camera), z0);
    image = std::move(mp.image);
    fp = std::move(mp.footprint);
  } else {
    if (raw.rows() != z0.rows() || raw.cols() != z0.cols())
      throw InputError("image size differs from the DEM; pass --camera to mapproject it");
    image = RasterGrid(z0.rows(), z0.cols(), z0.cell_size(), z0.origin_x(), z0.origin_y(), z0.nodata_value());
    for (std::size_t r = 0; r < z0.rows(); ++r)
      for (std::size_t c = 0; c < z0.cols(); ++c)
        if (raw.valid(r, c)) image(r, c) = raw(r, c);
    fp = ValidMask(image);
  }
  if (!o.footprint.empty()) fp = fp & read_mask(o.footprint, z0);
  return {std::move(z0), std::move(image), std::move(fp), geom};
}

std::optional<TileScheme> tiles_for(const SfsOptions& o, const RasterGrid& z0) {
  if (o.tile_size == 0) return std::nullopt;
  return plan_tiles(z0.rows(), z0.cols(), o.tile_size, o.tile_overlap);
}

std::string with_prefix(const std::string& prefix, const std::string& name) {
  if (prefix.empty()) return name;
  if (prefix.back() == '/') return prefix + name;
  return prefix + "_" + name;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shape-from-shading refinement of planetary DEMs"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // synth ------------------------------------------------------------------
  std::string synth_config, synth_out, synth_degraded;
  std::optional<std::uint64_t> synth_seed;
  double degrade_sigma = 4.0, degrade_offset = 0.0, gap_fraction = 0.0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic DEM from a terrain config");
  synth->add_option("--config", synth_config, "Terrain config (size, cell_size, crater/mesa/hill lines)")->required();
  synth->add_option("--seed", synth_seed, "Seed for noise and gaps (overrides the config)");
  synth->add_option("--output", synth_out, "Output DEM (ASC)")->required();
  synth->add_option("--degraded-output", synth_degraded, "Also write a smoothed, offset copy with gaps");
  synth->add_option("--degrade-sigma", degrade_sigma, "Smoothing of the degraded copy (px)")->capture_default_str();
  synth->add_option("--degrade-offset", degrade_offset, "Vertical offset of the degraded copy (m)")
      ->capture_default_str();
  synth->add_option("--gap-fraction", gap_fraction, "Fraction of the degraded copy set to nodata")
      ->capture_default_str();

  // render -----------------------------------------------------------------
  std::string render_dem, render_geom, render_out;
  double render_albedo = 1.0, render_gain = 1.0, render_bias = 0.0;
  bool render_stretch = false;
  auto* render_cmd = app.add_subcommand("render", "Render a Lunar-Lambert image of a DEM");
  render_cmd->add_option("--dem", render_dem, "Input DEM")->required();
  render_cmd->add_option("--geometry", render_geom, "Illumination geometry config")->required();
  render_cmd->add_option("--albedo", render_albedo, "Albedo A in (0, 1]")->capture_default_str();
  render_cmd->add_option("--gain", render_gain, "Image gain")->capture_default_str();
  render_cmd->add_option("--bias", render_bias, "Image bias")->capture_default_str();
  render_cmd->add_flag("--stretch", render_stretch, "Stretch to [0, 1] (PGM output)");
  render_cmd->add_option("--output", render_out, "Output image (ASC or PGM)")->required();

  // hillshade --------------------------------------------------------------
  std::string hs_dem, hs_out;
  double hs_az = 315.0, hs_el = 45.0;
  auto* hs = app.add_subcommand("hillshade", "Lambertian shaded relief");
  hs->add_option("--dem", hs_dem, "Input DEM")->required();
  hs->add_option("--azimuth", hs_az, "Sun azimuth, degrees clockwise from north")->capture_default_str();
  hs->add_option("--elevation", hs_el, "Sun elevation, degrees")->capture_default_str();
  hs->add_option("--output", hs_out, "Output image (PGM or ASC)")->required();

  // mapproject -------------------------------------------------------------
  std::string mp_image, mp_camera, mp_dem, mp_out, mp_fp;
  auto* mpc = app.add_subcommand("mapproject", "Resample an image onto a DEM through an affine camera");
  mpc->add_option("--image", mp_image, "Input image")->required();
  mpc->add_option("--camera", mp_camera, "Affine camera file (8 numbers)")->required();
  mpc->add_option("--dem", mp_dem, "DEM defining the output grid")->required();
  mpc->add_option("--output", mp_out, "Mapprojected image (ASC)")->required();
  mpc->add_option("--footprint", mp_fp, "Footprint mask output (PGM)");

  // align ------------------------------------------------------------------
  std::string al_dem, al_ref, al_out;
  auto* al = app.add_subcommand("align", "Remove the constant vertical offset to a reference DEM");
  al->add_option("--dem", al_dem, "DEM to shift")->required();
  al->add_option("--reference", al_ref, "Reference DEM on the same grid")->required();
  al->add_option("--output", al_out, "Aligned DEM")->required();

  // blend ------------------------------------------------------------------
  std::string bl_primary, bl_secondary, bl_out;
  auto* bl = app.add_subcommand("blend", "Fill nodata in the primary DEM from the secondary");
  bl->add_option("--primary", bl_primary, "Primary DEM")->required();
  bl->add_option("--secondary", bl_secondary, "Secondary DEM")->required();
  bl->add_option("--output", bl_out, "Blended DEM")->required();

  // infill -----------------------------------------------------------------
  std::string if_dem, if_out;
  InfillOptions if_opt;
  auto* inf = app.add_subcommand("infill", "Harmonic interpolation of nodata gaps");
  inf->add_option("--dem", if_dem, "DEM with gaps")->required();
  inf->add_option("--output", if_out, "Filled DEM")->required();
  inf->add_option("--tolerance", if_opt.tolerance, "Convergence tolerance (m)")->capture_default_str();
  inf->add_option("--max-iterations", if_opt.max_iters, "Iteration limit")->capture_default_str();

  // geomcheck --------------------------------------------------------------
  std::string gc_s1, gc_s2, gc_sh, gc_out;
  double gc_fraction = 1.0;
  SuitabilityThresholds gc_th;
  auto* gc = app.add_subcommand("geomcheck", "Acquisition-geometry suitability of a shading image");
  gc->add_option("--stereo1", gc_s1, "Geometry config of the first stereo image")->required();
  gc->add_option("--stereo2", gc_s2, "Geometry config of the second stereo image")->required();
  gc->add_option("--shading", gc_sh, "Geometry config of the shading image")->required();
  gc->add_option("--footprint-fraction", gc_fraction, "Fraction of the DEM covered by the shading image")
      ->capture_default_str();
  gc->add_option("--suitable-max-pitch", gc_th.suitable_max_pitch, "Delta pitch limit for 'suitable' (deg)")
      ->capture_default_str();
  gc->add_option("--unsuitable-min-pitch", gc_th.unsuitable_min_pitch, "Delta pitch for 'unsuitable' (deg)")
      ->capture_default_str();
  gc->add_option("--output", gc_out, "CSV output (default standard output)");

  // sfs --------------------------------------------------------------------
  SfsOptions sfs_opt;
  std::string sfs_prefix = "sfs";
  auto* sfs = app.add_subcommand("sfs", "Refine a DEM with shape from shading");
  add_sfs_inputs(sfs, sfs_opt);
  add_sfs_params(sfs, sfs_opt);
  sfs->add_option("--output-prefix", sfs_prefix, "Prefix for <prefix>_z_sfs.asc, _energy.csv, _rendered.pgm")
      ->capture_default_str();

  // slopestats -------------------------------------------------------------
  std::string ss_dem, ss_mask, ss_out;
  auto* ss = app.add_subcommand("slopestats", "Slope-angle standard deviation");
  ss->add_option("--dem", ss_dem, "Input DEM")->required();
  ss->add_option("--mask", ss_mask, "Restrict to this mask grid");
  ss->add_option("--output", ss_out, "CSV output (default standard output)");

  // demdiff ----------------------------------------------------------------
  std::string dd_a, dd_b, dd_out, dd_summary;
  auto* dd = app.add_subcommand("demdiff", "Height difference a - b");
  dd->add_option("--a", dd_a, "Minuend DEM (e.g. SfS output)")->required();
  dd->add_option("--b", dd_b, "Subtrahend DEM (e.g. initial DEM)")->required();
  dd->add_option("--output", dd_out, "Difference grid (ASC)");
  dd->add_option("--summary", dd_summary, "Summary CSV (default standard output)");

  // residual ---------------------------------------------------------------
  std::string rs_dem, rs_image, rs_geom, rs_fp, rs_out;
  double rs_albedo = 1.0, rs_gain = 1.0, rs_bias = 0.0;
  auto* rs = app.add_subcommand("residual", "Mean squared photometric residual");
  rs->add_option("--dem", rs_dem, "DEM")->required();
  rs->add_option("--image", rs_image, "Image on the DEM grid")->required();
  rs->add_option("--geometry", rs_geom, "Illumination geometry config")->required();
  rs->add_option("--footprint", rs_fp, "Mask grid (default: valid image pixels)");
  rs->add_option("--albedo", rs_albedo, "Albedo")->capture_default_str();
  rs->add_option("--gain", rs_gain, "Image gain")->capture_default_str();
  rs->add_option("--bias", rs_bias, "Image bias")->capture_default_str();
  rs->add_option("--output", rs_out, "CSV output (default standard output)");

  // profile ----------------------------------------------------------------
  std::vector<std::string> pf_rasters;
  std::string pf_start, pf_end, pf_out;
  double pf_spacing = 1.0;
  auto* pf = app.add_subcommand("profile", "Transect samples of one or more rasters");
  pf->add_option("--raster", pf_rasters, "Raster to sample (repeatable)")->required();
  pf->add_option("--start", pf_start, "Start point x,y (m)")->required();
  pf->add_option("--end", pf_end, "End point x,y (m)")->required();
  pf->add_option("--spacing", pf_spacing, "Station spacing (m)")->capture_default_str();
  pf->add_option("--output", pf_out, "CSV output (default standard output)");

  // sweep ------------------------------------------------------------------
  SfsOptions sw_opt;
  int sw_stage = 1;
  std::string sw_report, sw_prior, sw_sigma_region = "footprint";
  bool sw_control = false;
  double sw_rho = kDefaultRhoMax;
  auto* sw = app.add_subcommand("sweep", "Staged (W, C, N) parameter sweep");
  add_sfs_inputs(sw, sw_opt);
  add_sfs_params(sw, sw_opt);
  sw->add_option("--stage", sw_stage, "Sweep stage")->check(CLI::IsMember({1, 2, 3}))->required();
  sw->add_option("--report", sw_report, "Report CSV to write")->required();
  sw->add_option("--prior-report", sw_prior, "Report of the previous stage (stages 2 and 3)");
  sw->add_flag("--control", sw_control, "Append a W = 1e8 control run");
  sw->add_option("--rho-max", sw_rho, "Roughness ratio above which a run is noisy")->capture_default_str();
  sw->add_option("--sigma-region", sw_sigma_region, "Region for slope statistics")
      ->check(CLI::IsMember({"footprint", "full"}))
      ->capture_default_str();

  // pipeline ---------------------------------------------------------------
  SfsOptions pl_opt;
  PipelineConfig pl;
  bool pl_no_align = false, pl_no_blend = false, pl_no_infill = false;
  auto* pc = app.add_subcommand("pipeline", "align, blend, infill, mapproject, geomcheck, sfs and metrics in one run");
  pc->add_option("--initial-dem", pl.initial_dem, "Stereo DEM, may contain nodata gaps")->required();
  pc->add_option("--reference-dem", pl.reference_dem, "Reference DEM on the same grid")->required();
  pc->add_option("--image", pl.image, "Shading image")->required();
  pc->add_option("--camera", pl.camera, "Affine camera of the shading image")->required();
  pc->add_option("--stereo1-geometry", pl.stereo1_geometry, "Geometry config of stereo image 1")->required();
  pc->add_option("--stereo2-geometry", pl.stereo2_geometry, "Geometry config of stereo image 2")->required();
  pc->add_option("--shading-geometry", pl.shading_geometry, "Geometry config of the shading image")->required();
  pc->add_option("--output-dir", pl.output_dir, "Directory for all artifacts and manifest.json")->required();
  pc->add_flag("--no-align", pl_no_align, "Skip vertical alignment");
  pc->add_flag("--no-blend", pl_no_blend, "Skip gap blending from the reference");
  pc->add_flag("--no-infill", pl_no_infill, "Skip harmonic infill");
  add_sfs_params(pc, pl_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth) {
      TerrainSpec spec = read_terrain_spec(synth_config);
      if (synth_seed) spec.seed = *synth_seed;
      const RasterGrid dem = generate_dem(spec);
      write_grid(dem, synth_out, kDemPrecision);
      if (!synth_degraded.empty())
        write_grid(degrade_dem(dem, degrade_sigma, degrade_offset, gap_fraction, spec.seed + 1), synth_degraded,
                   kDemPrecision);
    } else if (*render_cmd) {
      RasterGrid img = render(read_grid(render_dem), read_geometry(render_geom), Albedo(render_albedo), render_gain,
                              render_bias);
      if (render_stretch || format_from_path(render_out) == RasterFormat::Pgm) img = stretch_to_unit(img);
      write_grid(img, render_out, kDemPrecision);
    } else if (*hs) {
      write_grid(hillshade(read_grid(hs_dem), hs_az, hs_el), hs_out);
    } else if (*mpc) {
      const RasterGrid dem = read_grid(mp_dem);
      const MapProjection mp = mapproject(read_grid(mp_image), read_camera(mp_camera), dem);
      write_grid(mp.image, mp_out, kDemPrecision);
      if (!mp_fp.empty()) write_mask(mp.footprint, dem, mp_fp);
      std::cout << "footprint_fraction," << fmt(mp.footprint_fraction) << '\n';
    } else if (*al) {
      const VerticalAlignment va = vertical_align(read_grid(al_dem), read_grid(al_ref));
      write_grid(va.aligned, al_out, kDemPrecision);
      std::cout << "offset_m,rms_after_m,overlap_px\n"
                << fmt(va.offset) << ',' << fmt(va.rms_after) << ',' << va.overlap << '\n';
    } else if (*bl) {
      write_grid(priority_blend(read_grid(bl_primary), read_grid(bl_secondary)), bl_out, kDemPrecision);
    } else if (*inf) {
      const InfillResult ir = infill_gaps(read_grid(if_dem), if_opt);
      write_grid(ir.dem, if_out, kDemPrecision);
      std::cout << "iterations,max_residual_m\n" << ir.iterations << ',' << fmt(ir.max_residual) << '\n';
    } else if (*gc) {
      const GeometrySuitability g =
          geometry_diagnostics(read_geometry(gc_s1), read_geometry(gc_s2), read_geometry(gc_sh), gc_fraction, gc_th);
      std::ostringstream os;
      os << "delta_incidence_deg,delta_pitch_deg,footprint_fraction,verdict\n";
      char buf[128];
      std::snprintf(buf, sizeof buf, "%.2f,%.2f,%.3f,%s\n", g.delta_incidence, g.delta_pitch, g.footprint_fraction,
                    to_string(g.verdict));
      os << buf;
      emit(os.str(), gc_out);
      if (g.verdict == Verdict::Unsuitable)
        std::cerr << "WARNING: acquisition geometry is unsuitable for SfS\n";
    } else if (*sfs) {
      const SfsConfig cfg = finalize(sfs_opt);
      const SfsInputs in = load_sfs_inputs(sfs_opt);
      const auto tiles = tiles_for(sfs_opt, in.z0);
      const SfsResult res = tiles ? solve_tiled(in.z0, in.image, in.footprint, in.geom, cfg, *tiles, sfs_opt.workers)
                                  : solve(in.z0, in.image, in.footprint, in.geom, cfg);
      if (const auto dir = fs::path(with_prefix(sfs_prefix, "z_sfs.asc")).parent_path(); !dir.empty())
        fs::create_directories(dir);
      write_grid(res.z_sfs, with_prefix(sfs_prefix, "z_sfs.asc"), kDemPrecision);
      write_energy_trace(res.energy_trace, with_prefix(sfs_prefix, "energy.csv"));
      write_grid(stretch_to_unit(solver_reflectance(res.z_sfs, in.geom, cfg.albedo)),
                 with_prefix(sfs_prefix, "rendered.pgm"));
      const EnergyBreakdown& last = res.energy_trace.back();
      std::cout << "iterations " << res.iterations_run << " (" << res.stop_reason << "), energy "
                << fmt(res.energy_trace.front().total) << " -> " << fmt(last.total) << '\n';
    } else if (*ss) {
      const RasterGrid dem = read_grid(ss_dem);
      std::optional<ValidMask> mask;
      if (!ss_mask.empty()) mask = read_mask(ss_mask, dem);
      const SlopeStats st = slope_stddev(dem, mask ? &*mask : nullptr);
      emit("sigma_s_deg,mean_slope_deg,n_pixels\n" + fmt(st.sigma_s) + ',' + fmt(st.mean_slope) + ',' +
               std::to_string(st.n_pixels) + '\n',
           ss_out);
    } else if (*dd) {
      const HeightDifference hd = height_difference(read_grid(dd_a), read_grid(dd_b));
      if (!dd_out.empty()) write_grid(hd.dz, dd_out, kDemPrecision);
      const auto& s = hd.summary;
      emit("mean_m,rms_m,min_m,max_m,count\n" + fmt(s.mean) + ',' + fmt(s.rms) + ',' + fmt(s.min) + ',' +
               fmt(s.max) + ',' + std::to_string(s.count) + '\n',
           dd_summary);
    } else if (*rs) {
      const RasterGrid dem = read_grid(rs_dem);
      const RasterGrid image = read_grid(rs_image);
      ValidMask fp = rs_fp.empty() ? ValidMask(image) : read_mask(rs_fp, dem) & ValidMask(image);
      const double eps = photometric_residual(dem, image, fp, read_geometry(rs_geom), rs_albedo, rs_gain, rs_bias);
      emit("eps_R\n" + fmt(eps) + '\n', rs_out);
    } else if (*pf) {
      std::vector<RasterGrid> grids;
      for (const auto& p : pf_rasters) grids.push_back(read_grid(p));
      std::vector<const RasterGrid*> ptrs;
      std::vector<std::string> names;
      for (std::size_t i = 0; i < grids.size(); ++i) {
        ptrs.push_back(&grids[i]);
        names.push_back(fs::path(pf_rasters[i]).stem().string());
      }
      const Transect t = extract_profile(ptrs, parse_point(pf_start), parse_point(pf_end), pf_spacing);
      std::ostringstream os;
      t.write_csv(os, names);
      emit(os.str(), pf_out);
    } else if (*sw) {
      const SfsConfig base = finalize(sw_opt);
      const SfsInputs in = load_sfs_inputs(sw_opt);
      std::optional<SweepReport> prior;
      if (sw_stage > 1) {
        if (sw_prior.empty()) throw InputError("--prior-report is required for stage " + std::to_string(sw_stage));
        prior = read_report(sw_prior);
      }
      SweepPlan plan = plan_stage(sw_stage, base, prior ? &*prior : nullptr);
      if (sw_control) plan.runs.push_back(control_config(base));
      SweepInputs si;
      si.z0 = &in.z0;
      si.image = &in.image;
      si.footprint = &in.footprint;
      si.geom = in.geom;
      const ValidMask full(in.z0.rows(), in.z0.cols(), true);
      if (sw_sigma_region == "full") si.sigma_mask = &full;
      si.tiles = tiles_for(sw_opt, in.z0);
      si.workers = sw_opt.workers;
      si.rho_max = sw_rho;
      const SweepReport rep = execute_sweep(plan, si);
      write_report(rep, fs::path(sw_report));
      for (const auto& r : rep.rows)
        if (!r.error.empty()) std::cerr << "run W=" << fmt(r.W) << " C=" << fmt(r.C) << " N=" << r.N
                                        << " failed: " << r.error << '\n';
      if (rep.w_star) std::cout << "W* = " << fmt(*rep.w_star) << '\n';
    } else if (*pc) {
      pl.sfs = finalize(pl_opt);
      if (pl_opt.tile_size) pl.tile_size = pl_opt.tile_size;
      pl.tile_overlap = pl_opt.tile_overlap;
      pl.workers = pl_opt.workers;
      pl.run_align = !pl_no_align;
      pl.run_blend = !pl_no_blend;
      pl.run_infill = !pl_no_infill;
      const PipelineResult res = run_pipeline(pl, std::cout);
      std::cout << "manifest: " << res.manifest_path.string() << '\n';
    }
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return 0;
}
