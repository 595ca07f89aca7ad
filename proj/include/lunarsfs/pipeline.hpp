#pragma once

// End-to-end run: align -> blend -> infill -> mapproject -> geomcheck -> sfs
// -> metrics, with a JSON manifest of every artifact written.

#include <lunarsfs/error.hpp>
#include <lunarsfs/geometry_prep.hpp>
#include <lunarsfs/metrics.hpp>
#include <lunarsfs/photometry.hpp>
#include <lunarsfs/raster.hpp>
#include <lunarsfs/sfs_solver.hpp>
#include <lunarsfs/tiling.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace lunarsfs {

inline constexpr const char* kPipelineStages[] = {"align", "blend", "infill", "mapproject", "geomcheck", "sfs",
                                                  "metrics"};

struct PipelineConfig {
  std::filesystem::path initial_dem;    // stereo DEM, may contain gaps
  std::filesystem::path reference_dem;  // lower-resolution reference used for alignment and gap blending
  std::filesystem::path image;          // shading image
  std::filesystem::path camera;         // affine camera of the shading image
  std::filesystem::path stereo1_geometry;
  std::filesystem::path stereo2_geometry;
  std::filesystem::path shading_geometry;
  std::filesystem::path output_dir;

  SfsConfig sfs;
  std::optional<std::size_t> tile_size;
  std::size_t tile_overlap = 16;
  std::size_t workers = 1;
  InfillOptions infill;
  SuitabilityThresholds thresholds;

  bool run_align = true;
  bool run_blend = true;
  bool run_infill = true;
};

struct PipelineResult {
  nlohmann::json manifest;
  std::filesystem::path manifest_path;
  Verdict verdict = Verdict::Marginal;
};

namespace detail {

// Re-raises the active exception with the stage name prefixed, keeping its
// category.
[[noreturn]] inline void rethrow_in_stage(const std::string& stage) {
  try {
    throw;
  } catch (const ParseError& e) {
    throw ParseError("stage '" + stage + "': " + e.message(), e.line());
  } catch (const NumericalError& e) {
    throw NumericalError("stage '" + stage + "': " + e.what());
  } catch (const Error& e) {
    throw InputError("stage '" + stage + "': " + e.what());
  } catch (const std::exception& e) {
    throw Error("stage '" + stage + "': " + e.what());
  }
}

}  // namespace detail

inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  nlohmann::json manifest;
  manifest["output_dir"] = cfg.output_dir.string();
  manifest["stages"] = nlohmann::json::array();
  manifest["warnings"] = nlohmann::json::array();
  PipelineResult result;

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir))
    throw InputError("cannot create output directory '" + cfg.output_dir.string() + "'");

  auto out_path = [&](const std::string& name) { return cfg.output_dir / name; };
  auto run_stage = [&](const std::string& name, bool enabled, const std::function<void(nlohmann::json&)>& body) {
    nlohmann::json entry{{"name", name}, {"artifacts", nlohmann::json::array()}, {"values", nlohmann::json::object()}};
    if (!enabled) {
      entry["status"] = "skipped";
    } else {
      log << "[" << name << "]\n";
      try {
        body(entry);
      } catch (...) {
        detail::rethrow_in_stage(name);
      }
      entry["status"] = "ok";
    }
    manifest["stages"].push_back(entry);
  };
  auto artifact = [&](nlohmann::json& entry, const std::string& name, const std::string& kind) {
    entry["artifacts"].push_back({{"path", out_path(name).string()}, {"kind", kind}});
  };

  std::optional<RasterGrid> dem;
  std::optional<RasterGrid> reference;
  auto load_dem = [&] {
    if (!dem) dem = read_grid(cfg.initial_dem);
  };
  auto load_reference = [&] {
    if (!reference) reference = read_grid(cfg.reference_dem);
  };

  run_stage("align", cfg.run_align, [&](nlohmann::json& e) {
    load_dem();
    load_reference();
    VerticalAlignment va = vertical_align(*dem, *reference);
    dem = std::move(va.aligned);
    write_grid(*dem, out_path("z0_aligned.asc"));
    artifact(e, "z0_aligned.asc", "dem");
    e["values"] = {{"offset_m", va.offset}, {"rms_after_m", va.rms_after}, {"overlap_px", va.overlap}};
  });

  run_stage("blend", cfg.run_blend, [&](nlohmann::json& e) {
    load_dem();
    load_reference();
    const std::size_t gaps_before = dem->size() - dem->count_valid();
    dem = priority_blend(*dem, *reference);
    write_grid(*dem, out_path("z0_blended.asc"));
    artifact(e, "z0_blended.asc", "dem");
    e["values"] = {{"gaps_before_px", gaps_before}, {"gaps_after_px", dem->size() - dem->count_valid()}};
  });

  run_stage("infill", cfg.run_infill, [&](nlohmann::json& e) {
    load_dem();
    InfillResult ir = infill_gaps(*dem, cfg.infill);
    dem = std::move(ir.dem);
    write_grid(*dem, out_path("z0_filled.asc"));
    artifact(e, "z0_filled.asc", "dem");
    e["values"] = {{"iterations", ir.iterations}, {"max_residual_m", ir.max_residual}};
  });

  std::optional<MapProjection> mp;
  run_stage("mapproject", true, [&](nlohmann::json& e) {
    load_dem();
    const AffineCamera cam = read_camera(cfg.camera);
    const RasterGrid image = read_grid(cfg.image);
    mp = mapproject(image, cam, *dem);
    write_grid(mp->image, out_path("image_mapprojected.asc"));
    RasterGrid fp = RasterGrid::like(*dem, 0.0);
    for (std::size_t r = 0; r < fp.rows(); ++r)
      for (std::size_t c = 0; c < fp.cols(); ++c) fp(r, c) = mp->footprint(r, c) ? 1.0 : 0.0;
    write_grid(fp, out_path("footprint.pgm"));
    artifact(e, "image_mapprojected.asc", "image");
    artifact(e, "footprint.pgm", "mask");
    e["values"] = {{"footprint_fraction", mp->footprint_fraction}};
  });

  IlluminationGeometry shading;
  run_stage("geomcheck", true, [&](nlohmann::json& e) {
    const IlluminationGeometry s1 = read_geometry(cfg.stereo1_geometry);
    const IlluminationGeometry s2 = read_geometry(cfg.stereo2_geometry);
    shading = read_geometry(cfg.shading_geometry);
    const GeometrySuitability gs = geometry_diagnostics(s1, s2, shading, mp->footprint_fraction, cfg.thresholds);
    result.verdict = gs.verdict;
    e["values"] = {{"delta_incidence_deg", gs.delta_incidence},
                   {"delta_pitch_deg", gs.delta_pitch},
                   {"footprint_fraction", gs.footprint_fraction},
                   {"verdict", to_string(gs.verdict)}};
    if (gs.verdict == Verdict::Unsuitable) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "WARNING: acquisition geometry is unsuitable for SfS (delta pitch %.2f deg, footprint %.2f); "
                    "continuing",
                    gs.delta_pitch, gs.footprint_fraction);
      log << buf << '\n';
      manifest["warnings"].push_back(buf);
    }
  });

  std::optional<SfsResult> sfs;
  run_stage("sfs", true, [&](nlohmann::json& e) {
    if (dem->has_nodata()) throw InputError("initial DEM still has gaps; enable infill");
    if (cfg.tile_size) {
      const TileScheme scheme = plan_tiles(dem->rows(), dem->cols(), *cfg.tile_size, cfg.tile_overlap);
      sfs = solve_tiled(*dem, mp->image, mp->footprint, shading, cfg.sfs, scheme, cfg.workers);
    } else {
      sfs = solve(*dem, mp->image, mp->footprint, shading, cfg.sfs);
    }
    write_grid(sfs->z_sfs, out_path("z_sfs.asc"));
    write_energy_trace(sfs->energy_trace, out_path("energy.csv"));
    write_grid(stretch_to_unit(solver_reflectance(sfs->z_sfs, shading, cfg.sfs.albedo)), out_path("rendered.pgm"));
    artifact(e, "z_sfs.asc", "dem");
    artifact(e, "energy.csv", "trace");
    artifact(e, "rendered.pgm", "image");
    const EnergyBreakdown& last = sfs->energy_trace.back();
    e["values"] = {{"iterations", sfs->iterations_run}, {"converged", sfs->converged},
                   {"energy_initial", sfs->energy_trace.front().total}, {"energy_final", last.total},
                   {"gain", last.gain}, {"bias", last.bias}};
  });

  run_stage("metrics", true, [&](nlohmann::json& e) {
    const HeightDifference hd = height_difference(sfs->z_sfs, *dem);
    write_grid(hd.dz, out_path("dz.asc"));
    artifact(e, "dz.asc", "dem");
    const EnergyBreakdown& last = sfs->energy_trace.back();
    const double eps0 =
        photometric_residual(*dem, mp->image, mp->footprint, shading, cfg.sfs.albedo, last.gain, last.bias);
    const double eps1 =
        photometric_residual(sfs->z_sfs, mp->image, mp->footprint, shading, cfg.sfs.albedo, last.gain, last.bias);
    nlohmann::json v{{"dz_mean_m", hd.summary.mean}, {"dz_rms_m", hd.summary.rms},
                     {"dz_min_m", hd.summary.min},   {"dz_max_m", hd.summary.max},
                     {"eps_R_initial", eps0},         {"eps_R_final", eps1}};
    try {
      v["sigma_s_initial_deg"] = slope_stddev(*dem, mp->footprint).sigma_s;
      v["sigma_s_final_deg"] = slope_stddev(sfs->z_sfs, mp->footprint).sigma_s;
      v["delta_sigma_s_pct"] = delta_sigma_pct(sfs->z_sfs, *dem, &mp->footprint);
    } catch (const Error& err) {
      manifest["warnings"].push_back(std::string("slope statistics unavailable: ") + err.what());
    }
    e["values"] = v;
  });

  result.manifest_path = out_path("manifest.json");
  std::ofstream out(result.manifest_path);
  if (!out) throw InputError("cannot write '" + result.manifest_path.string() + "'");
  out << manifest.dump(2) << '\n';
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace lunarsfs
