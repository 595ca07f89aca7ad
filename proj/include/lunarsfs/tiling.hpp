#pragma once

// Tile-parallel SfS. Tiles are solved independently and merged with separable
// linear feather weights in a fixed order, so the output does not depend on
// the number of workers.

#include <lunarsfs/error.hpp>
#include <lunarsfs/raster.hpp>
#include <lunarsfs/sfs_solver.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace lunarsfs {

struct TileWindow {
  std::size_t row0 = 0;
  std::size_t col0 = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  bool operator==(const TileWindow&) const = default;
};

struct TileScheme {
  std::size_t tile_size = 0;
  std::size_t overlap = 0;
  std::vector<TileWindow> tiles;  // row-major
};

namespace detail {

// Windows [start, end) along one axis: starts at multiples of tile - overlap,
// the last window truncated at the grid edge.
inline std::vector<std::pair<std::size_t, std::size_t>> plan_axis(std::size_t n, std::size_t tile,
                                                                  std::size_t overlap) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t step = tile - overlap;
  for (std::size_t start = 0;; start += step) {
    std::size_t end = std::min(start + tile, n);
    if (end - start < 2) {
      // Never leave a sliver too small to be a grid.
      start = end - 2;
    }
    out.emplace_back(start, end);
    if (end == n) break;
  }
  return out;
}

// Weight along one axis for local index j of a window overlapping its
// neighbours by `before` and `after` pixels.
inline double feather(std::size_t j, std::size_t len, std::size_t before, std::size_t after) {
  double w = 1.0;
  if (before > 0 && j < before) w = std::min(w, (static_cast<double>(j) + 0.5) / static_cast<double>(before));
  if (after > 0 && j >= len - after)
    w = std::min(w, (static_cast<double>(len - j) - 0.5) / static_cast<double>(after));
  return w;
}

inline RasterGrid crop(const RasterGrid& g, const TileWindow& t) {
  const double cs = g.cell_size();
  RasterGrid out(t.rows, t.cols, cs, g.origin_x() + static_cast<double>(t.col0) * cs,
                 g.origin_y() + static_cast<double>(g.rows() - t.row0 - t.rows) * cs, g.nodata_value());
  for (std::size_t r = 0; r < t.rows; ++r)
    for (std::size_t c = 0; c < t.cols; ++c) out(r, c) = g(t.row0 + r, t.col0 + c);
  return out;
}

inline ValidMask crop(const ValidMask& m, const TileWindow& t) {
  ValidMask out(t.rows, t.cols);
  for (std::size_t r = 0; r < t.rows; ++r)
    for (std::size_t c = 0; c < t.cols; ++c) out.set(r, c, m(t.row0 + r, t.col0 + c));
  return out;
}

}  // namespace detail

inline TileScheme plan_tiles(std::size_t rows, std::size_t cols, std::size_t tile_size, std::size_t overlap) {
  if (rows < 2 || cols < 2) throw InputError("plan_tiles: grid must be at least 2x2");
  if (tile_size < 3 || tile_size <= 2 * overlap)
    throw InputError("plan_tiles: tile size must exceed twice the overlap (tile " + std::to_string(tile_size) +
                     ", overlap " + std::to_string(overlap) + ")");
  TileScheme s{tile_size, overlap, {}};
  const auto rw = detail::plan_axis(rows, tile_size, overlap);
  const auto cw = detail::plan_axis(cols, tile_size, overlap);
  for (const auto& [r0, r1] : rw)
    for (const auto& [c0, c1] : cw) s.tiles.push_back({r0, c0, r1 - r0, c1 - c0});
  return s;
}

/// Per-pixel feather weights of every tile, each tile-sized and row-major.
inline std::vector<std::vector<double>> feather_weights(const TileScheme& s) {
  std::vector<std::vector<double>> out;
  out.reserve(s.tiles.size());
  for (const TileWindow& t : s.tiles) {
    // Overlap with the neighbouring windows along each axis.
    std::size_t up = 0, down = 0, left = 0, right = 0;
    for (const TileWindow& o : s.tiles) {
      if (o.col0 == t.col0 && o.row0 < t.row0 && o.row0 + o.rows > t.row0)
        up = std::max(up, o.row0 + o.rows - t.row0);
      if (o.col0 == t.col0 && o.row0 > t.row0 && o.row0 < t.row0 + t.rows)
        down = std::max(down, t.row0 + t.rows - o.row0);
      if (o.row0 == t.row0 && o.col0 < t.col0 && o.col0 + o.cols > t.col0)
        left = std::max(left, o.col0 + o.cols - t.col0);
      if (o.row0 == t.row0 && o.col0 > t.col0 && o.col0 < t.col0 + t.cols)
        right = std::max(right, t.col0 + t.cols - o.col0);
    }
    std::vector<double> w(t.rows * t.cols);
    for (std::size_t r = 0; r < t.rows; ++r) {
      const double wr = detail::feather(r, t.rows, up, down);
      for (std::size_t c = 0; c < t.cols; ++c) w[r * t.cols + c] = wr * detail::feather(c, t.cols, left, right);
    }
    out.push_back(std::move(w));
  }
  return out;
}

/// Solves every tile with `workers` threads and feather-merges the results.
/// The returned trace holds the full-grid energy of z0 and of the merged field.
inline SfsResult solve_tiled(const RasterGrid& z0, const RasterGrid& image, const ValidMask& footprint,
                             const IlluminationGeometry& geom, const SfsConfig& cfg, const TileScheme& scheme,
                             std::size_t workers = 1) {
  if (scheme.tiles.empty()) throw InputError("solve_tiled: empty tile scheme");
  if (scheme.tiles.size() == 1 && scheme.tiles[0] == TileWindow{0, 0, z0.rows(), z0.cols()})
    return solve(z0, image, footprint, geom, cfg);
  require_same_geometry(z0, image, "solve_tiled");
  if (!footprint.matches(z0)) throw InputError("solve_tiled: footprint size does not match the DEM");

  const std::size_t n = scheme.tiles.size();
  std::vector<SfsResult> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        const TileWindow& t = scheme.tiles[k];
        results[k] = solve(detail::crop(z0, t), detail::crop(image, t), detail::crop(footprint, t), geom, cfg);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, n);
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < workers; ++i) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  for (std::size_t k = 0; k < n; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const Error& e) {
      throw NumericalError("tile " + std::to_string(k) + ": " + e.what());
    }
  }

  const auto weights = feather_weights(scheme);
  std::vector<double> acc(z0.size(), 0.0), wsum(z0.size(), 0.0);
  SfsResult out{RasterGrid::like(z0), 0, {}, true, footprint, "tiled"};
  for (std::size_t k = 0; k < n; ++k) {
    const TileWindow& t = scheme.tiles[k];
    const RasterGrid& z = results[k].z_sfs;
    for (std::size_t r = 0; r < t.rows; ++r) {
      for (std::size_t c = 0; c < t.cols; ++c) {
        const std::size_t i = (t.row0 + r) * z0.cols() + t.col0 + c;
        const double w = weights[k][r * t.cols + c];
        acc[i] += w * z(r, c);
        wsum[i] += w;
      }
    }
    out.iterations_run = std::max(out.iterations_run, results[k].iterations_run);
    out.converged = out.converged && results[k].converged;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) out.z_sfs.values()[i] = acc[i] / wsum[i];

  out.energy_trace.push_back(energy(z0, image, footprint, z0, geom, cfg));
  out.energy_trace.push_back(energy(out.z_sfs, image, footprint, z0, geom, cfg));
  return out;
}

}  // namespace lunarsfs
