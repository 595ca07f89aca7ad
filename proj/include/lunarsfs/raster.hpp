#pragma once

// Raster grid data model, validity masks, bilinear resampling and ASC/PGM I/O.
//
// Conventions: row 0 is the northern (top) row; the world origin is the
// lower-left corner of the grid. Pixel (r, c) has its center at
//   x = origin_x + (c + 0.5) * cell_size
//   y = origin_y + (rows - 1 - r + 0.5) * cell_size

#include <lunarsfs/error.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace lunarsfs {

inline constexpr double kDefaultNodata = -9999.0;

struct WorldPoint {
  double x = 0.0;
  double y = 0.0;
};

// Fractional pixel-center coordinates: (0, 0) is the center of pixel (0, 0).
struct PixelPoint {
  double row = 0.0;
  double col = 0.0;
};

class RasterGrid {
 public:
  RasterGrid() = default;

  RasterGrid(std::size_t rows, std::size_t cols, double cell_size, double origin_x = 0.0,
             double origin_y = 0.0, double nodata_value = kDefaultNodata, double fill = 0.0)
      : rows_(rows),
        cols_(cols),
        cell_size_(cell_size),
        origin_x_(origin_x),
        origin_y_(origin_y),
        nodata_(nodata_value),
        values_(rows * cols, fill) {
    if (rows < 2 || cols < 2) throw InputError("raster must be at least 2x2");
    if (!(cell_size > 0.0) || !std::isfinite(cell_size))
      throw InputError("raster cell size must be positive");
    if (!std::isfinite(nodata_value)) throw InputError("nodata value must be finite");
  }

  // Same geotransform and nodata sentinel as `like`, every sample set to `fill`.
  static RasterGrid like(const RasterGrid& other, double fill = 0.0) {
    return RasterGrid(other.rows_, other.cols_, other.cell_size_, other.origin_x_,
                      other.origin_y_, other.nodata_, fill);
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  double cell_size() const { return cell_size_; }
  double cell_area() const { return cell_size_ * cell_size_; }
  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }
  double nodata_value() const { return nodata_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  double& at(std::size_t r, std::size_t c) {
    check_index(r, c);
    return (*this)(r, c);
  }
  double at(std::size_t r, std::size_t c) const {
    check_index(r, c);
    return (*this)(r, c);
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  // Exact bit comparison against the sentinel.
  bool is_nodata(double v) const {
    return std::bit_cast<std::uint64_t>(v) == std::bit_cast<std::uint64_t>(nodata_);
  }
  bool valid(std::size_t r, std::size_t c) const { return !is_nodata((*this)(r, c)); }
  void set_nodata(std::size_t r, std::size_t c) { (*this)(r, c) = nodata_; }

  std::size_t count_valid() const {
    return static_cast<std::size_t>(
        std::count_if(values_.begin(), values_.end(), [&](double v) { return !is_nodata(v); }));
  }
  bool has_nodata() const { return count_valid() != values_.size(); }

  WorldPoint world_of(std::size_t r, std::size_t c) const {
    return {origin_x_ + (static_cast<double>(c) + 0.5) * cell_size_,
            origin_y_ + (static_cast<double>(rows_ - 1 - r) + 0.5) * cell_size_};
  }

  PixelPoint pixel_of(double x, double y) const {
    return {static_cast<double>(rows_ - 1) - ((y - origin_y_) / cell_size_ - 0.5),
            (x - origin_x_) / cell_size_ - 0.5};
  }

  double width_m() const { return static_cast<double>(cols_) * cell_size_; }
  double height_m() const { return static_cast<double>(rows_) * cell_size_; }

  bool same_geometry(const RasterGrid& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && cell_size_ == o.cell_size_ &&
           origin_x_ == o.origin_x_ && origin_y_ == o.origin_y_;
  }

  // Throws if any sample is neither finite nor the sentinel.
  void validate() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]) && !is_nodata(values_[i]))
        throw InputError("non-finite sample at index " + std::to_string(i));
    }
  }

  friend bool operator==(const RasterGrid& a, const RasterGrid& b) {
    if (!a.same_geometry(b) || !(a.nodata_ == b.nodata_)) return false;
    for (std::size_t i = 0; i < a.values_.size(); ++i) {
      if (std::bit_cast<std::uint64_t>(a.values_[i]) != std::bit_cast<std::uint64_t>(b.values_[i]))
        return false;
    }
    return true;
  }

 private:
  void check_index(std::size_t r, std::size_t c) const {
    if (r >= rows_ || c >= cols_) throw std::out_of_range("raster index out of range");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  double cell_size_ = 1.0;
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  double nodata_ = kDefaultNodata;
  std::vector<double> values_;
};

inline void require_same_geometry(const RasterGrid& a, const RasterGrid& b, std::string_view what) {
  if (!a.same_geometry(b)) throw InputError(std::string(what) + ": geotransform mismatch");
}

/// Boolean companion of a grid; true marks a valid sample.
class ValidMask {
 public:
  ValidMask() = default;
  ValidMask(std::size_t rows, std::size_t cols, bool fill = false)
      : rows_(rows), cols_(cols), bits_(rows * cols, fill ? 1 : 0) {}

  explicit ValidMask(const RasterGrid& grid) : ValidMask(grid.rows(), grid.cols()) {
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) set(r, c, grid.valid(r, c));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool operator()(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { bits_[r * cols_ + c] = v ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  double fraction() const {
    return bits_.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(bits_.size());
  }
  bool matches(const RasterGrid& g) const { return rows_ == g.rows() && cols_ == g.cols(); }

  ValidMask operator&(const ValidMask& o) const {
    ValidMask out(rows_, cols_);
    for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] & o.bits_[i];
    return out;
  }
  friend bool operator==(const ValidMask&, const ValidMask&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

// ---------------------------------------------------------------------------
// Resampling

/// Bilinear interpolation at fractional pixel-center coordinates. Returns
/// nullopt outside the hull of pixel centers or when any pixel carrying a
/// nonzero weight is nodata.
inline std::optional<double> sample_pixel(const RasterGrid& g, double row, double col) {
  const double max_r = static_cast<double>(g.rows() - 1);
  const double max_c = static_cast<double>(g.cols() - 1);
  if (!(row >= 0.0 && row <= max_r && col >= 0.0 && col <= max_c)) return std::nullopt;
  auto r0 = static_cast<std::size_t>(std::floor(row));
  auto c0 = static_cast<std::size_t>(std::floor(col));
  r0 = std::min(r0, g.rows() - 2);
  c0 = std::min(c0, g.cols() - 2);
  const double tr = row - static_cast<double>(r0);
  const double tc = col - static_cast<double>(c0);
  const double w[4] = {(1 - tr) * (1 - tc), (1 - tr) * tc, tr * (1 - tc), tr * tc};
  const std::size_t rr[4] = {r0, r0, r0 + 1, r0 + 1};
  const std::size_t cc[4] = {c0, c0 + 1, c0, c0 + 1};
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (w[k] == 0.0) continue;
    if (!g.valid(rr[k], cc[k])) return std::nullopt;
    acc += w[k] * g(rr[k], cc[k]);
  }
  return acc;
}

/// Bilinear interpolation at world coordinates (meters).
inline std::optional<double> bilinear_sample(const RasterGrid& g, double x, double y) {
  const PixelPoint p = g.pixel_of(x, y);
  return sample_pixel(g, p.row, p.col);
}

// ---------------------------------------------------------------------------
// File I/O

enum class RasterFormat { Asc, Pgm };

inline RasterFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".asc") return RasterFormat::Asc;
  if (ext == ".pgm") return RasterFormat::Pgm;
  throw InputError("cannot infer raster format from '" + path.string() + "' (expected .asc or .pgm)");
}

namespace detail {

inline double parse_number(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw ParseError("non-numeric token '" + std::string(tok) + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + std::string(tok) + "'", line);
  return v;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return out;
}

}  // namespace detail

inline RasterGrid parse_asc(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  long long ncols = -1, nrows = -1;
  std::optional<double> xll, yll, cell, nodata;

  // Header: key/value lines until the first line starting with a number.
  std::vector<std::string_view> first_data;
  std::string pending;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    const char c0 = toks[0][0];
    if (std::isdigit(static_cast<unsigned char>(c0)) || c0 == '-' || c0 == '+' || c0 == '.') {
      pending = line;
      break;
    }
    if (toks.size() != 2) throw ParseError("malformed header line '" + line + "'", lineno);
    const std::string key = detail::lower(toks[0]);
    const double v = detail::parse_number(toks[1], lineno);
    if (key == "ncols") {
      ncols = static_cast<long long>(v);
      if (static_cast<double>(ncols) != v) throw ParseError("ncols must be an integer", lineno);
    } else if (key == "nrows") {
      nrows = static_cast<long long>(v);
      if (static_cast<double>(nrows) != v) throw ParseError("nrows must be an integer", lineno);
    } else if (key == "xllcorner") {
      xll = v;
    } else if (key == "yllcorner") {
      yll = v;
    } else if (key == "cellsize") {
      cell = v;
    } else if (key == "nodata_value") {
      nodata = v;
    } else {
      throw ParseError("unknown header key '" + std::string(toks[0]) + "'", lineno);
    }
  }
  if (ncols < 2 || nrows < 2) throw ParseError("header needs ncols >= 2 and nrows >= 2", lineno);
  if (!xll || !yll || !cell) throw ParseError("header missing xllcorner/yllcorner/cellsize", lineno);
  if (!(*cell > 0.0)) throw ParseError("cellsize must be positive", lineno);

  RasterGrid g(static_cast<std::size_t>(nrows), static_cast<std::size_t>(ncols), *cell, *xll, *yll,
               nodata.value_or(kDefaultNodata));
  std::size_t r = 0;
  bool have_line = !pending.empty();
  while (have_line || std::getline(in, line)) {
    if (have_line) {
      line = pending;
      have_line = false;
    } else {
      ++lineno;
    }
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (r >= g.rows()) throw ParseError("more data rows than nrows", lineno);
    if (toks.size() != g.cols())
      throw ParseError("row has " + std::to_string(toks.size()) + " values, expected " +
                           std::to_string(g.cols()),
                       lineno);
    for (std::size_t c = 0; c < toks.size(); ++c) g(r, c) = detail::parse_number(toks[c], lineno);
    ++r;
  }
  if (r != g.rows())
    throw ParseError("expected " + std::to_string(g.rows()) + " data rows, found " + std::to_string(r),
                     lineno);
  return g;
}

inline void format_asc(const RasterGrid& g, std::ostream& out, int precision = 6) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return std::string(buf);
  };
  auto exact = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "ncols " << g.cols() << "\n"
      << "nrows " << g.rows() << "\n"
      << "xllcorner " << exact(g.origin_x()) << "\n"
      << "yllcorner " << exact(g.origin_y()) << "\n"
      << "cellsize " << exact(g.cell_size()) << "\n"
      << "nodata_value " << exact(g.nodata_value()) << "\n";
  std::string row;
  for (std::size_t r = 0; r < g.rows(); ++r) {
    row.clear();
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (c) row += ' ';
      // The sentinel is always written exactly so it survives the round trip.
      row += g.valid(r, c) ? num(g(r, c)) : exact(g.nodata_value());
    }
    out << row << "\n";
  }
}

/// Binary P5. Maxval below 256 stores one byte per sample, otherwise two
/// bytes big-endian. Samples are returned as value / maxval.
inline RasterGrid parse_pgm(std::istream& in) {
  std::size_t lineno = 1;
  auto next_token = [&]() {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
      if (ch == '#') {
        while ((ch = in.get()) != EOF && ch != '\n') {
        }
        ++lineno;
        continue;
      }
      if (std::isspace(ch)) {
        if (ch == '\n') ++lineno;
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw ParseError("truncated PGM header", lineno);
    return tok;
  };
  if (next_token() != "P5") throw ParseError("not a binary PGM (expected P5)", 1);
  const std::size_t header_line = lineno;
  const double w = detail::parse_number(next_token(), header_line);
  const double h = detail::parse_number(next_token(), lineno);
  const double maxval = detail::parse_number(next_token(), lineno);
  if (w < 2 || h < 2 || w != std::floor(w) || h != std::floor(h))
    throw ParseError("PGM dimensions must be integers >= 2", header_line);
  if (maxval < 1 || maxval > 65535 || maxval != std::floor(maxval))
    throw ParseError("PGM maxval must be in [1, 65535]", lineno);
  RasterGrid g(static_cast<std::size_t>(h), static_cast<std::size_t>(w), 1.0);
  const bool wide = maxval > 255;
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      unsigned v = 0;
      int b0 = in.get();
      if (b0 == EOF) throw ParseError("truncated PGM pixel data", lineno);
      v = static_cast<unsigned>(b0);
      if (wide) {
        int b1 = in.get();
        if (b1 == EOF) throw ParseError("truncated PGM pixel data", lineno);
        v = (v << 8) | static_cast<unsigned>(b1);
      }
      g(r, c) = static_cast<double>(v) / maxval;
    }
  }
  return g;
}

/// Intensities are clamped to [0, 1] and quantized to `maxval` steps.
inline void format_pgm(const RasterGrid& g, std::ostream& out, unsigned maxval = 255) {
  if (maxval < 1 || maxval > 65535) throw InputError("PGM maxval must be in [1, 65535]");
  if (g.has_nodata()) throw InputError("nodata in image output");
  out << "P5\n" << g.cols() << " " << g.rows() << "\n" << maxval << "\n";
  const bool wide = maxval > 255;
  for (double v : g.values()) {
    const double s = std::clamp(v, 0.0, 1.0) * maxval;
    const auto q = static_cast<unsigned>(std::lround(s));
    if (wide) out.put(static_cast<char>((q >> 8) & 0xff));
    out.put(static_cast<char>(q & 0xff));
  }
}

inline RasterGrid read_grid(const std::filesystem::path& path, RasterFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return format == RasterFormat::Asc ? parse_asc(in) : parse_pgm(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.message(), e.line());
  }
}

inline RasterGrid read_grid(const std::filesystem::path& path) {
  return read_grid(path, format_from_path(path));
}

struct WriteOptions {
  int asc_precision = 6;  // significant digits
  unsigned pgm_maxval = 255;
};

inline void write_grid(const RasterGrid& g, const std::filesystem::path& path, RasterFormat format,
                       const WriteOptions& opt = {}) {
  g.validate();
  std::ostringstream buf(std::ios::binary);
  if (format == RasterFormat::Asc)
    format_asc(g, buf, opt.asc_precision);
  else
    format_pgm(g, buf, opt.pgm_maxval);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << buf.str();
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

inline void write_grid(const RasterGrid& g, const std::filesystem::path& path,
                       const WriteOptions& opt = {}) {
  write_grid(g, path, format_from_path(path), opt);
}

/// Linear stretch of the valid samples to [0, 1]; nodata becomes `fill`.
inline RasterGrid stretch_to_unit(const RasterGrid& g, double fill = 0.0) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : g.values()) {
    if (g.is_nodata(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  RasterGrid out = RasterGrid::like(g);
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = g.values()[i];
    out.values()[i] = g.is_nodata(v) ? fill : (v - lo) / span;
  }
  return out;
}

}  // namespace lunarsfs
