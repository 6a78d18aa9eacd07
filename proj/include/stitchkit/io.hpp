#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "stitchkit/error.hpp"
#include "stitchkit/geom.hpp"
#include "stitchkit/mask.hpp"

namespace stitchkit {

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot write " + path);
  return out;
}

}  // namespace detail

// ---- point clouds: CSV with "x,y,z" header, millimeters ----

inline void write_cloud_csv(const std::string& path, std::span<const Point3> cloud) {
  auto out = detail::open_out(path);
  out << "x,y,z\n";
  for (const Point3& p : cloud)
    out << detail::format_double(p.x()) << ',' << detail::format_double(p.y()) << ','
        << detail::format_double(p.z()) << '\n';
}

inline std::vector<Point3> read_cloud_csv(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) fail(errc::io_error, "empty cloud file " + path);
  std::vector<Point3> cloud;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double x, y, z;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &z) != 3)
      fail(errc::io_error, "bad CSV row in " + path + ": " + line);
    cloud.emplace_back(x, y, z);
  }
  return cloud;
}

// ---- point clouds: ASCII PLY, element vertex with float x y z ----

inline void write_cloud_ply(const std::string& path, std::span<const Point3> cloud) {
  auto out = detail::open_out(path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\nend_header\n";
  for (const Point3& p : cloud) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
    out << buf;
  }
}

inline std::vector<Point3> read_cloud_ply(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::getline(in, line);
  if (line != "ply") fail(errc::io_error, path + " is not a PLY file");
  std::size_t n_vertices = 0;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (tok == "element") {
      std::string what;
      ls >> what >> n_vertices;
      if (what != "vertex") fail(errc::io_error, "unsupported PLY element: " + what);
    } else if (tok == "end_header") {
      break;
    }
  }
  if (!ascii) fail(errc::io_error, "only ASCII PLY is supported");
  std::vector<Point3> cloud;
  cloud.reserve(n_vertices);
  for (std::size_t i = 0; i < n_vertices; ++i) {
    double x, y, z;
    if (!(in >> x >> y >> z)) fail(errc::io_error, "short PLY vertex list in " + path);
    cloud.emplace_back(x, y, z);
  }
  return cloud;
}

// Dispatch on extension (.csv / .ply).
inline std::vector<Point3> read_cloud(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".ply") return read_cloud_ply(path);
  return read_cloud_csv(path);
}

inline void write_cloud(const std::string& path, std::span<const Point3> cloud) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".ply") return write_cloud_ply(path, cloud);
  return write_cloud_csv(path, cloud);
}

// ---- masks and gray rasters: PGM (P2 ASCII / P5 binary) ----

inline void write_mask_pgm(const std::string& path, const BinaryMask& mask, bool binary = true) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) fail(errc::io_error, "cannot write " + path);
  out << (binary ? "P5" : "P2") << "\n" << mask.width() << " " << mask.height() << "\n255\n";
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (binary) {
        const unsigned char v = mask.at(x, y) ? 255 : 0;
        out.write(reinterpret_cast<const char*>(&v), 1);
      } else {
        out << (mask.at(x, y) ? 255 : 0) << (x + 1 == mask.width() ? '\n' : ' ');
      }
    }
  }
}

namespace detail {

inline int pgm_next_int(std::istream& in) {
  // skips whitespace and '#' comment lines
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = 0;
  if (!(in >> v)) fail(errc::io_error, "truncated PGM header");
  return v;
}

}  // namespace detail

inline Raster read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io_error, "cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") fail(errc::io_error, path + " is not a P2/P5 PGM");
  const int w = detail::pgm_next_int(in);
  const int h = detail::pgm_next_int(in);
  const int maxval = detail::pgm_next_int(in);
  if (maxval <= 0 || maxval > 255) fail(errc::io_error, "unsupported PGM maxval");
  Raster out(w, h);
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> row(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
      in.read(reinterpret_cast<char*>(row.data()), w);
      if (!in) fail(errc::io_error, "truncated P5 payload in " + path);
      for (int x = 0; x < w; ++x) out.set(x, y, row[x]);
    }
  } else {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.set(x, y, detail::pgm_next_int(in));
  }
  return out;
}

inline BinaryMask read_mask_pgm(const std::string& path) {
  const Raster r = read_pgm(path);
  BinaryMask mask(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x) mask.set(x, y, r.at(x, y) > 0.0);
  return mask;
}

// ---- depth rasters: ASCII CSV grid of millimeter values, nan/0 invalid ----

inline void write_depth_csv(const std::string& path, const Raster& depth) {
  auto out = detail::open_out(path);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double v = depth.at(x, y);
      if (std::isfinite(v)) out << detail::format_double(v);
      else out << "nan";
      out << (x + 1 == depth.width() ? '\n' : ',');
    }
  }
}

inline Raster read_depth_csv(const std::string& path) {
  auto in = detail::open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      if (cell == "nan" || cell == "NaN" || cell == "NAN")
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      else
        row.push_back(std::stod(cell));
    }
    if (!rows.empty() && row.size() != rows.front().size())
      fail(errc::io_error, "ragged depth grid in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(errc::io_error, "empty depth grid " + path);
  Raster out(static_cast<int>(rows.front().size()), static_cast<int>(rows.size()));
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.set(x, y, rows[y][x]);
  return out;
}

}  // namespace stitchkit
