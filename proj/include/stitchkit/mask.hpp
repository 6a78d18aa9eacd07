#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "stitchkit/error.hpp"

namespace stitchkit {

struct Pixel {
  int x = 0;
  int y = 0;

  bool operator==(const Pixel&) const = default;
};

// Ordering for deterministic tie-breaks: x first, then y.
inline bool lex_less(const Pixel& a, const Pixel& b) {
  if (a.x != b.x) return a.x < b.x;
  return a.y < b.y;
}

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height)
      : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, 0) {
    if (width <= 0 || height <= 0) fail(errc::invalid_params, "mask dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }

  // Out-of-bounds reads as background; used by neighborhood scans.
  bool at_or(int x, int y) const {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return false;
    return at(x, y);
  }

  void set(int x, int y, bool v) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  bool operator==(const BinaryMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Single-channel raster: gray intensity or depth in millimeters. Depth value
// 0 or a non-finite value marks invalid.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, double fill = 0.0)
      : width_(width), height_(height), values_(static_cast<std::size_t>(width) * height, fill) {
    if (width <= 0 || height <= 0) fail(errc::invalid_params, "raster dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }

  double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, double v) { values_[static_cast<std::size_t>(y) * width_ + x] = v; }

  static bool valid_depth(double v) { return std::isfinite(v) && v != 0.0; }

  Raster crop(int x0, int y0, int w, int h) const {
    Raster out(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.set(x, y, at(x0 + x, y0 + y));
    return out;
  }

  bool operator==(const Raster&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

// Replaces every masked pixel with the mean of the masked pixel values.
inline Raster flood_fill_average(const Raster& image, const BinaryMask& mask) {
  if (image.width() != mask.width() || image.height() != mask.height())
    fail(errc::dimension_mismatch, "image and mask dimensions differ");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      if (mask.at(x, y)) {
        sum += image.at(x, y);
        ++n;
      }
  Raster out = image;
  if (n == 0) return out;
  const double mean = sum / static_cast<double>(n);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      if (mask.at(x, y)) out.set(x, y, mean);
  return out;
}

namespace detail {

// 8-neighborhood in Zhang-Suen order: P2..P9, clockwise from north.
inline std::array<bool, 8> zs_neighbors(const BinaryMask& m, int x, int y) {
  return {m.at_or(x, y - 1),     m.at_or(x + 1, y - 1), m.at_or(x + 1, y),
          m.at_or(x + 1, y + 1), m.at_or(x, y + 1),     m.at_or(x - 1, y + 1),
          m.at_or(x - 1, y),     m.at_or(x - 1, y - 1)};
}

inline int zs_transitions(const std::array<bool, 8>& p) {
  int a = 0;
  for (int i = 0; i < 8; ++i)
    if (!p[i] && p[(i + 1) % 8]) ++a;
  return a;
}

// Flood labels for 8-connected components; label 0 = background.
inline std::vector<int> label_components(const BinaryMask& m, int* n_labels) {
  std::vector<int> labels(static_cast<std::size_t>(m.width()) * m.height(), 0);
  int next = 0;
  std::vector<Pixel> stack;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y) || labels[static_cast<std::size_t>(y) * m.width() + x] != 0) continue;
      ++next;
      stack.push_back({x, y});
      labels[static_cast<std::size_t>(y) * m.width() + x] = next;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx, ny = p.y + dy;
            if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height()) continue;
            auto& l = labels[static_cast<std::size_t>(ny) * m.width() + nx];
            if (m.at(nx, ny) && l == 0) {
              l = next;
              stack.push_back({nx, ny});
            }
          }
        }
      }
    }
  }
  *n_labels = next;
  return labels;
}

}  // namespace detail

// Zhang-Suen thinning: two subiterations per pass, deletions applied
// simultaneously, repeated until stable. Plain Zhang-Suen annihilates tiny
// blobs (a 2x2 square deletes in one subpass), so any input component whose
// pixels would all vanish keeps its lexicographically smallest pixel; every
// input component then maps to exactly one non-empty output component.
inline BinaryMask skeletonize(const BinaryMask& mask) {
  BinaryMask cur = mask;
  bool changed = true;
  std::vector<Pixel> deletions;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      deletions.clear();
      for (int y = 0; y < cur.height(); ++y) {
        for (int x = 0; x < cur.width(); ++x) {
          if (!cur.at(x, y)) continue;
          const auto p = detail::zs_neighbors(cur, x, y);
          int b = 0;
          for (bool v : p) b += v;
          if (b < 2 || b > 6) continue;
          if (detail::zs_transitions(p) != 1) continue;
          // p[0]=P2 p[2]=P4 p[4]=P6 p[6]=P8
          const bool c1 = pass == 0 ? !(p[0] && p[2] && p[4]) : !(p[0] && p[2] && p[6]);
          const bool c2 = pass == 0 ? !(p[2] && p[4] && p[6]) : !(p[0] && p[4] && p[6]);
          if (c1 && c2) deletions.push_back({x, y});
        }
      }
      for (const Pixel& d : deletions) cur.set(d.x, d.y, false);
      changed = changed || !deletions.empty();
    }
  }

  int n_labels = 0;
  const auto labels = detail::label_components(mask, &n_labels);
  if (n_labels > 0) {
    std::vector<bool> survives(static_cast<std::size_t>(n_labels) + 1, false);
    for (int y = 0; y < cur.height(); ++y)
      for (int x = 0; x < cur.width(); ++x)
        if (cur.at(x, y)) survives[labels[static_cast<std::size_t>(y) * cur.width() + x]] = true;
    // Restore in lexicographic scan order: the first pixel seen per lost label.
    for (int x = 0; x < cur.width(); ++x) {
      for (int y = 0; y < cur.height(); ++y) {
        const int l = mask.at(x, y) ? labels[static_cast<std::size_t>(y) * cur.width() + x] : 0;
        if (l != 0 && !survives[l]) {
          cur.set(x, y, true);
          survives[l] = true;
        }
      }
    }
  }
  return cur;
}

// Otsu threshold over the valid depth values; the mask selects the nearer
// (smaller-depth) class. Invalid pixels (0 / non-finite) never selected.
inline BinaryMask adaptive_depth_threshold(const Raster& crop) {
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();
  std::size_t n_valid = 0;
  bool two_distinct = false;
  double first = 0.0;
  for (int y = 0; y < crop.height(); ++y) {
    for (int x = 0; x < crop.width(); ++x) {
      const double v = crop.at(x, y);
      if (!Raster::valid_depth(v)) continue;
      if (n_valid == 0) first = v;
      else if (v != first) two_distinct = true;
      ++n_valid;
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  }
  if (n_valid < 2 || !two_distinct)
    fail(errc::no_contrast, "need at least 2 distinct valid depth values");

  constexpr int kBins = 256;
  const double scale = kBins / (vmax - vmin);
  auto bin_of = [&](double v) {
    return std::min(kBins - 1, static_cast<int>((v - vmin) * scale));
  };
  std::array<double, kBins> count{}, sum{};
  for (int y = 0; y < crop.height(); ++y) {
    for (int x = 0; x < crop.width(); ++x) {
      const double v = crop.at(x, y);
      if (!Raster::valid_depth(v)) continue;
      const int b = bin_of(v);
      count[b] += 1.0;
      sum[b] += v;
    }
  }
  const double total_count = static_cast<double>(n_valid);
  double total_sum = 0.0;
  for (double s : sum) total_sum += s;

  int best_t = -1;
  double best_score = -1.0;
  double w0 = 0.0, s0 = 0.0;
  for (int t = 0; t < kBins - 1; ++t) {
    w0 += count[t];
    s0 += sum[t];
    const double w1 = total_count - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = s0 / w0;
    const double mu1 = (total_sum - s0) / w1;
    const double score = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (score > best_score) {
      best_score = score;
      best_t = t;
    }
  }
  if (best_t < 0) fail(errc::no_contrast, "all valid values fall in one bin");

  BinaryMask out(crop.width(), crop.height());
  for (int y = 0; y < crop.height(); ++y) {
    for (int x = 0; x < crop.width(); ++x) {
      const double v = crop.at(x, y);
      if (Raster::valid_depth(v) && bin_of(v) <= best_t) out.set(x, y, true);
    }
  }
  return out;
}

// Skeleton endpoint (exactly one foreground 8-neighbor) nearest to the hint.
inline Pixel tip_pixel(const BinaryMask& skeleton, const Pixel& hint) {
  Pixel best{0, 0};
  long best_d2 = -1;
  for (int y = 0; y < skeleton.height(); ++y) {
    for (int x = 0; x < skeleton.width(); ++x) {
      if (!skeleton.at(x, y)) continue;
      int degree = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if ((dx || dy) && skeleton.at_or(x + dx, y + dy)) ++degree;
      if (degree != 1) continue;
      const long dx = x - hint.x, dy = y - hint.y;
      const long d2 = dx * dx + dy * dy;
      if (best_d2 < 0 || d2 < best_d2 || (d2 == best_d2 && lex_less({x, y}, best))) {
        best_d2 = d2;
        best = {x, y};
      }
    }
  }
  if (best_d2 < 0) fail(errc::no_endpoint, "skeleton has no endpoint (empty or closed loop)");
  return best;
}

}  // namespace stitchkit
