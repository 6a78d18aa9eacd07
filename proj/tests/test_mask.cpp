#include "stitchkit/mask.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "stitchkit/rng.hpp"

using namespace stitchkit;

namespace {

using Cell = std::pair<int, int>;  // (x, y)

// Independent thinning oracle over a set-of-cells representation. Implements
// the same contract as skeletonize (Zhang-Suen + keep one pixel per component
// that would otherwise vanish) with none of the library code.
std::set<Cell> oracle_thin(const std::set<Cell>& in) {
  auto has = [](const std::set<Cell>& s, int x, int y) { return s.count({x, y}) != 0; };
  std::set<Cell> cur = in;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<Cell> kill;
      for (const auto& [x, y] : cur) {
        const bool p2 = has(cur, x, y - 1), p3 = has(cur, x + 1, y - 1), p4 = has(cur, x + 1, y),
                   p5 = has(cur, x + 1, y + 1), p6 = has(cur, x, y + 1), p7 = has(cur, x - 1, y + 1),
                   p8 = has(cur, x - 1, y), p9 = has(cur, x - 1, y - 1);
        const bool seq[8] = {p2, p3, p4, p5, p6, p7, p8, p9};
        int b = 0;
        for (bool v : seq) b += v;
        if (b < 2 || b > 6) continue;
        int a = 0;
        for (int i = 0; i < 8; ++i)
          if (!seq[i] && seq[(i + 1) % 8]) ++a;
        if (a != 1) continue;
        const bool ok = pass == 0 ? (!(p2 && p4 && p6) && !(p4 && p6 && p8))
                                  : (!(p2 && p4 && p8) && !(p2 && p6 && p8));
        if (ok) kill.push_back({x, y});
      }
      for (const auto& c : kill) cur.erase(c);
      changed = changed || !kill.empty();
    }
  }
  // Component guard: union-find over the input cells.
  std::map<Cell, Cell> parent;
  std::function<Cell(Cell)> find = [&](Cell c) {
    while (parent.at(c) != c) c = parent.at(c) = parent.at(parent.at(c));
    return c;
  };
  for (const auto& c : in) parent[c] = c;
  for (const auto& [x, y] : in)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if ((dx || dy) && in.count({x + dx, y + dy}))
          parent[find({x, y})] = find({x + dx, y + dy});
  std::map<Cell, bool> alive;
  for (const auto& c : cur) alive[find(c)] = true;
  std::map<Cell, Cell> smallest;  // root -> lex-smallest member
  for (const auto& c : in) {
    const Cell r = find(c);
    auto it = smallest.find(r);
    if (it == smallest.end() || c < it->second) smallest[r] = c;
  }
  for (const auto& [root, cell] : smallest)
    if (!alive[root]) cur.insert(cell);
  return cur;
}

std::set<Cell> to_cells(const BinaryMask& m) {
  std::set<Cell> s;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y)) s.insert({x, y});
  return s;
}

BinaryMask random_mask(Rng& rng, int w, int h, double density) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (rng.bernoulli(density)) m.set(x, y, true);
  return m;
}

int component_count(const BinaryMask& m) {
  int n = 0;
  detail::label_components(m, &n);
  return n;
}

}  // namespace

TEST(FloodFill, MaskedPixelsGetMean) {
  Raster img(3, 1);
  img.set(0, 0, 10);
  img.set(1, 0, 20);
  img.set(2, 0, 30);
  BinaryMask mask(3, 1);
  mask.set(0, 0, true);
  mask.set(1, 0, true);
  mask.set(2, 0, true);
  const Raster out = flood_fill_average(img, mask);
  EXPECT_DOUBLE_EQ(out.at(0, 0), 20.0);
  EXPECT_DOUBLE_EQ(out.at(1, 0), 20.0);
  EXPECT_DOUBLE_EQ(out.at(2, 0), 20.0);
}

TEST(FloodFill, EmptyMaskUnchanged) {
  Raster img(4, 4, 7.0);
  img.set(2, 2, 99.0);
  const Raster out = flood_fill_average(img, BinaryMask(4, 4));
  EXPECT_TRUE(out == img);
}

TEST(FloodFill, UniformValueUnchanged) {
  Raster img(5, 5, 42.0);
  BinaryMask mask(5, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) mask.set(x, y, true);
  const Raster out = flood_fill_average(img, mask);
  EXPECT_TRUE(out == img);
}

TEST(FloodFill, UnmaskedUntouchedAndMeanPreserved) {
  Rng rng(5);
  Raster img(16, 12);
  BinaryMask mask(16, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x) {
      img.set(x, y, rng.uniform(0, 255));
      mask.set(x, y, rng.bernoulli(0.4));
    }
  const Raster out = flood_fill_average(img, mask);
  double mean_in = 0, mean_out = 0;
  int n = 0;
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x) {
      if (mask.at(x, y)) {
        mean_in += img.at(x, y);
        mean_out += out.at(x, y);
        ++n;
      } else {
        EXPECT_DOUBLE_EQ(out.at(x, y), img.at(x, y));
      }
    }
  EXPECT_NEAR(mean_in / n, mean_out / n, 1e-9);
}

TEST(FloodFill, DimensionMismatch) {
  try {
    flood_fill_average(Raster(3, 3), BinaryMask(4, 3));
    FAIL() << "expected dimension_mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::dimension_mismatch);
  }
}

TEST(Skeletonize, HorizontalBarBecomesLine) {
  BinaryMask bar(24, 7);
  for (int y = 2; y < 5; ++y)  // 3x20 solid bar
    for (int x = 2; x < 22; ++x) bar.set(x, y, true);
  const BinaryMask skel = skeletonize(bar);
  const auto cells = to_cells(skel);
  // Frozen from the reference thinning oracle below: ends erode by ~1.5 px.
  EXPECT_EQ(cells.size(), 17u);
  for (const auto& [x, y] : cells) EXPECT_EQ(y, 3);  // middle row
  EXPECT_TRUE(to_cells(skel) == oracle_thin(to_cells(bar)));
}

TEST(Skeletonize, SinglePixelUnchanged) {
  BinaryMask m(5, 5);
  m.set(2, 3, true);
  EXPECT_TRUE(skeletonize(m) == m);
}

TEST(Skeletonize, EmptyMask) {
  const BinaryMask m(6, 6);
  EXPECT_EQ(skeletonize(m).count(), 0u);
}

TEST(Skeletonize, MatchesOracleOnRandomMasks) {
  Rng rng(123);
  for (int trial = 0; trial < 60; ++trial) {
    const int w = 4 + static_cast<int>(rng.index(28));
    const int h = 4 + static_cast<int>(rng.index(28));
    const BinaryMask m = random_mask(rng, w, h, rng.uniform(0.2, 0.8));
    const BinaryMask skel = skeletonize(m);
    EXPECT_TRUE(to_cells(skel) == oracle_thin(to_cells(m))) << "trial " << trial;
  }
}

TEST(Skeletonize, IdempotentSubsetAndComponentProperties) {
  Rng rng(321);
  for (int trial = 0; trial < 120; ++trial) {
    const int w = 3 + static_cast<int>(rng.index(30));
    const int h = 3 + static_cast<int>(rng.index(30));
    const BinaryMask m = random_mask(rng, w, h, rng.uniform(0.1, 0.9));
    const BinaryMask skel = skeletonize(m);
    // subset
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (skel.at(x, y)) EXPECT_TRUE(m.at(x, y));
    // idempotent
    EXPECT_TRUE(skeletonize(skel) == skel);
    // one non-empty output component per input component
    EXPECT_EQ(component_count(skel), component_count(m));
  }
}

TEST(AdaptiveThreshold, BimodalDepthCrop) {
  // Histogram oracle by construction: near mode 100 +/- 1, far mode 200 +/- 1.
  Rng rng(42);
  Raster crop(20, 20);
  BinaryMask near_truth(20, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) {
      const bool near = (x + y) % 3 != 0;
      near_truth.set(x, y, near);
      crop.set(x, y, near ? rng.uniform(99.0, 101.0) : rng.uniform(199.0, 201.0));
    }
  const BinaryMask mask = adaptive_depth_threshold(crop);
  EXPECT_TRUE(mask == near_truth);
}

TEST(AdaptiveThreshold, UniformCropNoContrast) {
  try {
    adaptive_depth_threshold(Raster(8, 8, 120.0));
    FAIL() << "expected no_contrast";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::no_contrast);
  }
}

TEST(AdaptiveThreshold, InvalidPixelsNeverSelected) {
  Raster crop(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) {
      if (y < 3) crop.set(x, y, 0.0);  // sentinel
      else if (y < 6) crop.set(x, y, std::numeric_limits<double>::quiet_NaN());
      else crop.set(x, y, x < 5 ? 100.0 : 200.0);
    }
  const BinaryMask mask = adaptive_depth_threshold(crop);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 10; ++x) EXPECT_FALSE(mask.at(x, y));
  for (int y = 6; y < 10; ++y)
    for (int x = 0; x < 10; ++x) EXPECT_EQ(mask.at(x, y), x < 5);
}

TEST(TipPixel, NearestEndpointToHint) {
  BinaryMask skel(20, 5);
  for (int x = 3; x <= 15; ++x) skel.set(x, 2, true);
  const Pixel tip = tip_pixel(skel, {14, 2});
  EXPECT_EQ(tip.x, 15);
  EXPECT_EQ(tip.y, 2);
}

TEST(TipPixel, EquidistantTieLexicographic) {
  BinaryMask skel(21, 5);
  for (int x = 5; x <= 15; ++x) skel.set(x, 2, true);
  const Pixel tip = tip_pixel(skel, {10, 2});
  EXPECT_EQ(tip.x, 5);
  EXPECT_EQ(tip.y, 2);
}

TEST(TipPixel, ClosedRingHasNoEndpoint) {
  BinaryMask ring(6, 6);
  for (int i = 1; i <= 4; ++i) {
    ring.set(i, 1, true);
    ring.set(i, 4, true);
    ring.set(1, i, true);
    ring.set(4, i, true);
  }
  try {
    tip_pixel(ring, {0, 0});
    FAIL() << "expected no_endpoint";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::no_endpoint);
  }
}

TEST(TipPixel, OutputHasExactlyOneNeighbor) {
  Rng rng(77);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const BinaryMask m = random_mask(rng, 12, 12, 0.35);
    const BinaryMask skel = skeletonize(m);
    try {
      const Pixel t = tip_pixel(skel, {6, 6});
      int degree = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if ((dx || dy) && skel.at_or(t.x + dx, t.y + dy)) ++degree;
      EXPECT_EQ(degree, 1);
      ++checked;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), errc::no_endpoint);
    }
  }
  EXPECT_GT(checked, 50);
}
