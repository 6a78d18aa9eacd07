#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "stitchkit/error.hpp"
#include "stitchkit/geom.hpp"
#include "stitchkit/rng.hpp"

namespace stitchkit {

// The three segmented pointclouds of one wound scene.
struct WoundScene {
  std::vector<Point3> wound_center_cloud;
  std::vector<Point3> wound_surface_cloud;
  std::vector<Point3> phantom_cloud;
};

struct WoundModel {
  Plane surface_plane;   // normal oriented away from the phantom (up)
  Plane phantom_plane;
  Line3 centerline;      // lies in the surface plane
  double s_min = 0.0;    // centerline extent, arc length about the origin
  double s_max = 0.0;
  double width = 0.0;    // w, mm
  double height = 0.0;   // h, mm
  Vec3 width_dir{0.0, 1.0, 0.0};  // surface_normal x centerline_direction

  double extent_length() const { return s_max - s_min; }

  Point3 wound_center() const {
    return centerline.origin + 0.5 * (s_min + s_max) * centerline.direction;
  }
};

struct SuturePair {
  Point3 insertion;
  Point3 extraction;
};

struct SuturePlan {
  int n = 0;
  std::vector<SuturePair> pairs;
  std::vector<Point3> centered_positions;
  double thread_length = 0.0;  // d, per-suture, mm
};

struct WoundModelOptions {
  double max_plane_angle_deg = 10.0;
  // 0 uses the full min/max spread for the width; a value f in (0, 0.5)
  // trims to the [f, 1-f] quantile spread.
  double width_trim_fraction = 0.0;
};

// Wound geometry from the three clouds: RANSAC planes for surface/phantom,
// height between them, RANSAC centerline on the projected center cloud,
// width from the surface-cloud spread along surface_normal x centerline.
inline WoundModel build_wound_model(const WoundScene& scene, const RansacConfig& cfg,
                                    const WoundModelOptions& opts = {}) {
  if (scene.wound_surface_cloud.size() < 3 || scene.phantom_cloud.size() < 3)
    fail(errc::degenerate_input, "surface and phantom clouds need at least 3 points");
  if (scene.wound_center_cloud.size() < 2)
    fail(errc::degenerate_input, "wound center cloud needs at least 2 points");

  const PlaneFit surface = ransac_fit_plane(scene.wound_surface_cloud, cfg);
  const PlaneFit phantom =
      ransac_fit_plane(scene.phantom_cloud, cfg.with_seed(Rng::mix(cfg.seed, 1)));

  WoundModel model;
  model.surface_plane = surface.plane;
  model.phantom_plane = phantom.plane;

  // Orient the surface normal away from the phantom so -normal points into
  // the wound; geometric, hence rigid-motion equivariant.
  Point3 phantom_centroid = Point3::Zero();
  for (const Point3& p : scene.phantom_cloud) phantom_centroid += p;
  phantom_centroid /= static_cast<double>(scene.phantom_cloud.size());
  if (model.surface_plane.signed_distance(phantom_centroid) > 0.0)
    model.surface_plane = model.surface_plane.flipped();

  model.height =
      plane_plane_distance(model.surface_plane, model.phantom_plane, opts.max_plane_angle_deg);
  if (!(model.height > 1e-9)) fail(errc::degenerate_input, "wound height is zero");

  std::vector<Point3> center_projected;
  center_projected.reserve(scene.wound_center_cloud.size());
  for (const Point3& p : scene.wound_center_cloud)
    center_projected.push_back(model.surface_plane.project(p));
  const LineFit line = ransac_fit_line(center_projected, cfg.with_seed(Rng::mix(cfg.seed, 2)));
  model.centerline = line.line;

  model.width_dir = model.surface_plane.normal.cross(model.centerline.direction).normalized();

  std::vector<double> spans;
  spans.reserve(scene.wound_surface_cloud.size());
  for (const Point3& p : scene.wound_surface_cloud) spans.push_back(model.width_dir.dot(p));
  std::sort(spans.begin(), spans.end());
  if (opts.width_trim_fraction > 0.0) {
    const auto lo = static_cast<std::size_t>(opts.width_trim_fraction * (spans.size() - 1));
    const auto hi = static_cast<std::size_t>((1.0 - opts.width_trim_fraction) * (spans.size() - 1));
    model.width = spans[hi] - spans[lo];
  } else {
    model.width = spans.back() - spans.front();
  }
  if (!(model.width > 1e-9)) fail(errc::degenerate_input, "wound width is zero");

  model.s_min = std::numeric_limits<double>::infinity();
  model.s_max = -std::numeric_limits<double>::infinity();
  for (std::size_t idx : line.inliers) {
    const double s =
        model.centerline.direction.dot(center_projected[idx] - model.centerline.origin);
    model.s_min = std::min(model.s_min, s);
    model.s_max = std::max(model.s_max, s);
  }
  return model;
}

// Cell-midpoint placement: position i at s_min + (i - 1/2) L/n, lifted to the
// surface plane. Adjacent spacing is exactly L/n.
inline std::vector<Point3> place_sutures(const WoundModel& model, int n) {
  if (n < 1) fail(errc::invalid_count, "suture count must be >= 1");
  const double length = model.extent_length();
  if (!(length > 0.0)) fail(errc::degenerate_extent, "centerline extent is empty");
  std::vector<Point3> positions;
  positions.reserve(n);
  for (int i = 1; i <= n; ++i) {
    const double s = model.s_min + (i - 0.5) * length / n;
    positions.push_back(
        model.surface_plane.project(model.centerline.origin + s * model.centerline.direction));
  }
  return positions;
}

// insertion = p + side (w/2) width_dir - (h/2) normal; extraction mirrored.
inline std::vector<SuturePair> insertion_extraction_points(const WoundModel& model,
                                                           std::span<const Point3> positions,
                                                           int side_sign) {
  if (!(model.width > 0.0)) fail(errc::zero_width, "wound width must be > 0");
  if (!(model.height > 0.0)) fail(errc::zero_height, "wound height must be > 0");
  if (side_sign != 1 && side_sign != -1) fail(errc::invalid_params, "side_sign must be +/-1");
  std::vector<SuturePair> pairs;
  pairs.reserve(positions.size());
  const Vec3 across = 0.5 * model.width * model.width_dir;
  const Vec3 down = 0.5 * model.height * model.surface_plane.normal;
  for (const Point3& p : positions) {
    if (std::abs(model.surface_plane.signed_distance(p)) > 1e-3)
      fail(errc::invalid_params, "suture position off the surface plane");
    pairs.push_back({p + side_sign * across - down, p - side_sign * across - down});
  }
  return pairs;
}

// d = w + 2h + slack: across the wound top plus down and up each side.
inline double per_suture_thread_length(const WoundModel& model, double slack = 5.0) {
  if (!(model.width > 0.0) || !(model.height > 0.0))
    fail(errc::invalid_model, "wound model needs positive width and height");
  if (slack < 0.0) fail(errc::invalid_params, "slack must be >= 0");
  return model.width + 2.0 * model.height + slack;
}

inline SuturePlan make_suture_plan(const WoundModel& model, int n, int side_sign = -1,
                                   double slack = 5.0) {
  SuturePlan plan;
  plan.n = n;
  plan.centered_positions = place_sutures(model, n);
  plan.pairs = insertion_extraction_points(model, plan.centered_positions, side_sign);
  plan.thread_length = per_suture_thread_length(model, slack);
  return plan;
}

}  // namespace stitchkit
