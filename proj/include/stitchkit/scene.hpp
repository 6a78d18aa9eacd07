#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "stitchkit/camera.hpp"
#include "stitchkit/error.hpp"
#include "stitchkit/geom.hpp"
#include "stitchkit/mask.hpp"
#include "stitchkit/needle.hpp"
#include "stitchkit/rng.hpp"
#include "stitchkit/wound.hpp"

namespace stitchkit {

// Stand-in for the stereo/segmentation perception stack: exact ground truth
// plus noise with the failure modes that stack exhibits (isotropic jitter,
// specular dropout, inflated noise at the arc ends).

inline constexpr double kDefaultNeedleRadius = 40.0 / kPi;  // 40 mm arc length half-circle
inline constexpr double kDepthQuantizationMm = 0.05;

// Semicircular needle. Local frame: circle center at the origin, plane normal
// +z, arc parameterized by t in [0, pi] as (-r cos t, -r sin t, 0); t = 0 is
// the left endpoint, t = pi the right. Sweeping left -> right by positive
// rotation about the normal traverses the body, matching NeedleMeasurement.
struct NeedleGroundTruth {
  Pose pose;
  double radius = kDefaultNeedleRadius;
  TipSide thread_side = TipSide::left;

  Point3 arc_point(double t) const {
    return pose.apply(Point3(-radius * std::cos(t), -radius * std::sin(t), 0.0));
  }
};

struct NoiseModel {
  double sigma = 0.2;              // mm, isotropic Gaussian per axis
  double specular_dropout = 0.15;  // per-point drop probability
  double boundary_factor = 2.0;    // noise multiplier within the end bands
  double boundary_band = 0.10;     // band size, fraction of arc length per end
  std::uint64_t seed = 0;

  void validate() const {
    if (sigma < 0.0) fail(errc::invalid_params, "sigma must be >= 0");
    if (specular_dropout < 0.0 || specular_dropout >= 1.0)
      fail(errc::invalid_params, "dropout must be in [0, 1)");
    if (boundary_factor < 1.0) fail(errc::invalid_params, "boundary_factor must be >= 1");
    if (boundary_band < 0.0 || boundary_band > 0.5)
      fail(errc::invalid_params, "boundary_band must be in [0, 0.5]");
  }
};

inline NeedleMeasurement oracle_needle_state(const NeedleGroundTruth& gt) {
  if (!(gt.radius > 0.0)) fail(errc::invalid_radius, "needle radius must be > 0");
  NeedleMeasurement m;
  m.center = gt.pose.position;
  m.endpoint_left = gt.pose.apply(Point3(-gt.radius, 0.0, 0.0));
  m.endpoint_right = gt.pose.apply(Point3(gt.radius, 0.0, 0.0));
  m.normal = gt.pose.rotate(Vec3::UnitZ());
  m.radius = gt.radius;
  return m;
}

// Points uniform in arc length, jittered per axis (x boundary_factor within
// the end bands), dropped independently with the specular probability. The
// first two draws are pinned at the exact arc ends (the segmentation mask
// always covers the needle ends); both still jitter and may drop.
inline std::vector<Point3> sample_needle_cloud(const NeedleGroundTruth& gt,
                                               const NoiseModel& noise, int count) {
  if (!(gt.radius > 0.0)) fail(errc::invalid_radius, "needle radius must be > 0");
  if (count < 1) fail(errc::invalid_params, "sample count must be >= 1");
  noise.validate();
  Rng rng(noise.seed);
  std::vector<Point3> cloud;
  cloud.reserve(count);
  for (int i = 0; i < count; ++i) {
    double t = kPi * rng.uniform01();
    if (i == 0) t = 0.0;
    else if (i == 1) t = kPi;
    const bool in_band = t < kPi * noise.boundary_band || t > kPi * (1.0 - noise.boundary_band);
    const double s = noise.sigma * (in_band ? noise.boundary_factor : 1.0);
    const Vec3 jitter(rng.normal(0.0, s), rng.normal(0.0, s), rng.normal(0.0, s));
    const bool dropped = rng.bernoulli(noise.specular_dropout);
    if (!dropped) cloud.push_back(gt.arc_point(t) + jitter);
  }
  return cloud;
}

struct RenderResult {
  BinaryMask mask;
  Raster depth;
};

// Projects the arc into the camera, dilates to pixel_thickness, and writes a
// z-buffered depth raster (quantized to kDepthQuantizationMm) at mask pixels;
// everywhere else keeps the invalid-depth sentinel 0.
inline RenderResult render_views(const NeedleGroundTruth& gt, const CameraModel& camera,
                                 int pixel_thickness = 3) {
  if (!(gt.radius > 0.0)) fail(errc::invalid_radius, "needle radius must be > 0");
  if (pixel_thickness < 1) fail(errc::invalid_params, "pixel_thickness must be >= 1");
  camera.validate();

  RenderResult out{BinaryMask(camera.width, camera.height), Raster(camera.width, camera.height)};
  constexpr int kArcSamples = 4096;
  const double half = pixel_thickness / 2.0;
  const int reach = static_cast<int>(std::floor(half));
  bool any = false;
  for (int i = 0; i <= kArcSamples; ++i) {
    const double t = kPi * i / kArcSamples;
    const Point3 p = gt.arc_point(t);
    const auto proj = camera.project(p);
    if (proj.depth <= 1e-9) fail(errc::not_visible, "needle arc reaches behind the camera");
    const double qd = std::round(proj.depth / kDepthQuantizationMm) * kDepthQuantizationMm;
    const int px = static_cast<int>(std::lround(proj.u));
    const int py = static_cast<int>(std::lround(proj.v));
    for (int dy = -reach; dy <= reach; ++dy) {
      for (int dx = -reach; dx <= reach; ++dx) {
        if (dx * dx + dy * dy > half * half) continue;
        const int x = px + dx, y = py + dy;
        if (x < 0 || y < 0 || x >= camera.width || y >= camera.height) continue;
        if (!out.mask.at(x, y) || qd < out.depth.at(x, y)) out.depth.set(x, y, qd);
        out.mask.set(x, y, true);
        any = true;
      }
    }
  }
  if (!any) fail(errc::not_visible, "needle projects entirely outside the image");
  return out;
}

// Depth-noise stand-in for stereo reconstruction error: jitters valid pixels
// and re-quantizes. Used by tests and the harness on rendered rasters.
inline Raster perturb_depth(const Raster& depth, double sigma, std::uint64_t seed,
                            double quantization = kDepthQuantizationMm) {
  Rng rng(seed);
  Raster out = depth;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double v = depth.at(x, y);
      if (!Raster::valid_depth(v)) continue;
      const double noisy = v + rng.normal(0.0, sigma);
      out.set(x, y, std::round(noisy / quantization) * quantization);
    }
  }
  return out;
}

// Fills invalid pixels with a constant background depth (the phantom plane in
// a composed scene raster).
inline Raster fill_background_depth(const Raster& depth, double background) {
  Raster out = depth;
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (!Raster::valid_depth(depth.at(x, y))) out.set(x, y, background);
  return out;
}

struct WoundSceneParams {
  double height = 5.0;   // h
  double width = 9.0;    // w
  double length = 60.0;  // L
  Pose surface_pose;     // local: x along the wound, y across, z up; phantom at z=0
  int points_per_cloud = 200;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(height > 0.0) || !(width > 0.0) || !(length > 0.0))
      fail(errc::invalid_params, "wound dimensions must be positive");
    if (points_per_cloud < 8) fail(errc::invalid_params, "points_per_cloud must be >= 8");
  }
};

struct GeneratedWound {
  WoundScene scene;
  WoundModel oracle;
};

// Raised-box wound: surface rectangle w x L at height h over the phantom
// plane, center cloud along the top midline. Rectangle corners and midline
// ends are pinned as exact samples so the max-spread width and the centerline
// extent reproduce the parameters exactly at sigma = 0.
inline GeneratedWound generate_wound_scene(const WoundSceneParams& params) {
  params.validate();
  Rng rng(params.seed);
  const Pose& pose = params.surface_pose;
  const double h = params.height, w = params.width, len = params.length;

  auto jitter = [&]() {
    return params.noise_sigma > 0.0
               ? Vec3(rng.normal(0, params.noise_sigma), rng.normal(0, params.noise_sigma),
                      rng.normal(0, params.noise_sigma))
               : Vec3(Vec3::Zero());
  };

  GeneratedWound out;
  auto& scene = out.scene;

  scene.wound_surface_cloud.push_back(pose.apply(Point3(-len / 2, -w / 2, h)) + jitter());
  scene.wound_surface_cloud.push_back(pose.apply(Point3(-len / 2, w / 2, h)) + jitter());
  scene.wound_surface_cloud.push_back(pose.apply(Point3(len / 2, -w / 2, h)) + jitter());
  scene.wound_surface_cloud.push_back(pose.apply(Point3(len / 2, w / 2, h)) + jitter());
  for (int i = 4; i < params.points_per_cloud; ++i) {
    const Point3 local(rng.uniform(-len / 2, len / 2), rng.uniform(-w / 2, w / 2), h);
    scene.wound_surface_cloud.push_back(pose.apply(local) + jitter());
  }

  const double pad_l = 1.2 * len, pad_w = 5.0 * w;
  scene.phantom_cloud.push_back(pose.apply(Point3(-pad_l / 2, -pad_w / 2, 0)) + jitter());
  scene.phantom_cloud.push_back(pose.apply(Point3(-pad_l / 2, pad_w / 2, 0)) + jitter());
  scene.phantom_cloud.push_back(pose.apply(Point3(pad_l / 2, -pad_w / 2, 0)) + jitter());
  scene.phantom_cloud.push_back(pose.apply(Point3(pad_l / 2, pad_w / 2, 0)) + jitter());
  for (int i = 4; i < params.points_per_cloud; ++i) {
    const Point3 local(rng.uniform(-pad_l / 2, pad_l / 2), rng.uniform(-pad_w / 2, pad_w / 2), 0.0);
    scene.phantom_cloud.push_back(pose.apply(local) + jitter());
  }

  scene.wound_center_cloud.push_back(pose.apply(Point3(-len / 2, 0, h)) + jitter());
  scene.wound_center_cloud.push_back(pose.apply(Point3(len / 2, 0, h)) + jitter());
  for (int i = 2; i < params.points_per_cloud; ++i) {
    const Point3 local(rng.uniform(-len / 2, len / 2), 0.0, h);
    scene.wound_center_cloud.push_back(pose.apply(local) + jitter());
  }

  // Oracle model in exactly the conventions build_wound_model reports:
  // surface normal away from the phantom, centerline direction canonicalized.
  WoundModel& oracle = out.oracle;
  const Vec3 up = pose.rotate(Vec3::UnitZ());
  oracle.surface_plane = {up, up.dot(pose.apply(Point3(0, 0, h)))};
  const Plane phantom{up, up.dot(pose.position)};
  oracle.phantom_plane = phantom.canonicalized();
  oracle.centerline.origin = pose.apply(Point3(0, 0, h));
  oracle.centerline.direction = canonical_direction(pose.rotate(Vec3::UnitX()));
  oracle.s_min = -len / 2;
  oracle.s_max = len / 2;
  oracle.width = w;
  oracle.height = h;
  oracle.width_dir = up.cross(oracle.centerline.direction).normalized();
  return out;
}

}  // namespace stitchkit
