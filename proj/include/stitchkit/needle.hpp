#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "stitchkit/camera.hpp"
#include "stitchkit/error.hpp"
#include "stitchkit/geom.hpp"
#include "stitchkit/mask.hpp"

namespace stitchkit {

enum class TipSide { left, right };

using Vector13 = Eigen::Matrix<double, 13, 1>;
using Matrix13 = Eigen::Matrix<double, 13, 13>;

// Needle state as estimated from one pointcloud: circle center, the two arc
// endpoints, plane normal and radius, flattened as [c, l, r, n, radius].
//
// Orientation convention: sweeping endpoint_left -> endpoint_right by
// positive rotation about `normal` traverses the needle body. Grasp planning
// relies on this; measure_needle establishes it from the cloud.
struct NeedleMeasurement {
  Point3 center{Point3::Zero()};
  Point3 endpoint_left{Point3::Zero()};
  Point3 endpoint_right{Point3::Zero()};
  Vec3 normal{0.0, 0.0, 1.0};
  double radius = 0.0;

  Point3 endpoint(TipSide side) const {
    return side == TipSide::left ? endpoint_left : endpoint_right;
  }

  Circle3 circle() const { return {center, normal, radius}; }

  Vector13 to_vector() const {
    Vector13 v;
    v << center, endpoint_left, endpoint_right, normal, radius;
    return v;
  }

  static NeedleMeasurement from_vector(const Vector13& v) {
    NeedleMeasurement m;
    m.center = v.segment<3>(0);
    m.endpoint_left = v.segment<3>(3);
    m.endpoint_right = v.segment<3>(6);
    m.normal = v.segment<3>(9);
    m.radius = v(12);
    return m;
  }
};

// Max endpoint distance under the better of the two left/right assignments;
// label-flip invariant.
inline double endpoint_error(const NeedleMeasurement& a, const NeedleMeasurement& b) {
  const double keep = std::max((a.endpoint_left - b.endpoint_left).norm(),
                               (a.endpoint_right - b.endpoint_right).norm());
  const double swap = std::max((a.endpoint_left - b.endpoint_right).norm(),
                               (a.endpoint_right - b.endpoint_left).norm());
  return std::min(keep, swap);
}

// Swaps endpoints (and flips the normal, preserving the body convention) when
// that matches the reference better. Keeps a measurement stream consistently
// labeled for the identity-H filter.
inline NeedleMeasurement oriented_like(const NeedleMeasurement& z, const NeedleMeasurement& ref) {
  const double keep = (z.endpoint_left - ref.endpoint_left).squaredNorm() +
                      (z.endpoint_right - ref.endpoint_right).squaredNorm();
  const double swap = (z.endpoint_left - ref.endpoint_right).squaredNorm() +
                      (z.endpoint_right - ref.endpoint_left).squaredNorm();
  if (swap >= keep) return z;
  NeedleMeasurement out = z;
  out.endpoint_left = z.endpoint_right;
  out.endpoint_right = z.endpoint_left;
  out.normal = -z.normal;
  return out;
}

struct EkfConfig {
  int init_count = 7;
  int update_count = 3;
  double gate_sigma = 3.0;
  int max_measurements = 15;
  double process_noise = 1e-6;      // Q = process_noise * I; needle is stationary
  double covariance_floor = 1e-4;   // floor on P and sampled R diagonals, mm^2
  // 0 derives R from the init sample covariance; > 0 uses a constant diagonal.
  double fixed_measurement_noise = 0.0;
  bool mahalanobis_gate = false;

  void validate() const {
    if (init_count < 1) fail(errc::invalid_config, "init_count must be >= 1");
    if (update_count < 0) fail(errc::invalid_config, "update_count must be >= 0");
    if (max_measurements < init_count + update_count)
      fail(errc::invalid_config, "max_measurements < init_count + update_count");
    if (!(gate_sigma > 0.0)) fail(errc::invalid_config, "gate_sigma must be > 0");
    if (process_noise < 0.0 || fixed_measurement_noise < 0.0)
      fail(errc::invalid_config, "noise magnitudes must be >= 0");
    if (!(covariance_floor > 0.0)) fail(errc::invalid_config, "covariance_floor must be > 0");
  }
};

struct EkfState {
  Vector13 mean = Vector13::Zero();
  Matrix13 covariance = Matrix13::Zero();
  int measurement_count = 0;
  int accepted_count = 0;
  // Gating reference (the initialization mean/variance) and the measurement
  // noise diagonal, fixed at initialization.
  Vector13 gate_mean = Vector13::Zero();
  Vector13 gate_variance = Vector13::Zero();
  Vector13 measurement_noise = Vector13::Zero();

  NeedleMeasurement as_measurement() const { return NeedleMeasurement::from_vector(mean); }
};

namespace detail {

inline void renormalize_normal(Vector13& v) {
  const double n = v.segment<3>(9).norm();
  if (n > 1e-12) v.segment<3>(9) /= n;
}

}  // namespace detail

// Initial state = component-wise mean of the first init_count measurements,
// covariance = diagonal sample covariance floored at covariance_floor.
inline EkfState ekf_initialize(std::span<const NeedleMeasurement> measurements,
                               const EkfConfig& cfg) {
  cfg.validate();
  if (measurements.size() < static_cast<std::size_t>(cfg.init_count))
    fail(errc::insufficient_measurements, "fewer measurements than init_count");

  std::vector<Vector13> zs;
  zs.reserve(cfg.init_count);
  for (int i = 0; i < cfg.init_count; ++i)
    zs.push_back(oriented_like(measurements[i], measurements[0]).to_vector());

  Vector13 mean = Vector13::Zero();
  for (const auto& z : zs) mean += z;
  mean /= static_cast<double>(cfg.init_count);

  Vector13 var = Vector13::Zero();
  if (cfg.init_count > 1) {
    for (const auto& z : zs) var += (z - mean).cwiseProduct(z - mean);
    var /= static_cast<double>(cfg.init_count - 1);
  }
  var = var.cwiseMax(cfg.covariance_floor);

  EkfState state;
  state.mean = mean;
  detail::renormalize_normal(state.mean);
  state.covariance = var.asDiagonal();
  state.gate_mean = state.mean;
  state.gate_variance = var;
  state.measurement_noise = cfg.fixed_measurement_noise > 0.0
                                ? Vector13::Constant(cfg.fixed_measurement_noise)
                                : var;
  state.measurement_count = cfg.init_count;
  return state;
}

// Gated Kalman update with F = H = I. A rejected measurement leaves mean and
// covariance untouched (only the count advances).
inline std::pair<EkfState, bool> ekf_update(const EkfState& state, const NeedleMeasurement& z,
                                            const EkfConfig& cfg) {
  cfg.validate();
  const NeedleMeasurement ref = NeedleMeasurement::from_vector(state.gate_mean);
  const Vector13 v = oriented_like(z, ref).to_vector();

  bool reject = false;
  if (cfg.mahalanobis_gate) {
    double m2 = 0.0;
    for (int i = 0; i < 13; ++i) {
      const double d = v(i) - state.gate_mean(i);
      m2 += d * d / state.gate_variance(i);
    }
    reject = m2 > cfg.gate_sigma * cfg.gate_sigma * 13.0;
  } else {
    for (int i = 0; i < 13; ++i) {
      if (std::abs(v(i) - state.gate_mean(i)) >
          cfg.gate_sigma * std::sqrt(state.gate_variance(i))) {
        reject = true;
        break;
      }
    }
  }
  if (reject) {
    EkfState out = state;
    ++out.measurement_count;
    return {std::move(out), false};
  }

  EkfState out = state;
  Matrix13 p = state.covariance + cfg.process_noise * Matrix13::Identity();
  const Matrix13 s = p + Matrix13(state.measurement_noise.asDiagonal());
  const Matrix13 gain = s.llt().solve(p).transpose();  // K = P S^-1 (P, S symmetric)
  out.mean = state.mean + gain * (v - state.mean);
  Matrix13 post = (Matrix13::Identity() - gain) * p;
  post = 0.5 * (post + post.transpose());
  for (int i = 0; i < 13; ++i) post(i, i) = std::max(post(i, i), cfg.covariance_floor);
  out.covariance = post;
  detail::renormalize_normal(out.mean);
  ++out.measurement_count;
  ++out.accepted_count;
  return {std::move(out), true};
}

struct EstimateResult {
  NeedleMeasurement estimate;
  EkfState state;
  int accepted_count = 0;
  int consumed_count = 0;
};

// Initialize from the first init_count draws, then accept exactly
// update_count gated updates. Fails with estimate_timeout when the
// acceptances are not reached within max_measurements total draws.
inline EstimateResult estimate_needle(const std::function<NeedleMeasurement()>& source,
                                      const EkfConfig& cfg) {
  cfg.validate();
  std::vector<NeedleMeasurement> init;
  init.reserve(cfg.init_count);
  for (int i = 0; i < cfg.init_count; ++i) init.push_back(source());
  EkfState state = ekf_initialize(init, cfg);
  int consumed = cfg.init_count;
  while (state.accepted_count < cfg.update_count) {
    if (consumed >= cfg.max_measurements)
      fail(errc::estimate_timeout, "gated acceptances not reached within max_measurements");
    const NeedleMeasurement z = source();
    ++consumed;
    auto [next, accepted] = ekf_update(state, z, cfg);
    state = std::move(next);
  }
  return {state.as_measurement(), state, state.accepted_count, consumed};
}

inline EstimateResult estimate_needle(std::span<const NeedleMeasurement> stream,
                                      const EkfConfig& cfg) {
  std::size_t i = 0;
  return estimate_needle(
      std::function<NeedleMeasurement()>([&]() -> NeedleMeasurement {
        if (i >= stream.size())
          fail(errc::insufficient_measurements, "measurement stream exhausted");
        return stream[i++];
      }),
      cfg);
}

// Pointcloud -> robust circle measurement: RANSAC plane, project inliers,
// Kasa circle fit, farthest rim points as endpoints. Rejects fits whose
// radius strays more than 20% from the known needle radius.
inline NeedleMeasurement measure_needle(std::span<const Point3> cloud, double known_radius,
                                        const RansacConfig& cfg,
                                        const CameraModel* camera = nullptr) {
  if (!(known_radius > 0.0)) fail(errc::invalid_radius, "known radius must be > 0");
  if (cloud.size() < 10) fail(errc::degenerate_input, "needle cloud needs at least 10 points");

  const PlaneFit pf = ransac_fit_plane(cloud, cfg);
  std::vector<Point3> proj;
  proj.reserve(pf.inliers.size());
  for (std::size_t i : pf.inliers) proj.push_back(pf.plane.project(cloud[i]));

  const Circle3 circle = fit_circle_in_plane(proj, pf.plane);
  if (std::abs(circle.radius - known_radius) / known_radius > 0.20)
    fail(errc::radius_mismatch, "fitted radius strays more than 20% from known radius");

  // Endpoint candidates stay within 10% of the rim; an off-circle straggler
  // that happens to lie near the plane must not become an endpoint.
  std::vector<Point3> rim;
  Point3 rim_centroid = Point3::Zero();
  for (const Point3& p : proj) {
    if (std::abs((p - circle.center).norm() - circle.radius) <= 0.10 * circle.radius) {
      rim.push_back(p);
      rim_centroid += p;
    }
  }
  if (rim.size() < 2) fail(errc::not_a_circle, "too few points near the fitted rim");
  rim_centroid /= static_cast<double>(rim.size());

  auto [a, b] = farthest_pair(rim);
  const Vec3 axis = camera ? Vec3(camera->pose.rotation.col(0)) : Vec3(Vec3::UnitX());
  if (axis.dot(b) < axis.dot(a) || (axis.dot(b) == axis.dot(a) && lex_less(b, a))) std::swap(a, b);

  NeedleMeasurement m;
  m.center = circle.center;
  m.endpoint_left = a;
  m.endpoint_right = b;
  m.radius = circle.radius;
  m.normal = circle.normal;
  // Orient the normal so the positive left->right sweep passes the cloud body.
  const Vec3 body = rim_centroid - circle.center;
  if (body.norm() > 1e-9 && m.normal.cross(a - circle.center).dot(body) < 0.0)
    m.normal = -m.normal;
  return m;
}

struct TipRefinement {
  Pixel pixel;              // tip pixel, full-image coordinates
  Point3 refined;           // ray intersected with the estimated needle circle
  Point3 raw_deprojection;  // pixel + measured depth, the direct (noisy) route
};

// Crop around the projected tip -> adaptive depth threshold -> skeleton ->
// endpoint nearest the projected tip -> deproject to a ray -> snap onto the
// estimated circle.
inline TipRefinement refine_tip_detailed(const Raster& depth, const CameraModel& camera,
                                         const NeedleMeasurement& estimate, TipSide tip_side,
                                         int crop_size = 200) {
  camera.validate();
  const Point3 tip = estimate.endpoint(tip_side);
  const auto proj = camera.project(tip);
  if (proj.depth <= 0.0) fail(errc::not_visible, "estimated tip behind the camera");
  const int px = static_cast<int>(std::lround(proj.u));
  const int py = static_cast<int>(std::lround(proj.v));
  if (px < 0 || py < 0 || px >= depth.width() || py >= depth.height())
    fail(errc::not_visible, "estimated tip projects outside the depth raster");

  const int cw = std::min(crop_size, depth.width());
  const int ch = std::min(crop_size, depth.height());
  const int x0 = std::clamp(px - cw / 2, 0, depth.width() - cw);
  const int y0 = std::clamp(py - ch / 2, 0, depth.height() - ch);
  const Raster crop = depth.crop(x0, y0, cw, ch);

  const BinaryMask skeleton = skeletonize(adaptive_depth_threshold(crop));
  const Pixel local = tip_pixel(skeleton, {px - x0, py - y0});
  const Pixel full{x0 + local.x, y0 + local.y};

  const Ray3 ray = camera.pixel_ray(full.x, full.y);
  TipRefinement out;
  out.pixel = full;
  out.refined = ray_circle_intersection(ray, estimate.circle(), 0.25 * estimate.radius);
  out.raw_deprojection = camera.deproject(full.x, full.y, depth.at(full.x, full.y));
  return out;
}

inline Point3 refine_tip(const Raster& depth, const CameraModel& camera,
                         const NeedleMeasurement& estimate, TipSide tip_side,
                         int crop_size = 200) {
  return refine_tip_detailed(depth, camera, estimate, tip_side, crop_size).refined;
}

}  // namespace stitchkit
