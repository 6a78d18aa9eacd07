#pragma once

#include <Eigen/Geometry>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stitchkit/error.hpp"
#include "stitchkit/geom.hpp"
#include "stitchkit/needle.hpp"
#include "stitchkit/wound.hpp"

namespace stitchkit {

// World +z is the rig's vertical axis; the "level endpoints" and tilt
// conditions below are taken against it.
inline const Vec3 kVertical = Vec3::UnitZ();

enum class Gripper { g1, g2 };
enum class GripState { open, closed };

struct Waypoint {
  int id = 0;
  Gripper gripper = Gripper::g1;
  Pose pose;
  GripState grip = GripState::closed;
  std::string label;
  // Cross-arm ordering constraint: this waypoint starts only after the
  // waypoint with the given id has completed.
  std::optional<int> after;
};

struct NeedleGrasp {
  Point3 grasp_point;
  Vec3 approach_dir;  // along the needle-plane normal
  double arc_offset = 0.0;
};

// Thread cinching translation schedule: D_i = n d - (i - 1) d.
inline double cinch_translation(int n, int i, double d) {
  if (!(d > 0.0)) fail(errc::invalid_length, "thread length must be > 0");
  if (i < 1 || i > n) fail(errc::index_out_of_range, "suture index outside [1, n]");
  return n * d - (i - 1) * d;
}

namespace detail {

// Orthonormal needle frame: x toward the right endpoint, z along the normal.
inline Pose needle_frame(const NeedleMeasurement& m) {
  Vec3 z = m.normal.normalized();
  Vec3 x = m.endpoint_right - m.center;
  x -= x.dot(z) * z;
  const double n = x.norm();
  if (n < 1e-9) fail(errc::degenerate_estimate, "needle endpoints coincide with the center");
  x /= n;
  Pose frame;
  frame.position = m.center;
  frame.rotation.col(0) = x;
  frame.rotation.col(1) = z.cross(x);
  frame.rotation.col(2) = z;
  return frame;
}

inline void check_estimate(const NeedleMeasurement& m) {
  if (!(m.radius > 0.0) || (m.endpoint_left - m.endpoint_right).norm() < 1e-9 ||
      m.normal.norm() < 1e-9)
    fail(errc::degenerate_estimate, "needle estimate is degenerate");
}

}  // namespace detail

struct InsertionConfig {
  double rotation_deg = 40.0;
  double extra_translation = 2.0;  // mm, anti-slip seating move
  double start_tolerance = 1.0;    // mm, allowed tip offset from the insertion point
  TipSide tip_side = TipSide::right;
};

// The 3-step insertion twist for g1: drive one wound width across, rotate
// about the wound centerline through the active suture position, then a short
// seating translation; the final waypoint opens the grip.
inline std::vector<Waypoint> insertion_trajectory(const NeedleMeasurement& needle,
                                                  const Point3& insertion_point,
                                                  const WoundModel& model,
                                                  const InsertionConfig& cfg = {}) {
  detail::check_estimate(needle);
  if (!(model.width > 0.0)) fail(errc::zero_width, "wound width must be > 0");
  const Point3 tip = needle.endpoint(cfg.tip_side);
  if ((tip - insertion_point).norm() > cfg.start_tolerance)
    fail(errc::misaligned_start, "needle tip too far from the insertion point");

  std::vector<Waypoint> wps;
  Pose pose = detail::needle_frame(needle);
  wps.push_back({0, Gripper::g1, pose, GripState::closed, "insert:start", std::nullopt});

  const Vec3 drive = -model.width * model.width_dir;
  pose.position += drive;
  wps.push_back({1, Gripper::g1, pose, GripState::closed, "insert:drive", std::nullopt});

  // Rotation axis: the centerline direction through the active suture's
  // centered position (= the insertion point projected onto the centerline).
  const Point3 axis_point = model.centerline.closest_point(insertion_point);
  const Vec3 axis = model.centerline.direction;
  const double angle = deg2rad(cfg.rotation_deg);
  const Eigen::Matrix3d r_pos = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  const Eigen::Matrix3d r_neg = Eigen::AngleAxisd(-angle, axis).toRotationMatrix();
  const Point3 tip_now = tip + drive;
  const double drop_pos =
      model.surface_plane.normal.dot(axis_point + r_pos * (tip_now - axis_point) - tip_now);
  const double drop_neg =
      model.surface_plane.normal.dot(axis_point + r_neg * (tip_now - axis_point) - tip_now);
  const Eigen::Matrix3d rot = drop_pos <= drop_neg ? r_pos : r_neg;  // tip goes down
  pose.position = axis_point + rot * (pose.position - axis_point);
  pose.rotation = rot * pose.rotation;
  wps.push_back({2, Gripper::g1, pose, GripState::closed, "insert:twist", std::nullopt});

  pose.position += -cfg.extra_translation * model.width_dir;
  wps.push_back({3, Gripper::g1, pose, GripState::open, "insert:release", std::nullopt});
  return wps;
}

namespace detail {

// Grasp point a fixed arc length from the given endpoint, along the needle
// body. Body side per the NeedleMeasurement convention: the positive sweep
// from the left endpoint (negative from the right) stays on the body.
inline NeedleGrasp grasp_on_circle(const NeedleMeasurement& m, TipSide endpoint_side,
                                   double arc_offset) {
  check_estimate(m);
  if (!(kPi * m.radius > arc_offset))
    fail(errc::arc_too_short, "arc shorter than the requested grasp offset");
  const double angle = arc_offset / m.radius;
  const double sign = endpoint_side == TipSide::left ? 1.0 : -1.0;
  const Eigen::Matrix3d rot =
      Eigen::AngleAxisd(sign * angle, m.normal.normalized()).toRotationMatrix();
  NeedleGrasp grasp;
  grasp.grasp_point = m.center + rot * (m.endpoint(endpoint_side) - m.center);
  grasp.approach_dir = m.normal.normalized();
  grasp.arc_offset = arc_offset;
  return grasp;
}

}  // namespace detail

// Extraction: g2 grasps 2 mm from the tip to avoid dulling it.
inline NeedleGrasp extraction_grasp(const NeedleMeasurement& estimate, TipSide tip_side,
                                    double arc_offset = 2.0) {
  return detail::grasp_on_circle(estimate, tip_side, arc_offset);
}

// Handover: g1 grasps 2 mm below the endpoint connected to the thread.
inline NeedleGrasp handover_grasp(const NeedleMeasurement& estimate, TipSide thread_side,
                                  double arc_offset = 2.0) {
  return detail::grasp_on_circle(estimate, thread_side, arc_offset);
}

namespace detail {

// Minimal rotation taking the needle normal parallel to the centerline.
inline Eigen::Matrix3d normal_to_centerline(const NeedleMeasurement& m, const WoundModel& model) {
  const Vec3 n = m.normal.normalized();
  const Vec3 d = model.centerline.direction;
  const Vec3 target = n.dot(d) >= 0.0 ? d : Vec3(-d);
  return Eigen::Quaterniond::FromTwoVectors(n, target).toRotationMatrix();
}

// Smallest-|angle| solution of  A cos(phi) + B sin(phi) = k.
inline double solve_phase(double a, double b, double k) {
  const double c = std::hypot(a, b);
  if (c < 1e-12) {
    if (std::abs(k) < 1e-9) return 0.0;
    fail(errc::degenerate_estimate, "alignment rotation has no solution");
  }
  if (std::abs(k) > c * (1.0 + 1e-12))
    fail(errc::degenerate_estimate, "alignment target unreachable for this geometry");
  const double psi = std::atan2(b, a);
  const double delta = std::acos(std::clamp(k / c, -1.0, 1.0));
  double best = 0.0;
  double best_abs = std::numeric_limits<double>::infinity();
  for (double phi : {psi + delta, psi - delta}) {
    if (phi > kPi) phi -= 2.0 * kPi;
    if (phi < -kPi) phi += 2.0 * kPi;
    if (std::abs(phi) < best_abs - 1e-15) {
      best_abs = std::abs(phi);
      best = phi;
    } else if (std::abs(std::abs(phi) - best_abs) <= 1e-15 && phi > best) {
      best = phi;  // deterministic tie-break toward the positive solution
    }
  }
  return best;
}

}  // namespace detail

// Handover alignment: (a) needle normal parallel to the wound centerline,
// (b) both endpoints level against the vertical. Returns the rigid transform
// pivoting about the needle center (minimal-angle composition, (a) then (b)).
inline Pose handover_alignment(const NeedleMeasurement& estimate, const WoundModel& model) {
  detail::check_estimate(estimate);
  const Eigen::Matrix3d r1 = detail::normal_to_centerline(estimate, model);
  const Vec3 axis = r1 * estimate.normal.normalized();

  // Level condition: z-component of the rotated endpoint chord vanishes.
  const Vec3 chord = r1 * (estimate.endpoint_left - estimate.endpoint_right);
  const double a = chord.dot(kVertical);
  const double b = axis.cross(chord).dot(kVertical);
  double phi = 0.0;
  if (std::abs(a) > 1e-12 || std::abs(b) > 1e-12) {
    // A cos(phi) + B sin(phi) = 0; pick the smaller rotation.
    phi = std::atan2(-a, b);
    if (phi > kPi / 2) phi -= kPi;
    if (phi < -kPi / 2) phi += kPi;
  }
  const Eigen::Matrix3d r = Eigen::AngleAxisd(phi, axis).toRotationMatrix() * r1;
  return rotation_about(r, estimate.center);
}

// Pre-insertion alignment: normal parallel to the centerline, then rotate
// about the normal until the tip-to-center line makes tilt_deg with the
// vertical.
inline Pose pre_insertion_alignment(const NeedleMeasurement& estimate, const WoundModel& model,
                                    TipSide tip_side = TipSide::right, double tilt_deg = 20.0) {
  detail::check_estimate(estimate);
  const Eigen::Matrix3d r1 = detail::normal_to_centerline(estimate, model);
  const Vec3 axis = r1 * estimate.normal.normalized();
  const Vec3 u0 = r1 * (estimate.endpoint(tip_side) - estimate.center);
  const double a = u0.dot(kVertical);
  const double b = axis.cross(u0).dot(kVertical);
  const double k = u0.norm() * std::cos(deg2rad(tilt_deg));
  const double phi = detail::solve_phase(a, b, k);
  const Eigen::Matrix3d r = Eigen::AngleAxisd(phi, axis).toRotationMatrix() * r1;
  return rotation_about(r, estimate.center);
}

struct SweepConfig {
  double lift = 15.0;     // mm above the wound surface
  double lateral = 20.0;  // mm along the width direction
};

struct SweepTrajectory {
  std::vector<Waypoint> g1;
  std::vector<Waypoint> g2;
};

// Coordinated thread sweep: g1 descends along the wound center, lifts the
// thread and holds it laterally; g2 mirrors on the opposite side once g1's
// lateral move is done, then returns home. g1's last waypoint is held through
// extraction.
inline SweepTrajectory thread_sweep_trajectory(const WoundModel& model,
                                               const SweepConfig& cfg = {}) {
  if (!(cfg.lift > 0.0) || !(cfg.lateral > 0.0))
    fail(errc::invalid_config, "sweep lift and lateral must be > 0");
  const Point3 wc = model.wound_center();
  const Vec3 up = model.surface_plane.normal;
  const Vec3 across = model.width_dir;

  auto wp = [](int id, Gripper g, const Point3& p, const std::string& label,
               std::optional<int> after = std::nullopt) {
    Waypoint w;
    w.id = id;
    w.gripper = g;
    w.pose.position = p;
    w.grip = GripState::closed;
    w.label = label;
    w.after = after;
    return w;
  };

  SweepTrajectory out;
  out.g1.push_back(wp(0, Gripper::g1, wc + cfg.lift * up, "sweep:g1:approach"));
  out.g1.push_back(wp(1, Gripper::g1, wc, "sweep:g1:descend"));
  out.g1.push_back(wp(2, Gripper::g1, wc + cfg.lift * up, "sweep:g1:lift"));
  out.g1.push_back(
      wp(3, Gripper::g1, wc + cfg.lift * up + cfg.lateral * across, "sweep:g1:hold"));

  out.g2.push_back(wp(4, Gripper::g2, wc, "sweep:g2:descend", 3));
  out.g2.push_back(wp(5, Gripper::g2, wc + cfg.lift * up - cfg.lateral * across, "sweep:g2:lift"));
  out.g2.push_back(wp(6, Gripper::g2, wc + 2.0 * cfg.lift * up, "sweep:g2:home"));
  return out;
}

}  // namespace stitchkit
