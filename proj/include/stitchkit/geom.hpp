#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "stitchkit/error.hpp"
#include "stitchkit/rng.hpp"

namespace stitchkit {

using Vec3 = Eigen::Vector3d;
using Point3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

inline bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

// Sign canonicalization: largest-magnitude component made positive.
inline Vec3 canonical_direction(const Vec3& d) {
  int k = 0;
  d.cwiseAbs().maxCoeff(&k);
  return d[k] < 0.0 ? Vec3(-d) : d;
}

// Deterministic in-plane basis (u, v) with u x v = n for a unit normal n.
inline std::pair<Vec3, Vec3> plane_basis(const Vec3& n) {
  int k = 0;
  n.cwiseAbs().minCoeff(&k);
  Vec3 e = Vec3::Zero();
  e[k] = 1.0;
  const Vec3 u = n.cross(e).normalized();
  const Vec3 v = n.cross(u);
  return {u, v};
}

// Plane {p : normal . p = offset}, normal unit.
struct Plane {
  Vec3 normal{0.0, 0.0, 1.0};
  double offset{0.0};

  double signed_distance(const Point3& p) const { return normal.dot(p) - offset; }

  Point3 project(const Point3& p) const { return p - signed_distance(p) * normal; }

  Plane flipped() const { return {-normal, -offset}; }

  Plane canonicalized() const {
    int k = 0;
    normal.cwiseAbs().maxCoeff(&k);
    return normal[k] < 0.0 ? flipped() : *this;
  }
};

struct Line3 {
  Point3 origin{Point3::Zero()};
  Vec3 direction{1.0, 0.0, 0.0};

  Point3 closest_point(const Point3& p) const {
    return origin + direction.dot(p - origin) * direction;
  }

  double distance_to(const Point3& p) const { return (p - closest_point(p)).norm(); }
};

struct Circle3 {
  Point3 center{Point3::Zero()};
  Vec3 normal{0.0, 0.0, 1.0};
  double radius{0.0};
};

struct Ray3 {
  Point3 origin{Point3::Zero()};
  Vec3 direction{0.0, 0.0, 1.0};
};

// Rigid transform p -> rotation * p + position.
struct Pose {
  Point3 position{Point3::Zero()};
  Eigen::Matrix3d rotation{Eigen::Matrix3d::Identity()};

  Point3 apply(const Point3& p) const { return rotation * p + position; }
  Vec3 rotate(const Vec3& v) const { return rotation * v; }

  Pose inverse() const { return {-(rotation.transpose() * position), rotation.transpose()}; }

  Pose compose(const Pose& other) const {
    return {rotation * other.position + position, rotation * other.rotation};
  }
};

inline bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9) {
  const Eigen::Matrix3d delta = r * r.transpose() - Eigen::Matrix3d::Identity();
  return delta.cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

// Rigid transform that rotates by `r` about a fixed pivot point.
inline Pose rotation_about(const Eigen::Matrix3d& r, const Point3& pivot) {
  return {pivot - r * pivot, r};
}

struct RansacConfig {
  int iterations = 500;
  double inlier_threshold = 0.5;  // mm
  // 0 requests the default rule: max(20, 30% of N), capped at N.
  int min_inliers = 0;
  std::uint64_t seed = 0;

  RansacConfig with_seed(std::uint64_t s) const {
    RansacConfig c = *this;
    c.seed = s;
    return c;
  }
};

namespace detail {

inline void validate_ransac(const RansacConfig& cfg, int model_minimum) {
  if (cfg.iterations < 1) fail(errc::invalid_config, "ransac iterations must be >= 1");
  if (!(cfg.inlier_threshold > 0.0)) fail(errc::invalid_config, "inlier threshold must be > 0");
  if (cfg.min_inliers != 0 && cfg.min_inliers < model_minimum)
    fail(errc::invalid_config, "min_inliers below model minimum");
}

inline std::size_t resolve_min_inliers(const RansacConfig& cfg, std::size_t n,
                                       std::size_t model_minimum) {
  if (cfg.min_inliers > 0) return static_cast<std::size_t>(cfg.min_inliers);
  std::size_t rule = std::max<std::size_t>(20, (3 * n + 9) / 10);
  return std::max(model_minimum, std::min(rule, n));
}

}  // namespace detail

struct PlaneFit {
  Plane plane;
  std::vector<std::size_t> inliers;
};

struct LineFit {
  Line3 line;
  std::vector<std::size_t> inliers;
};

// RANSAC plane: best consensus over sampled triplets, least-squares refit to
// the consensus set, inliers recomputed against the refit plane so every
// reported inlier is within the threshold of the returned plane.
inline PlaneFit ransac_fit_plane(std::span<const Point3> points, const RansacConfig& cfg) {
  detail::validate_ransac(cfg, 3);
  const std::size_t n = points.size();
  if (n < 3) fail(errc::degenerate_input, "plane fit needs at least 3 points");
  const std::size_t min_inliers = detail::resolve_min_inliers(cfg, n, 3);

  Rng rng(cfg.seed);
  bool have_model = false;
  Vec3 best_normal = Vec3::UnitZ();
  double best_offset = 0.0;
  std::size_t best_count = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    std::size_t i = rng.index(n);
    std::size_t j = rng.index(n);
    while (j == i) j = rng.index(n);
    std::size_t k = rng.index(n);
    while (k == i || k == j) k = rng.index(n);

    const Vec3 cr = (points[j] - points[i]).cross(points[k] - points[i]);
    const double norm = cr.norm();
    if (norm < 1e-12) continue;
    const Vec3 normal = cr / norm;
    const double offset = normal.dot(points[i]);

    std::size_t count = 0;
    for (const Point3& p : points)
      if (std::abs(normal.dot(p) - offset) <= cfg.inlier_threshold) ++count;

    have_model = true;
    if (count > best_count) {
      best_count = count;
      best_normal = normal;
      best_offset = offset;
    }
  }

  if (!have_model) fail(errc::degenerate_input, "all sampled triplets were collinear");
  if (best_count < min_inliers) fail(errc::no_consensus, "plane consensus below min_inliers");

  // Least-squares refit: centroid + smallest principal direction.
  Point3 centroid = Point3::Zero();
  std::size_t count = 0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (std::abs(best_normal.dot(points[idx]) - best_offset) <= cfg.inlier_threshold) {
      centroid += points[idx];
      ++count;
    }
  }
  centroid /= static_cast<double>(count);
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (std::abs(best_normal.dot(points[idx]) - best_offset) <= cfg.inlier_threshold) {
      const Vec3 d = points[idx] - centroid;
      scatter += d * d.transpose();
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  Vec3 normal = eig.eigenvectors().col(0);
  // Guard: near-degenerate scatter (two vanishing eigenvalues) leaves the
  // normal unconstrained; keep the consensus model.
  if (eig.eigenvalues()(1) <= 1e-12 * std::max(1.0, eig.eigenvalues()(2)))
    normal = best_normal;
  if (normal.dot(best_normal) < 0.0) normal = -normal;
  Plane plane{normal.normalized(), 0.0};
  plane.offset = plane.normal.dot(centroid);
  plane = plane.canonicalized();

  PlaneFit fit;
  fit.plane = plane;
  for (std::size_t idx = 0; idx < n; ++idx)
    if (std::abs(plane.signed_distance(points[idx])) <= cfg.inlier_threshold)
      fit.inliers.push_back(idx);
  if (fit.inliers.size() < 3) fail(errc::no_consensus, "refit plane lost consensus");
  return fit;
}

// RANSAC line: 2-point samples, refit via first principal direction of the
// consensus set, direction sign canonicalized.
inline LineFit ransac_fit_line(std::span<const Point3> points, const RansacConfig& cfg) {
  detail::validate_ransac(cfg, 2);
  const std::size_t n = points.size();
  if (n < 2) fail(errc::degenerate_input, "line fit needs at least 2 points");
  const std::size_t min_inliers = detail::resolve_min_inliers(cfg, n, 2);

  Rng rng(cfg.seed);
  bool have_model = false;
  Line3 best_line;
  std::size_t best_count = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    std::size_t i = rng.index(n);
    std::size_t j = rng.index(n);
    while (j == i) j = rng.index(n);
    const Vec3 d = points[j] - points[i];
    const double norm = d.norm();
    if (norm < 1e-12) continue;
    Line3 line{points[i], d / norm};

    std::size_t count = 0;
    for (const Point3& p : points)
      if (line.distance_to(p) <= cfg.inlier_threshold) ++count;

    have_model = true;
    if (count > best_count) {
      best_count = count;
      best_line = line;
    }
  }

  if (!have_model) fail(errc::degenerate_input, "all points coincide");
  if (best_count < min_inliers) fail(errc::no_consensus, "line consensus below min_inliers");

  Point3 centroid = Point3::Zero();
  std::size_t count = 0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (best_line.distance_to(points[idx]) <= cfg.inlier_threshold) {
      centroid += points[idx];
      ++count;
    }
  }
  centroid /= static_cast<double>(count);
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (best_line.distance_to(points[idx]) <= cfg.inlier_threshold) {
      const Vec3 d = points[idx] - centroid;
      scatter += d * d.transpose();
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  Vec3 direction = eig.eigenvectors().col(2);
  if (eig.eigenvalues()(2) <= 1e-12) direction = best_line.direction;
  Line3 line{centroid, canonical_direction(direction.normalized())};

  LineFit fit;
  fit.line = line;
  for (std::size_t idx = 0; idx < n; ++idx)
    if (line.distance_to(points[idx]) <= cfg.inlier_threshold) fit.inliers.push_back(idx);
  if (fit.inliers.size() < 2) fail(errc::no_consensus, "refit line lost consensus");
  return fit;
}

inline Point3 project_point_to_plane(const Point3& p, const Plane& plane) {
  return plane.project(p);
}

// Algebraic (Kasa) circle fit in plane coordinates. Points are projected onto
// the plane internally; the circle normal equals the plane normal.
inline Circle3 fit_circle_in_plane(std::span<const Point3> points, const Plane& plane) {
  if (points.size() < 3) fail(errc::degenerate_input, "circle fit needs at least 3 points");

  const auto [u, v] = plane_basis(plane.normal);
  Point3 centroid = Point3::Zero();
  for (const Point3& p : points) centroid += plane.project(p);
  centroid /= static_cast<double>(points.size());

  // Centered 2D coordinates: sum(x) = sum(y) = 0 decouples the normal
  // equations of  x^2 + y^2 = D x + E y + F.
  double sxx = 0.0, sxy = 0.0, syy = 0.0, b1 = 0.0, b2 = 0.0, b3 = 0.0;
  for (const Point3& p : points) {
    const Vec3 d = plane.project(p) - centroid;
    const double x = d.dot(u);
    const double y = d.dot(v);
    const double z = x * x + y * y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    b1 += x * z;
    b2 += y * z;
    b3 += z;
  }
  const double det = sxx * syy - sxy * sxy;
  const double trace = sxx + syy;
  if (!(det > 1e-12 * trace * trace))
    fail(errc::not_a_circle, "points are collinear in-plane");

  const double dcoef = (b1 * syy - b2 * sxy) / det;
  const double ecoef = (b2 * sxx - b1 * sxy) / det;
  const double fcoef = b3 / static_cast<double>(points.size());
  const double cx = 0.5 * dcoef;
  const double cy = 0.5 * ecoef;
  const double r2 = fcoef + cx * cx + cy * cy;
  if (!std::isfinite(r2) || !(r2 > 0.0)) fail(errc::not_a_circle, "non-positive fitted radius");

  Circle3 circle;
  circle.center = centroid + cx * u + cy * v;
  circle.normal = plane.normal;
  circle.radius = std::sqrt(r2);
  return circle;
}

// Maximal-distance pair, exhaustive. Ties broken by lexicographic order of
// the (sorted) pair so the result is invariant under input permutation.
inline std::pair<Point3, Point3> farthest_pair(std::span<const Point3> points) {
  if (points.size() < 2) fail(errc::degenerate_input, "farthest_pair needs at least 2 points");
  double best_d2 = -1.0;
  Point3 best_a = points[0], best_b = points[0];
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      Point3 a = points[i], b = points[j];
      if (lex_less(b, a)) std::swap(a, b);
      const double d2 = (a - b).squaredNorm();
      const bool better =
          d2 > best_d2 ||
          (d2 == best_d2 && (lex_less(a, best_a) ||
                             (!lex_less(best_a, a) && lex_less(b, best_b))));
      if (better) {
        best_d2 = d2;
        best_a = a;
        best_b = b;
      }
    }
  }
  return {best_a, best_b};
}

// Ray/plane hit followed by a snap to the nearest rim point. The result lies
// exactly on the circle; the snap fails beyond snap_tolerance.
inline Point3 ray_circle_intersection(const Ray3& ray, const Circle3& circle,
                                      double snap_tolerance) {
  const double denom = ray.direction.dot(circle.normal);
  if (std::abs(denom) <= 1e-6) fail(errc::ray_parallel, "ray parallel to circle plane");
  const double t = (circle.normal.dot(circle.center) - circle.normal.dot(ray.origin)) / denom;
  if (t < 0.0) fail(errc::tip_unresolved, "circle plane behind ray origin");

  const Point3 hit = ray.origin + t * ray.direction;
  Vec3 radial = hit - circle.center;
  radial -= radial.dot(circle.normal) * circle.normal;
  const double rn = radial.norm();
  if (rn < 1e-12) {
    if (circle.radius > snap_tolerance)
      fail(errc::tip_unresolved, "plane hit at circle center, snap ambiguous");
    const auto [u, v] = plane_basis(circle.normal);
    return circle.center + circle.radius * u;
  }
  if (std::abs(rn - circle.radius) > snap_tolerance)
    fail(errc::tip_unresolved, "plane hit too far from circle rim");
  return circle.center + (circle.radius / rn) * radial;
}

inline Point3 ray_circle_intersection(const Ray3& ray, const Circle3& circle) {
  return ray_circle_intersection(ray, circle, 0.25 * circle.radius);
}

// Offset between near-parallel planes, measured along a's normal to the
// projection of b's reference point (the point of b closest to the origin).
inline double plane_plane_distance(const Plane& a, const Plane& b, double max_angle_deg = 10.0) {
  const double c = std::clamp(std::abs(a.normal.dot(b.normal)), 0.0, 1.0);
  if (std::acos(c) > deg2rad(max_angle_deg))
    fail(errc::non_parallel_planes, "plane normals exceed max angle");
  const Point3 ref_b = b.offset * b.normal;
  return std::abs(a.normal.dot(ref_b) - a.offset);
}

}  // namespace stitchkit
