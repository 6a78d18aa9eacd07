#pragma once

#include <cmath>

#include "stitchkit/error.hpp"
#include "stitchkit/geom.hpp"

namespace stitchkit {

// Pinhole camera with known intrinsics and a camera-to-world pose
// (pose.position = optical center in world, pose.rotation columns = camera
// axes in world; column 2 is the optical axis).
struct CameraModel {
  double fx = 800.0;
  double fy = 800.0;
  double cx = 640.0;
  double cy = 480.0;
  int width = 1280;
  int height = 960;
  Pose pose;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) fail(errc::invalid_params, "focal lengths must be positive");
    if (width <= 0 || height <= 0) fail(errc::invalid_params, "resolution must be positive");
    if (!is_rotation(pose.rotation)) fail(errc::invalid_params, "camera rotation not orthonormal");
  }

  Vec3 view_direction() const { return pose.rotation.col(2); }

  struct Projection {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;  // camera-frame z, mm; <= 0 means behind the camera
  };

  Projection project(const Point3& p_world) const {
    const Point3 pc = pose.rotation.transpose() * (p_world - pose.position);
    Projection out;
    out.depth = pc.z();
    if (pc.z() > 0.0) {
      out.u = fx * pc.x() / pc.z() + cx;
      out.v = fy * pc.y() / pc.z() + cy;
    }
    return out;
  }

  bool in_image(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u <= width - 1 && v <= height - 1;
  }

  // World-frame ray through pixel (u, v).
  Ray3 pixel_ray(double u, double v) const {
    const Vec3 dir_cam((u - cx) / fx, (v - cy) / fy, 1.0);
    return {pose.position, (pose.rotation * dir_cam).normalized()};
  }

  // Pixel plus camera-frame depth back to a world point.
  Point3 deproject(double u, double v, double depth) const {
    const Point3 pc((u - cx) / fx * depth, (v - cy) / fy * depth, depth);
    return pose.rotation * pc + pose.position;
  }
};

}  // namespace stitchkit
