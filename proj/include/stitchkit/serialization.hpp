#pragma once

#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "stitchkit/camera.hpp"
#include "stitchkit/controller.hpp"
#include "stitchkit/error.hpp"
#include "stitchkit/geom.hpp"
#include "stitchkit/needle.hpp"
#include "stitchkit/scene.hpp"
#include "stitchkit/sim.hpp"
#include "stitchkit/wound.hpp"

namespace stitchkit {

// Key order is fixed (ordered_json) so identical runs serialize to identical
// bytes.
using Json = nlohmann::ordered_json;

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) fail(errc::invalid_params, "expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json rotation_to_json(const Eigen::Matrix3d& r) {
  Json rows = Json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(Json::array({r(i, 0), r(i, 1), r(i, 2)}));
  return rows;
}

inline Eigen::Matrix3d rotation_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) fail(errc::invalid_params, "expected 3 rotation rows");
  Eigen::Matrix3d r;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_array() || j[i].size() != 3)
      fail(errc::invalid_params, "rotation rows must have 3 entries");
    for (int k = 0; k < 3; ++k) r(i, k) = j[i][k].get<double>();
  }
  return r;
}

// ---- camera ----

inline Json camera_to_json(const CameraModel& c) {
  Json j;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["width"] = c.width;
  j["height"] = c.height;
  j["rotation"] = rotation_to_json(c.pose.rotation);
  j["translation"] = to_json(c.pose.position);
  return j;
}

inline CameraModel camera_from_json(const Json& j) {
  CameraModel c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  if (j.contains("rotation")) c.pose.rotation = rotation_from_json(j.at("rotation"));
  if (j.contains("translation")) c.pose.position = vec3_from_json(j.at("translation"));
  c.validate();
  return c;
}

// ---- configs (parse on top of defaults) ----

inline Json ransac_to_json(const RansacConfig& c) {
  return Json{{"iterations", c.iterations},
              {"inlier_threshold", c.inlier_threshold},
              {"min_inliers", c.min_inliers},
              {"seed", c.seed}};
}

inline RansacConfig ransac_from_json(const Json& j, RansacConfig base = {}) {
  base.iterations = j.value("iterations", base.iterations);
  base.inlier_threshold = j.value("inlier_threshold", base.inlier_threshold);
  base.min_inliers = j.value("min_inliers", base.min_inliers);
  base.seed = j.value("seed", base.seed);
  return base;
}

inline Json ekf_to_json(const EkfConfig& c) {
  return Json{{"init_count", c.init_count},
              {"update_count", c.update_count},
              {"gate_sigma", c.gate_sigma},
              {"max_measurements", c.max_measurements},
              {"process_noise", c.process_noise},
              {"covariance_floor", c.covariance_floor},
              {"fixed_measurement_noise", c.fixed_measurement_noise},
              {"mahalanobis_gate", c.mahalanobis_gate}};
}

inline EkfConfig ekf_from_json(const Json& j, EkfConfig base = {}) {
  base.init_count = j.value("init_count", base.init_count);
  base.update_count = j.value("update_count", base.update_count);
  base.gate_sigma = j.value("gate_sigma", base.gate_sigma);
  base.max_measurements = j.value("max_measurements", base.max_measurements);
  base.process_noise = j.value("process_noise", base.process_noise);
  base.covariance_floor = j.value("covariance_floor", base.covariance_floor);
  base.fixed_measurement_noise = j.value("fixed_measurement_noise", base.fixed_measurement_noise);
  base.mahalanobis_gate = j.value("mahalanobis_gate", base.mahalanobis_gate);
  base.validate();
  return base;
}

inline Json noise_to_json(const NoiseModel& n) {
  return Json{{"sigma", n.sigma},
              {"specular_dropout", n.specular_dropout},
              {"boundary_factor", n.boundary_factor},
              {"boundary_band", n.boundary_band},
              {"seed", n.seed}};
}

inline NoiseModel noise_from_json(const Json& j, NoiseModel base = {}) {
  base.sigma = j.value("sigma", base.sigma);
  base.specular_dropout = j.value("specular_dropout", base.specular_dropout);
  base.boundary_factor = j.value("boundary_factor", base.boundary_factor);
  base.boundary_band = j.value("boundary_band", base.boundary_band);
  base.seed = j.value("seed", base.seed);
  base.validate();
  return base;
}

inline Json wound_params_to_json(const WoundSceneParams& p) {
  Json j{{"height", p.height},       {"width", p.width},
         {"length", p.length},       {"points_per_cloud", p.points_per_cloud},
         {"noise_sigma", p.noise_sigma}, {"seed", p.seed}};
  j["surface_rotation"] = rotation_to_json(p.surface_pose.rotation);
  j["surface_translation"] = to_json(p.surface_pose.position);
  return j;
}

inline WoundSceneParams wound_params_from_json(const Json& j, WoundSceneParams base = {}) {
  base.height = j.value("height", base.height);
  base.width = j.value("width", base.width);
  base.length = j.value("length", base.length);
  base.points_per_cloud = j.value("points_per_cloud", base.points_per_cloud);
  base.noise_sigma = j.value("noise_sigma", base.noise_sigma);
  base.seed = j.value("seed", base.seed);
  if (j.contains("surface_rotation"))
    base.surface_pose.rotation = rotation_from_json(j.at("surface_rotation"));
  if (j.contains("surface_translation"))
    base.surface_pose.position = vec3_from_json(j.at("surface_translation"));
  base.validate();
  return base;
}

inline Json failure_to_json(const FailureParams& f) {
  return Json{{"grasp_tolerance", f.grasp_tolerance},
              {"insertion_height_tolerance", f.insertion_height_tolerance},
              {"tangle_prob_raw", f.tangle_prob_raw},
              {"tangle_prob_swept", f.tangle_prob_swept},
              {"alignment_snap_prob", f.alignment_snap_prob},
              {"alignment_snap_suppressed", f.alignment_snap_suppressed}};
}

inline FailureParams failure_from_json(const Json& j, FailureParams base = {}) {
  base.grasp_tolerance = j.value("grasp_tolerance", base.grasp_tolerance);
  base.insertion_height_tolerance =
      j.value("insertion_height_tolerance", base.insertion_height_tolerance);
  base.tangle_prob_raw = j.value("tangle_prob_raw", base.tangle_prob_raw);
  base.tangle_prob_swept = j.value("tangle_prob_swept", base.tangle_prob_swept);
  base.alignment_snap_prob = j.value("alignment_snap_prob", base.alignment_snap_prob);
  base.alignment_snap_suppressed =
      j.value("alignment_snap_suppressed", base.alignment_snap_suppressed);
  base.validate();
  return base;
}

inline Json trial_config_to_json(const TrialConfig& c) {
  Json j;
  j["n_sutures"] = c.n_sutures;
  j["enable_ekf"] = c.enable_ekf;
  j["enable_thread_mgmt"] = c.enable_thread_mgmt;
  j["noise"] = noise_to_json(c.noise);
  j["failure"] = failure_to_json(c.failure);
  j["wound"] = wound_params_to_json(c.wound);
  j["needle_radius"] = c.needle_radius;
  j["cloud_points"] = c.cloud_points;
  j["ransac"] = ransac_to_json(c.ransac);
  j["ekf"] = ekf_to_json(c.ekf);
  j["estimate_success_threshold"] = c.estimate_success_threshold;
  j["seed"] = c.seed;
  return j;
}

inline TrialConfig trial_config_from_json(const Json& j, TrialConfig base = {}) {
  base.n_sutures = j.value("n_sutures", base.n_sutures);
  base.enable_ekf = j.value("enable_ekf", base.enable_ekf);
  base.enable_thread_mgmt = j.value("enable_thread_mgmt", base.enable_thread_mgmt);
  if (j.contains("noise")) base.noise = noise_from_json(j.at("noise"), base.noise);
  if (j.contains("failure")) base.failure = failure_from_json(j.at("failure"), base.failure);
  if (j.contains("wound")) base.wound = wound_params_from_json(j.at("wound"), base.wound);
  base.needle_radius = j.value("needle_radius", base.needle_radius);
  base.cloud_points = j.value("cloud_points", base.cloud_points);
  if (j.contains("ransac")) base.ransac = ransac_from_json(j.at("ransac"), base.ransac);
  if (j.contains("ekf")) base.ekf = ekf_from_json(j.at("ekf"), base.ekf);
  base.estimate_success_threshold =
      j.value("estimate_success_threshold", base.estimate_success_threshold);
  base.seed = j.value("seed", base.seed);
  base.validate();
  return base;
}

// ---- outputs ----

inline Json measurement_to_json(const NeedleMeasurement& m) {
  Json j;
  j["center"] = to_json(m.center);
  j["endpoints"] = Json{{"left", to_json(m.endpoint_left)}, {"right", to_json(m.endpoint_right)}};
  j["normal"] = to_json(m.normal);
  j["radius"] = m.radius;
  return j;
}

inline Json pose_estimate_to_json(const EstimateResult& result, const Point3& tip) {
  Json j = measurement_to_json(result.estimate);
  j["tip"] = to_json(tip);
  j["accepted_count"] = result.accepted_count;
  j["consumed_count"] = result.consumed_count;
  return j;
}

inline Json plan_to_json(const WoundModel& model, const SuturePlan& plan) {
  Json j;
  j["h"] = model.height;
  j["w"] = model.width;
  j["centerline"] = Json{{"origin", to_json(model.centerline.origin)},
                         {"direction", to_json(model.centerline.direction)},
                         {"s_min", model.s_min},
                         {"s_max", model.s_max}};
  j["positions"] = Json::array();
  for (const Point3& p : plan.centered_positions) j["positions"].push_back(to_json(p));
  j["pairs"] = Json::array();
  for (const SuturePair& pr : plan.pairs)
    j["pairs"].push_back(
        Json{{"insertion", to_json(pr.insertion)}, {"extraction", to_json(pr.extraction)}});
  j["d"] = plan.thread_length;
  return j;
}

inline Json waypoint_to_json(const Waypoint& w) {
  Json j;
  j["id"] = w.id;
  j["gripper"] = w.gripper == Gripper::g1 ? "g1" : "g2";
  j["position"] = to_json(w.pose.position);
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(w.pose.rotation(r, c));
  j["rotation"] = rot;  // row-major 9
  j["grip"] = w.grip == GripState::open ? "open" : "closed";
  j["label"] = w.label;
  if (w.after) j["after"] = *w.after;
  return j;
}

inline Json waypoints_to_json(std::span<const Waypoint> wps) {
  Json arr = Json::array();
  for (const Waypoint& w : wps) arr.push_back(waypoint_to_json(w));
  return arr;
}

inline Json metrics_to_json(const MetricsReport& r) {
  Json j;
  j["trials"] = r.trials;
  j["avg_sutures"] = r.avg_sutures;
  j["std_sutures"] = r.std_sutures;
  j["single_suture_success_rate"] = r.single_suture_success_rate;
  j["wound_gap_closure_rate"] = r.wound_gap_closure_rate;
  j["errors"] = Json{{"A", r.errors.alignment},
                     {"T", r.errors.thread},
                     {"I", r.errors.insertion},
                     {"M", r.errors.missed_grasp},
                     {"total", r.errors.total()}};
  j["needle_estimate_success_rate"] = r.needle_estimate_success_rate;
  return j;
}

inline Json trial_result_to_json(const TrialResult& r) {
  Json j;
  j["seed"] = r.seed;
  j["sutures_attempted"] = r.sutures_attempted;
  j["sutures_succeeded"] = r.sutures_succeeded;
  j["closed_stitches"] = r.closed_stitches;
  j["pose_estimate_successes"] = r.pose_estimate_successes;
  j["pose_estimate_attempts"] = r.pose_estimate_attempts;
  j["errors"] = Json::array();
  for (const ErrorEvent& e : r.errors)
    j["errors"].push_back(
        Json{{"kind", to_letter(e.kind)}, {"suture", e.suture_index}, {"detail", e.detail}});
  return j;
}

// The `simulate` report: config echo, aggregate metrics, per-trial array.
inline Json build_simulation_report(const TrialConfig& base, int n_trials,
                                    std::uint64_t master_seed, Ablation ablation) {
  TrialConfig cfg = base;
  apply_ablation(cfg, ablation);
  const std::vector<TrialResult> results = run_trials(cfg, n_trials, master_seed);
  const MetricsReport metrics = aggregate(results, cfg.n_sutures);
  Json j;
  j["ablation"] = to_string(ablation);
  j["trials"] = n_trials;
  j["sutures_per_trial"] = cfg.n_sutures;
  j["seed"] = master_seed;
  j["config"] = trial_config_to_json(cfg);
  j["metrics"] = metrics_to_json(metrics);
  j["per_trial"] = Json::array();
  for (const TrialResult& r : results) j["per_trial"].push_back(trial_result_to_json(r));
  return j;
}

}  // namespace stitchkit
