#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stitchkit/controller.hpp"
#include "stitchkit/error.hpp"
#include "stitchkit/needle.hpp"
#include "stitchkit/rng.hpp"
#include "stitchkit/scene.hpp"
#include "stitchkit/wound.hpp"

namespace stitchkit {

// Failure-injection parameters. Calibrated, not measured: tuned with the
// `calibrate` CLI sweep so the full pipeline, no-EKF and no-thread-management
// arms land in the intended order.
struct FailureParams {
  double grasp_tolerance = 3.5;             // mm; beyond this the grasp misses (M)
  double insertion_height_tolerance = 1.0;  // mm of vertical tip error (I)
  double tangle_prob_raw = 0.30;            // thread tangling without the sweep (T)
  double tangle_prob_swept = 0.10;          // thread tangling after the sweep (T)
  double alignment_snap_prob = 0.50;        // needle snap when aligning on a degraded estimate
  double alignment_snap_suppressed = 0.02;  // residual snap probability otherwise (A)

  void validate() const {
    for (double p : {tangle_prob_raw, tangle_prob_swept, alignment_snap_prob,
                     alignment_snap_suppressed})
      if (p < 0.0 || p >= 1.0) fail(errc::invalid_config, "probabilities must be in [0, 1)");
    if (!(grasp_tolerance > 0.0) || !(insertion_height_tolerance > 0.0))
      fail(errc::invalid_config, "tolerances must be > 0");
  }
};

struct TrialConfig {
  int n_sutures = 6;
  bool enable_ekf = true;
  bool enable_thread_mgmt = true;
  NoiseModel noise;
  FailureParams failure;
  std::uint64_t seed = 0;

  WoundSceneParams wound;
  double needle_radius = kDefaultNeedleRadius;
  int cloud_points = 400;
  RansacConfig ransac;
  EkfConfig ekf;
  // Pose-estimate "success" threshold against the oracle, mm; stands in for
  // the visual-overlay judgment.
  double estimate_success_threshold = 2.0;

  void validate() const {
    if (n_sutures < 1) fail(errc::invalid_config, "n_sutures must be >= 1");
    if (cloud_points < 10) fail(errc::invalid_config, "cloud_points must be >= 10");
    if (!(needle_radius > 0.0)) fail(errc::invalid_config, "needle_radius must be > 0");
    if (!(estimate_success_threshold > 0.0))
      fail(errc::invalid_config, "estimate_success_threshold must be > 0");
    noise.validate();
    failure.validate();
    wound.validate();
    ekf.validate();
  }
};

enum class ErrorKind { alignment, thread, insertion, missed_grasp };

inline const char* to_letter(ErrorKind k) {
  switch (k) {
    case ErrorKind::alignment: return "A";
    case ErrorKind::thread: return "T";
    case ErrorKind::insertion: return "I";
    case ErrorKind::missed_grasp: return "M";
  }
  return "?";
}

struct ErrorEvent {
  ErrorKind kind = ErrorKind::alignment;
  int suture_index = 0;  // 1-based
  std::string detail;
};

struct TrialResult {
  int sutures_attempted = 0;
  int sutures_succeeded = 0;
  int closed_stitches = 0;
  std::vector<ErrorEvent> errors;
  int pose_estimate_successes = 0;
  int pose_estimate_attempts = 0;
  std::uint64_t seed = 0;
};

struct ErrorCounts {
  int alignment = 0;
  int thread = 0;
  int insertion = 0;
  int missed_grasp = 0;

  int total() const { return alignment + thread + insertion + missed_grasp; }
};

struct MetricsReport {
  int trials = 0;
  double avg_sutures = 0.0;
  double std_sutures = 0.0;
  double single_suture_success_rate = 0.0;  // percent
  double wound_gap_closure_rate = 0.0;      // percent
  ErrorCounts errors;
  double needle_estimate_success_rate = 0.0;  // percent
};

namespace detail {

inline std::string format_mm(const char* what, double value, double limit) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s %.3f mm (limit %.3f mm)", what, value, limit);
  return buf;
}

}  // namespace detail

// One simulated trial: generate a wound scene, build the model and plan, then
// run n_sutures cycles of estimate -> align -> insert -> sweep -> extract +
// cinch -> handover with failure injection. A missed grasp (M) drops the
// needle and aborts the trial; A/T/I fail the suture and the trial continues.
// Deterministic given cfg.seed; the failure draws are consumed in a fixed
// pattern so paired seeds stay comparable across flag settings.
inline TrialResult run_trial(const TrialConfig& cfg) {
  cfg.validate();
  TrialResult result;
  result.seed = cfg.seed;

  WoundSceneParams wound_params = cfg.wound;
  wound_params.seed = Rng::mix(cfg.seed, 1);
  const GeneratedWound gw = generate_wound_scene(wound_params);
  const WoundModel model =
      build_wound_model(gw.scene, cfg.ransac.with_seed(Rng::mix(cfg.seed, 2)));
  const SuturePlan plan = make_suture_plan(model, cfg.n_sutures);
  const double d = plan.thread_length;

  Rng jitter_rng(Rng::mix(cfg.seed, 3));
  Rng fail_rng(Rng::mix(cfg.seed, 4));

  for (int i = 1; i <= cfg.n_sutures; ++i) {
    ++result.sutures_attempted;
    const SuturePair& pair = plan.pairs[i - 1];

    // Ground truth: tip at the insertion point, needle plane across the
    // wound, pose jittered a few degrees. Fixed draw count per suture.
    const Vec3 jitter_axis = Vec3(jitter_rng.uniform(-1, 1), jitter_rng.uniform(-1, 1),
                                  jitter_rng.uniform(-1, 1))
                                 .normalized();
    const double jitter_angle = jitter_rng.uniform(0.0, deg2rad(8.0));
    NeedleGroundTruth gt;
    gt.radius = cfg.needle_radius;
    Eigen::Matrix3d r0;
    r0.col(0) = -model.surface_plane.normal;
    Vec3 plane_normal = model.centerline.direction;
    plane_normal -= plane_normal.dot(r0.col(0)) * r0.col(0);
    r0.col(2) = plane_normal.normalized();
    r0.col(1) = r0.col(2).cross(r0.col(0));
    gt.pose.rotation = Eigen::AngleAxisd(jitter_angle, jitter_axis).toRotationMatrix() * r0;
    gt.pose.position = pair.insertion - gt.pose.rotate(Point3(gt.radius, 0.0, 0.0));
    const NeedleMeasurement oracle = oracle_needle_state(gt);

    // Failure draws, consumed whether or not the stages are reached.
    const double u_align = fail_rng.uniform01();
    const double u_tangle = fail_rng.uniform01();

    // Pose estimation from sampled clouds (fresh cloud per measurement).
    int k = 0;
    auto measure_once = [&]() {
      NoiseModel nm = cfg.noise;
      nm.seed = Rng::mix(cfg.seed, 1000 + i * 64 + k);
      const auto cloud = sample_needle_cloud(gt, nm, cfg.cloud_points);
      const auto m = measure_needle(
          cloud, cfg.needle_radius, cfg.ransac.with_seed(Rng::mix(cfg.seed, 5000 + i * 64 + k)));
      ++k;
      return m;
    };
    auto robust_measure = [&]() -> NeedleMeasurement {
      for (int attempt = 0; attempt < 3; ++attempt) {
        try {
          return measure_once();
        } catch (const Error&) {
          ++k;  // skip the failed cloud draw
        }
      }
      return measure_once();
    };

    std::optional<NeedleMeasurement> estimate;
    ++result.pose_estimate_attempts;
    try {
      if (cfg.enable_ekf) {
        try {
          estimate = estimate_needle(std::function<NeedleMeasurement()>(robust_measure), cfg.ekf)
                         .estimate;
        } catch (const Error& e) {
          if (e.code() != errc::estimate_timeout) throw;
          // low filter confidence: act on the best single measurement instead
          estimate = robust_measure();
        }
      } else {
        estimate = robust_measure();
      }
    } catch (const Error&) {
      estimate.reset();
    }

    if (!estimate) {
      result.errors.push_back(
          {ErrorKind::missed_grasp, i, "needle estimate unavailable; needle dropped"});
      break;  // nonrecoverable without a human
    }

    const double pose_error = endpoint_error(*estimate, oracle);
    const bool estimate_ok = pose_error < cfg.estimate_success_threshold;
    if (estimate_ok) ++result.pose_estimate_successes;

    if (pose_error > cfg.failure.grasp_tolerance) {
      result.errors.push_back(
          {ErrorKind::missed_grasp, i,
           detail::format_mm("pose error", pose_error, cfg.failure.grasp_tolerance)});
      break;
    }

    bool suture_failed = false;

    // Alignment: the ops run on the estimate; a degraded estimate leaves the
    // needle prone to snapping on release.
    try {
      (void)pre_insertion_alignment(*estimate, model);
    } catch (const Error&) {
      suture_failed = true;
      result.errors.push_back({ErrorKind::alignment, i, "pre-insertion alignment unreachable"});
    }
    const double p_align =
        estimate_ok ? cfg.failure.alignment_snap_suppressed : cfg.failure.alignment_snap_prob;
    if (!suture_failed && u_align < p_align) {
      suture_failed = true;
      result.errors.push_back({ErrorKind::alignment, i, "needle snapped out of alignment"});
    }

    // Insertion: the tip must arrive at the right height.
    if (!suture_failed) {
      const Point3 est_tip =
          (estimate->endpoint_right - oracle.endpoint_right).norm() <
                  (estimate->endpoint_left - oracle.endpoint_right).norm()
              ? estimate->endpoint_right
              : estimate->endpoint_left;
      const double height_error =
          std::abs(model.surface_plane.normal.dot(est_tip - oracle.endpoint_right));
      if (height_error > cfg.failure.insertion_height_tolerance) {
        suture_failed = true;
        result.errors.push_back(
            {ErrorKind::insertion, i,
             detail::format_mm("tip height error", height_error,
                               cfg.failure.insertion_height_tolerance)});
      } else {
        InsertionConfig icfg;
        icfg.tip_side = (estimate->endpoint_right - oracle.endpoint_right).norm() <
                                (estimate->endpoint_left - oracle.endpoint_right).norm()
                            ? TipSide::right
                            : TipSide::left;
        icfg.start_tolerance = cfg.failure.grasp_tolerance;
        try {
          (void)insertion_trajectory(*estimate, pair.insertion, model, icfg);
        } catch (const Error&) {
          suture_failed = true;
          result.errors.push_back({ErrorKind::insertion, i, "insertion trajectory infeasible"});
        }
      }
    }

    // Thread stage: sweep halves the tangling odds.
    double p_tangle = cfg.failure.tangle_prob_raw;
    if (cfg.enable_thread_mgmt) {
      (void)thread_sweep_trajectory(model);
      p_tangle = cfg.failure.tangle_prob_swept;
    }
    if (!suture_failed && u_tangle < p_tangle) {
      suture_failed = true;
      result.errors.push_back({ErrorKind::thread, i, "thread tangled during extraction"});
    }

    // Extraction, cinch and handover on the estimate.
    if (!suture_failed) {
      try {
        (void)cinch_translation(cfg.n_sutures, i, d);
        (void)extraction_grasp(*estimate, TipSide::right);
        (void)handover_alignment(*estimate, model);
        (void)handover_grasp(*estimate, TipSide::left);
      } catch (const Error&) {
        result.errors.push_back({ErrorKind::missed_grasp, i, "grasp planning failed"});
        break;
      }
    }

    if (!suture_failed) {
      ++result.sutures_succeeded;
      ++result.closed_stitches;  // a successful suture closes its gap
    }
  }
  return result;
}

// Metric aggregation across trials of a planned suture count.
inline MetricsReport aggregate(std::span<const TrialResult> results, int n_planned) {
  if (results.empty()) fail(errc::empty_results, "no trial results to aggregate");
  if (n_planned < 1) fail(errc::invalid_count, "n_planned must be >= 1");

  MetricsReport report;
  report.trials = static_cast<int>(results.size());
  double sum = 0.0;
  long attempted = 0, succeeded = 0, closed = 0, est_ok = 0, est_all = 0;
  for (const TrialResult& r : results) {
    sum += r.sutures_succeeded;
    attempted += r.sutures_attempted;
    succeeded += r.sutures_succeeded;
    closed += r.closed_stitches;
    est_ok += r.pose_estimate_successes;
    est_all += r.pose_estimate_attempts;
    for (const ErrorEvent& e : r.errors) {
      switch (e.kind) {
        case ErrorKind::alignment: ++report.errors.alignment; break;
        case ErrorKind::thread: ++report.errors.thread; break;
        case ErrorKind::insertion: ++report.errors.insertion; break;
        case ErrorKind::missed_grasp: ++report.errors.missed_grasp; break;
      }
    }
  }
  report.avg_sutures = sum / report.trials;
  if (report.trials > 1) {
    double ss = 0.0;
    for (const TrialResult& r : results) {
      const double dlt = r.sutures_succeeded - report.avg_sutures;
      ss += dlt * dlt;
    }
    report.std_sutures = std::sqrt(ss / (report.trials - 1));
  }
  report.single_suture_success_rate =
      attempted > 0 ? 100.0 * static_cast<double>(succeeded) / attempted : 0.0;
  report.wound_gap_closure_rate =
      100.0 * static_cast<double>(closed) / (static_cast<double>(n_planned) * report.trials);
  report.needle_estimate_success_rate =
      est_all > 0 ? 100.0 * static_cast<double>(est_ok) / est_all : 0.0;
  return report;
}

enum class Ablation { full, no_ekf, no_thread };

inline const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_ekf: return "no-ekf";
    case Ablation::no_thread: return "no-thread";
  }
  return "?";
}

inline void apply_ablation(TrialConfig& cfg, Ablation a) {
  cfg.enable_ekf = a != Ablation::no_ekf;
  cfg.enable_thread_mgmt = a != Ablation::no_thread;
}

// Runs n_trials with per-trial seeds derived from the master seed; the same
// master seed pairs trials across ablation arms.
inline std::vector<TrialResult> run_trials(const TrialConfig& base, int n_trials,
                                           std::uint64_t master_seed) {
  if (n_trials < 1) fail(errc::invalid_count, "n_trials must be >= 1");
  std::vector<TrialResult> results;
  results.reserve(n_trials);
  for (int t = 0; t < n_trials; ++t) {
    TrialConfig cfg = base;
    cfg.seed = Rng::mix(master_seed, 100000 + t);
    results.push_back(run_trial(cfg));
  }
  return results;
}

}  // namespace stitchkit
