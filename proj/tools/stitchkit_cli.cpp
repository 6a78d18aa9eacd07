#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "stitchkit/stitchkit.hpp"

namespace fs = std::filesystem;
using namespace stitchkit;

namespace {

int error_exit_code(const Error& e) {
  switch (e.code()) {
    case errc::invalid_config:
    case errc::invalid_params:
    case errc::invalid_count:
    case errc::invalid_radius:
    case errc::io_error:
      return 2;
    default:
      return 1;
  }
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(errc::io_error, std::string("bad JSON in ") + path + ": " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Ablation parse_ablation(const std::string& name) {
  if (name == "full") return Ablation::full;
  if (name == "no-ekf") return Ablation::no_ekf;
  if (name == "no-thread") return Ablation::no_thread;
  fail(errc::invalid_config, "unknown ablation: " + name);
}

void print_metrics_row(const char* name, const MetricsReport& rep) {
  std::printf("%-12s sutures %.2f +- %.2f  single %.1f%%  closure %.1f%%  "
              "A %d  T %d  I %d  M %d  total %d  estimate %.1f%%\n",
              name, rep.avg_sutures, rep.std_sutures, rep.single_suture_success_rate,
              rep.wound_gap_closure_rate, rep.errors.alignment, rep.errors.thread,
              rep.errors.insertion, rep.errors.missed_grasp, rep.errors.total(),
              rep.needle_estimate_success_rate);
}

struct GenOptions {
  std::string out_dir;
  std::uint64_t seed = 0;
  int measurements = 15;  // the filter consumes up to 15 draws
  int cloud_points = 400;
  double needle_radius = kDefaultNeedleRadius;
  bool chord_reading = false;  // 40 mm read as the chord -> radius 20
  double needle_tilt_deg = 15.0;
  double needle_distance = 150.0;
  NoiseModel noise;
  WoundSceneParams wound;
  bool ply = false;
};

int run_gen(const GenOptions& opt) {
  fs::create_directories(opt.out_dir);
  const std::string dir = opt.out_dir + "/";
  const std::string ext = opt.ply ? ".ply" : ".csv";

  NeedleGroundTruth gt;
  gt.radius = opt.chord_reading ? 20.0 : opt.needle_radius;
  gt.pose.position = Point3(0, 0, opt.needle_distance);
  gt.pose.rotation =
      Eigen::AngleAxisd(deg2rad(opt.needle_tilt_deg), Vec3::UnitX()).toRotationMatrix();

  CameraModel camera;
  camera.validate();
  write_json(dir + "camera.json", camera_to_json(camera));

  for (int k = 0; k < opt.measurements; ++k) {
    NoiseModel nm = opt.noise;
    nm.seed = Rng::mix(opt.seed, 1000 + k);
    const auto cloud = sample_needle_cloud(gt, nm, opt.cloud_points);
    char name[64];
    std::snprintf(name, sizeof(name), "needle_cloud_%03d", k);
    write_cloud(dir + name + ext, cloud);
  }

  const RenderResult render = render_views(gt, camera, 3);
  write_mask_pgm(dir + "mask.pgm", render.mask);
  // composed scene raster: the phantom sits behind the needle
  write_depth_csv(dir + "depth.csv",
                  fill_background_depth(render.depth, opt.needle_distance + 100.0));

  WoundSceneParams wp = opt.wound;
  wp.seed = Rng::mix(opt.seed, 2);
  const GeneratedWound gw = generate_wound_scene(wp);
  write_cloud(dir + "wound_center" + ext, gw.scene.wound_center_cloud);
  write_cloud(dir + "wound_surface" + ext, gw.scene.wound_surface_cloud);
  write_cloud(dir + "phantom" + ext, gw.scene.phantom_cloud);

  Json oracle;
  oracle["needle"] = measurement_to_json(oracle_needle_state(gt));
  oracle["wound"] = Json{{"h", gw.oracle.height},
                         {"w", gw.oracle.width},
                         {"length", gw.oracle.s_max - gw.oracle.s_min},
                         {"centerline",
                          Json{{"origin", to_json(gw.oracle.centerline.origin)},
                               {"direction", to_json(gw.oracle.centerline.direction)}}}};
  write_json(dir + "oracle.json", oracle);

  Json config;
  config["seed"] = opt.seed;
  config["measurements"] = opt.measurements;
  config["cloud_points"] = opt.cloud_points;
  config["needle_radius"] = gt.radius;
  config["needle_tilt_deg"] = opt.needle_tilt_deg;
  config["needle_distance"] = opt.needle_distance;
  config["noise"] = noise_to_json(opt.noise);
  config["wound"] = wound_params_to_json(wp);
  write_json(dir + "scene_config.json", config);

  std::printf("wrote scene bundle to %s (%d measurement clouds)\n", opt.out_dir.c_str(),
              opt.measurements);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stitchkit: needle pose estimation, suture alignment and trial simulation"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* cmd_gen = app.add_subcommand("gen", "generate a synthetic scene bundle");
  cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
  cmd_gen->add_option("--seed", gen.seed, "master seed");
  cmd_gen->add_option("--measurements", gen.measurements, "number of needle measurement clouds");
  cmd_gen->add_option("--cloud-points", gen.cloud_points, "points per needle cloud");
  cmd_gen->add_option("--needle-radius", gen.needle_radius, "needle radius, mm");
  cmd_gen->add_flag("--chord-reading", gen.chord_reading,
                    "treat the 40 mm needle size as the chord (radius 20 mm)");
  cmd_gen->add_option("--needle-tilt-deg", gen.needle_tilt_deg, "needle tilt toward the camera");
  cmd_gen->add_option("--needle-distance", gen.needle_distance, "needle depth, mm");
  cmd_gen->add_option("--sigma", gen.noise.sigma, "cloud noise sigma, mm");
  cmd_gen->add_option("--dropout", gen.noise.specular_dropout, "specular dropout probability");
  cmd_gen->add_option("--boundary-factor", gen.noise.boundary_factor, "end-band noise factor");
  cmd_gen->add_option("--boundary-band", gen.noise.boundary_band, "end band, fraction of arc");
  cmd_gen->add_option("--wound-height", gen.wound.height, "wound height h, mm");
  cmd_gen->add_option("--wound-width", gen.wound.width, "wound width w, mm");
  cmd_gen->add_option("--wound-length", gen.wound.length, "wound length L, mm");
  cmd_gen->add_option("--wound-noise", gen.wound.noise_sigma, "wound cloud noise sigma, mm");
  cmd_gen->add_flag("--ply", gen.ply, "write clouds as ASCII PLY instead of CSV");

  std::vector<std::string> est_clouds;
  std::string est_camera, est_ekf, est_depth, est_out;
  std::string est_tip_side = "right";
  double est_radius = kDefaultNeedleRadius;
  bool est_single_shot = false;
  RansacConfig est_ransac;
  auto* cmd_est = app.add_subcommand("estimate", "estimate the needle pose from pointclouds");
  cmd_est->add_option("clouds", est_clouds, "measurement cloud files (CSV/PLY)")->required();
  cmd_est->add_option("--camera", est_camera, "camera JSON (fx fy cx cy, rotation, translation)");
  cmd_est->add_option("--ekf", est_ekf, "EKF config JSON");
  cmd_est->add_option("--known-radius", est_radius, "known needle radius, mm");
  cmd_est->add_option("--depth", est_depth, "depth raster CSV for tip refinement");
  cmd_est->add_option("--tip-side", est_tip_side, "tip side: left|right")
      ->check(CLI::IsMember({"left", "right"}));
  cmd_est->add_option("--ransac-iterations", est_ransac.iterations, "RANSAC iterations");
  cmd_est->add_option("--ransac-threshold", est_ransac.inlier_threshold, "inlier threshold, mm");
  cmd_est->add_option("--seed", est_ransac.seed, "RANSAC seed");
  cmd_est->add_flag("--single-shot", est_single_shot, "skip the filter, use the first cloud");
  cmd_est->add_option("--out", est_out, "output pose JSON path (default stdout)");

  std::string plan_center, plan_surface, plan_phantom, plan_out;
  int plan_n = 6;
  int plan_side = -1;
  double plan_slack = 5.0;
  RansacConfig plan_ransac;
  auto* cmd_plan = app.add_subcommand("plan", "3D suture alignment from wound clouds");
  cmd_plan->add_option("--center", plan_center, "wound center cloud")->required();
  cmd_plan->add_option("--surface", plan_surface, "wound surface cloud")->required();
  cmd_plan->add_option("--phantom", plan_phantom, "phantom cloud")->required();
  cmd_plan->add_option("--n", plan_n, "suture count");
  cmd_plan->add_option("--side-sign", plan_side, "insertion side: +1 or -1");
  cmd_plan->add_option("--slack", plan_slack, "thread slack per suture, mm");
  cmd_plan->add_option("--ransac-iterations", plan_ransac.iterations, "RANSAC iterations");
  cmd_plan->add_option("--ransac-threshold", plan_ransac.inlier_threshold, "inlier threshold");
  cmd_plan->add_option("--seed", plan_ransac.seed, "RANSAC seed");
  cmd_plan->add_option("--out", plan_out, "output plan JSON path (default stdout)");

  int sim_trials = 15;
  int sim_sutures = 6;
  std::uint64_t sim_seed = 42;
  std::string sim_ablation = "full";
  std::string sim_config_path, sim_out;
  TrialConfig sim_base;
  auto add_sim_overrides = [&](CLI::App* cmd) {
    cmd->add_option("--trials", sim_trials, "number of trials");
    cmd->add_option("--sutures", sim_sutures, "planned sutures per trial");
    cmd->add_option("--seed", sim_seed, "master seed");
    cmd->add_option("--config", sim_config_path, "trial config JSON (defaults overridable)");
    cmd->add_option("--sigma", sim_base.noise.sigma, "needle cloud noise sigma, mm");
    cmd->add_option("--dropout", sim_base.noise.specular_dropout, "specular dropout");
    cmd->add_option("--boundary-factor", sim_base.noise.boundary_factor, "end-band factor");
    cmd->add_option("--boundary-band", sim_base.noise.boundary_band, "end band, arc fraction");
    cmd->add_option("--cloud-points", sim_base.cloud_points, "points per needle cloud");
    cmd->add_option("--needle-radius", sim_base.needle_radius, "needle radius, mm");
    cmd->add_option("--wound-height", sim_base.wound.height, "wound height h, mm");
    cmd->add_option("--wound-width", sim_base.wound.width, "wound width w, mm");
    cmd->add_option("--wound-length", sim_base.wound.length, "wound length L, mm");
    cmd->add_option("--wound-noise", sim_base.wound.noise_sigma, "wound cloud noise, mm");
    cmd->add_option("--estimate-threshold", sim_base.estimate_success_threshold,
                    "pose-estimate success threshold, mm");
    cmd->add_option("--tangle-raw", sim_base.failure.tangle_prob_raw, "tangle prob, no sweep");
    cmd->add_option("--tangle-swept", sim_base.failure.tangle_prob_swept, "tangle prob, swept");
    cmd->add_option("--grasp-tolerance", sim_base.failure.grasp_tolerance,
                    "grasp tolerance, mm");
    cmd->add_option("--height-tolerance", sim_base.failure.insertion_height_tolerance,
                    "insertion height tolerance, mm");
    cmd->add_option("--snap-prob", sim_base.failure.alignment_snap_prob,
                    "alignment snap probability on degraded estimates");
    cmd->add_option("--snap-suppressed", sim_base.failure.alignment_snap_suppressed,
                    "residual snap probability on good estimates");
    cmd->add_option("--out", sim_out, "output report JSON path");
  };
  auto* cmd_sim = app.add_subcommand("simulate", "run seeded Monte-Carlo suturing trials");
  add_sim_overrides(cmd_sim);
  cmd_sim->add_option("--ablation", sim_ablation, "full|no-ekf|no-thread")
      ->check(CLI::IsMember({"full", "no-ekf", "no-thread"}));
  auto* cmd_bench = app.add_subcommand("benchmark", "run all three ablation arms and compare");
  add_sim_overrides(cmd_bench);
  auto* cmd_cal = app.add_subcommand(
      "calibrate", "sweep noise and failure parameters over the ablation arms");
  add_sim_overrides(cmd_cal);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // usage problems are config errors
  }

  try {
    if (cmd_gen->parsed()) return run_gen(gen);

    if (cmd_est->parsed()) {
      std::optional<CameraModel> camera;
      if (!est_camera.empty()) camera = camera_from_json(load_json(est_camera));
      EkfConfig ekf;
      if (!est_ekf.empty()) ekf = ekf_from_json(load_json(est_ekf));
      const TipSide side = est_tip_side == "left" ? TipSide::left : TipSide::right;

      std::vector<NeedleMeasurement> measurements;
      for (std::size_t i = 0; i < est_clouds.size(); ++i) {
        const auto cloud = read_cloud(est_clouds[i]);
        measurements.push_back(measure_needle(cloud, est_radius,
                                              est_ransac.with_seed(Rng::mix(est_ransac.seed, i)),
                                              camera ? &*camera : nullptr));
      }

      EstimateResult result;
      if (est_single_shot || measurements.size() == 1) {
        result.estimate = measurements.front();
        result.accepted_count = 0;
        result.consumed_count = 1;
      } else {
        result = estimate_needle(measurements, ekf);
      }

      Point3 tip = result.estimate.endpoint(side);
      if (!est_depth.empty()) {
        if (!camera) fail(errc::invalid_config, "--depth requires --camera");
        tip = refine_tip(read_depth_csv(est_depth), *camera, result.estimate, side);
      }
      const Json out = pose_estimate_to_json(result, tip);
      if (est_out.empty()) std::cout << out.dump(2) << "\n";
      else write_json(est_out, out);
      return 0;
    }

    if (cmd_plan->parsed()) {
      WoundScene scene;
      scene.wound_center_cloud = read_cloud(plan_center);
      scene.wound_surface_cloud = read_cloud(plan_surface);
      scene.phantom_cloud = read_cloud(plan_phantom);
      const WoundModel model = build_wound_model(scene, plan_ransac);
      const SuturePlan plan = make_suture_plan(model, plan_n, plan_side, plan_slack);
      const Json out = plan_to_json(model, plan);
      if (plan_out.empty()) std::cout << out.dump(2) << "\n";
      else write_json(plan_out, out);
      return 0;
    }

    TrialConfig base = sim_base;
    if (!sim_config_path.empty()) base = trial_config_from_json(load_json(sim_config_path), base);
    base.n_sutures = sim_sutures;
    base.validate();

    if (cmd_sim->parsed()) {
      const Ablation ablation = parse_ablation(sim_ablation);
      const Json report = build_simulation_report(base, sim_trials, sim_seed, ablation);
      TrialConfig cfg = base;
      apply_ablation(cfg, ablation);
      print_metrics_row(to_string(ablation),
                        aggregate(run_trials(cfg, sim_trials, sim_seed), cfg.n_sutures));
      if (!sim_out.empty()) write_json(sim_out, report);
      else std::cout << report["metrics"].dump(2) << "\n";
      return 0;
    }

    if (cmd_bench->parsed()) {
      Json out;
      for (Ablation a : {Ablation::full, Ablation::no_ekf, Ablation::no_thread}) {
        TrialConfig cfg = base;
        apply_ablation(cfg, a);
        const auto results = run_trials(cfg, sim_trials, sim_seed);
        const MetricsReport rep = aggregate(results, cfg.n_sutures);
        print_metrics_row(to_string(a), rep);
        out[to_string(a)] = metrics_to_json(rep);
      }
      if (!sim_out.empty()) write_json(sim_out, out);
      return 0;
    }

    if (cmd_cal->parsed()) {
      // the parameter sweep behind the shipped failure defaults
      for (double sigma : {0.15, 0.2, 0.25, 0.3}) {
        for (double tangle_raw : {0.2, 0.3, 0.4}) {
          TrialConfig cfg = base;
          cfg.noise.sigma = sigma;
          cfg.failure.tangle_prob_raw = tangle_raw;
          std::printf("sigma=%.2f tangle_raw=%.2f\n", sigma, tangle_raw);
          for (Ablation a : {Ablation::full, Ablation::no_ekf, Ablation::no_thread}) {
            TrialConfig arm = cfg;
            apply_ablation(arm, a);
            print_metrics_row(to_string(a),
                              aggregate(run_trials(arm, sim_trials, sim_seed), arm.n_sutures));
          }
        }
      }
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "stitchkit: %s\n", e.what());
    return error_exit_code(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "stitchkit: %s\n", e.what());
    return 1;
  }
  return 0;
}
