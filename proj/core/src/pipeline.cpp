/******************************************************************************
 * Copyright 2026 The viinit Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#include "viinit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "viinit/error.hpp"

namespace viinit {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

constexpr double kGtAssociationGate = 5e-3;  // s

}  // namespace

SeedMode seed_mode_from_string(const std::string& s) {
  if (s == "auto") return SeedMode::kAuto;
  if (s == "gt") return SeedMode::kGroundTruth;
  if (s == "visual") return SeedMode::kVisual;
  throw config_error("unknown seed mode '" + s + "'");
}

void InitConfig::validate() const {
  if (!(window_length > 0)) {
    throw config_error("window_length must be positive");
  }
  if (min_keyframes < 4) {
    throw config_error("min_keyframes must be at least 4");
  }
  if (!(bias_prior_sigma_gyro > 0) || !(bias_prior_sigma_accel > 0)) {
    throw config_error("bias prior sigmas must be positive");
  }
  if (!(bias_prior_weight > 0)) {
    throw config_error("bias_prior_weight must be positive");
  }
  if (!(huber_mono > 0) || !(huber_stereo > 0)) {
    throw config_error("huber thresholds must be positive");
  }
  if (step2_relinearize_rounds < 0) {
    throw config_error("step2_relinearize_rounds must be >= 0");
  }
}

InitConfig load_init_config(const std::string& path) {
  const auto kv = read_key_value_file(path);
  InitConfig c;
  auto get_d = [&](const std::string& key, double fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : parse_double(it->second);
  };
  auto get_b = [&](const std::string& key, bool fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw config_error(path + ": boolean key '" + key + "' must be true/false");
  };
  c.window_length = get_d("window_length", c.window_length);
  c.min_keyframes = static_cast<int>(get_d("min_keyframes", c.min_keyframes));
  c.min_tracks_per_keyframe = static_cast<int>(
      get_d("min_tracks_per_keyframe", c.min_tracks_per_keyframe));
  c.enable_step3 = get_b("enable_step3", c.enable_step3);
  c.enable_step4 = get_b("enable_step4", c.enable_step4);
  c.step3_optimize_landmarks =
      get_b("step3_optimize_landmarks", c.step3_optimize_landmarks);
  c.bias_prior_sigma_gyro =
      get_d("bias_prior_sigma_gyro", c.bias_prior_sigma_gyro);
  c.bias_prior_sigma_accel =
      get_d("bias_prior_sigma_accel", c.bias_prior_sigma_accel);
  c.bias_prior_weight = get_d("bias_prior_weight", c.bias_prior_weight);
  c.step2_relinearize_rounds = static_cast<int>(
      get_d("step2_relinearize_rounds", c.step2_relinearize_rounds));
  c.huber_mono = get_d("huber_mono", c.huber_mono);
  c.huber_stereo = get_d("huber_stereo", c.huber_stereo);
  if (kv.count("seed_mode")) c.seed_mode = seed_mode_from_string(kv.at("seed_mode"));
  c.seed_perturb_pos = get_d("seed_perturb_pos", c.seed_perturb_pos);
  c.seed_perturb_rot_deg =
      get_d("seed_perturb_rot_deg", c.seed_perturb_rot_deg);
  c.step1_rotation_noise_deg =
      get_d("step1_rotation_noise_deg", c.step1_rotation_noise_deg);
  c.rng_seed = static_cast<std::uint64_t>(
      get_d("rng_seed", static_cast<double>(c.rng_seed)));
  c.solve_options.max_iterations = static_cast<int>(
      get_d("max_iterations", c.solve_options.max_iterations));
  c.solve_options.lambda_init =
      get_d("lambda_init", c.solve_options.lambda_init);
  c.solve_options.gradient_tol =
      get_d("gradient_tol", c.solve_options.gradient_tol);
  c.solve_options.rel_cost_tol =
      get_d("rel_cost_tol", c.solve_options.rel_cost_tol);
  c.solve_options.schur_landmark_threshold = static_cast<int>(get_d(
      "schur_landmark_threshold", c.solve_options.schur_landmark_threshold));
  c.validate();
  return c;
}

std::vector<std::pair<std::string, std::string>> init_config_entries(
    const InitConfig& c) {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  std::string mode = "auto";
  if (c.seed_mode == SeedMode::kGroundTruth) mode = "gt";
  if (c.seed_mode == SeedMode::kVisual) mode = "visual";
  return {
      {"window_length", format_double(c.window_length)},
      {"min_keyframes", std::to_string(c.min_keyframes)},
      {"min_tracks_per_keyframe", std::to_string(c.min_tracks_per_keyframe)},
      {"enable_step3", b(c.enable_step3)},
      {"enable_step4", b(c.enable_step4)},
      {"step3_optimize_landmarks", b(c.step3_optimize_landmarks)},
      {"bias_prior_sigma_gyro", format_double(c.bias_prior_sigma_gyro)},
      {"bias_prior_sigma_accel", format_double(c.bias_prior_sigma_accel)},
      {"bias_prior_weight", format_double(c.bias_prior_weight)},
      {"step2_relinearize_rounds",
       std::to_string(c.step2_relinearize_rounds)},
      {"huber_mono", format_double(c.huber_mono)},
      {"huber_stereo", format_double(c.huber_stereo)},
      {"seed_mode", mode},
      {"seed_perturb_pos", format_double(c.seed_perturb_pos)},
      {"seed_perturb_rot_deg", format_double(c.seed_perturb_rot_deg)},
      {"step1_rotation_noise_deg",
       format_double(c.step1_rotation_noise_deg)},
      {"rng_seed", std::to_string(c.rng_seed)},
      {"max_iterations", std::to_string(c.solve_options.max_iterations)},
      {"lambda_init", format_double(c.solve_options.lambda_init)},
      {"gradient_tol", format_double(c.solve_options.gradient_tol)},
      {"rel_cost_tol", format_double(c.solve_options.rel_cost_tol)},
      {"schur_landmark_threshold",
       std::to_string(c.solve_options.schur_landmark_threshold)},
  };
}

std::string to_string(InitStage s) {
  switch (s) {
    case InitStage::kNone:
      return "none";
    case InitStage::kStep1:
      return "step1";
    case InitStage::kStep2:
      return "step2";
    case InitStage::kStep3:
      return "step3";
    case InitStage::kStep4:
      return "step4";
  }
  return "unknown";
}

PoseSE3 camera_pose_from_body(const KeyframeState& state,
                              const PoseSE3& T_bc) {
  return (PoseSE3(state.R_wb, state.p_wb) * T_bc).inverse();
}

void body_from_camera_pose(const PoseSE3& pose_cw, const PoseSE3& T_bc,
                           KeyframeState* state) {
  const PoseSE3 t_wb = pose_cw.inverse() * T_bc.inverse();
  state->R_wb = t_wb.rotation;
  state->p_wb = t_wb.translation;
}

// ---------------------------------------------------------------------------
// Step 1: pure stereo-visual bundle adjustment

VisualBaResult step1_visual_ba(const TrackSet& tracks,
                               const std::vector<char>& track_active,
                               const CameraIntrinsics& k,
                               std::vector<PoseSE3>* poses_cw,
                               std::vector<Landmark>* landmarks,
                               const InitConfig& config) {
  const size_t n_kf = poses_cw->size();
  LeastSquaresProblem problem;
  std::vector<int> rot_blocks(n_kf), trans_blocks(n_kf);
  for (size_t i = 0; i < n_kf; ++i) {
    rot_blocks[i] = problem.add_rotation_block((*poses_cw)[i].rotation);
    trans_blocks[i] = problem.add_euclidean_block((*poses_cw)[i].translation);
  }
  problem.set_block_fixed(rot_blocks[0], true);
  problem.set_block_fixed(trans_blocks[0], true);

  std::vector<int> lm_blocks(tracks.tracks.size(), -1);
  for (size_t t = 0; t < tracks.tracks.size(); ++t) {
    if (!track_active[t]) continue;
    lm_blocks[t] =
        problem.add_euclidean_block((*landmarks)[t].position_world);
    problem.set_block_eliminable(lm_blocks[t]);
    for (const Observation& obs : tracks.tracks[t].observations) {
      auto factor = std::make_unique<ReprojectionFactorCam>(
          rot_blocks[obs.keyframe_id], trans_blocks[obs.keyframe_id],
          lm_blocks[t], obs, k);
      factor->set_robust_delta(obs.kind == ObservationKind::kStereo
                                   ? config.huber_stereo
                                   : config.huber_mono);
      problem.add_residual(std::move(factor));
    }
  }

  VisualBaResult out;
  out.report = solve(problem, config.solve_options);
  if (!out.report.usable()) return out;

  for (size_t i = 0; i < n_kf; ++i) {
    (*poses_cw)[i].rotation = problem.rotation_value(rot_blocks[i]);
    (*poses_cw)[i].translation = problem.vec3_value(trans_blocks[i]);
  }
  for (size_t t = 0; t < tracks.tracks.size(); ++t) {
    if (lm_blocks[t] >= 0) {
      (*landmarks)[t].position_world = problem.vec3_value(lm_blocks[t]);
    }
  }

  // Mean reprojection error in raw pixels over valid observations.
  double sum = 0;
  int count = 0;
  for (size_t t = 0; t < tracks.tracks.size(); ++t) {
    if (!track_active[t]) continue;
    for (const Observation& obs : tracks.tracks[t].observations) {
      const Eigen::Vector3d pc =
          (*poses_cw)[obs.keyframe_id] * (*landmarks)[t].position_world;
      if (pc.z() <= kDepthEpsilon) continue;
      double err;
      if (obs.kind == ObservationKind::kStereo) {
        err = (obs.pixel - project_stereo(pc, k)).norm();
      } else {
        err = (obs.pixel.head<2>() - project_mono(pc, k)).norm();
      }
      sum += err;
      ++count;
    }
  }
  out.mean_reprojection_error_px = count > 0 ? sum / count : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Step 2: inertial-only MAP

namespace {

std::vector<PreintegratedImu> build_preints(
    const std::vector<KeyframeState>& states,
    const std::vector<ImuMeasurement>& imu, const ImuBias& bias,
    const ImuNoiseSpec& noise) {
  std::vector<PreintegratedImu> preints;
  preints.reserve(states.size() - 1);
  for (size_t i = 0; i + 1 < states.size(); ++i) {
    preints.push_back(preintegrate_between(imu, states[i].timestamp,
                                           states[i + 1].timestamp, bias,
                                           noise));
  }
  return preints;
}

void check_imu_gaps(const std::vector<ImuMeasurement>& imu, double t0,
                    double t1) {
  std::vector<double> dts;
  for (size_t i = 0; i + 1 < imu.size(); ++i) {
    dts.push_back(imu[i + 1].timestamp - imu[i].timestamp);
  }
  if (dts.empty()) throw data_error("imu stream has fewer than 2 samples");
  std::vector<double> sorted = dts;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  const double nominal = sorted[sorted.size() / 2];
  for (size_t i = 0; i + 1 < imu.size(); ++i) {
    const double a = imu[i].timestamp, b = imu[i + 1].timestamp;
    if (b < t0 || a > t1) continue;
    if (dts[i] > 2.0 * nominal) {
      throw data_error("imu gap of " + format_double(dts[i]) +
                       " s inside the window (nominal period " +
                       format_double(nominal) + " s)");
    }
  }
}

Eigen::Matrix<double, 6, 6> bias_prior_sqrt_info(const InitConfig& config) {
  Eigen::Matrix<double, 6, 6> sqrt_info =
      Eigen::Matrix<double, 6, 6>::Zero();
  const double wg =
      std::sqrt(config.bias_prior_weight) / config.bias_prior_sigma_gyro;
  const double wa =
      std::sqrt(config.bias_prior_weight) / config.bias_prior_sigma_accel;
  sqrt_info.diagonal() << wg, wg, wg, wa, wa, wa;
  return sqrt_info;
}

}  // namespace

InertialOnlyResult step2_inertial_only(
    const std::vector<KeyframeState>& body_poses,
    const std::vector<ImuMeasurement>& imu, const ImuNoiseSpec& noise,
    double gravity_mag, const InitConfig& config,
    std::vector<PreintegratedImu>* preints) {
  const size_t n = body_poses.size();
  if (n < 2) throw data_error("inertial-only step needs >= 2 keyframes");
  check_imu_gaps(imu, body_poses.front().timestamp,
                 body_poses.back().timestamp);

  InertialOnlyResult out;

  // Velocity seeds: finite differences of positions.
  out.velocities.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t a = (i == 0) ? 0 : i - 1;
    const size_t b = (i + 1 == n) ? i : i + 1;
    out.velocities[i] = (body_poses[b].p_wb - body_poses[a].p_wb) /
                        (body_poses[b].timestamp - body_poses[a].timestamp);
  }

  // Bias seed: prior mean (zero). Gravity seed: mean specific-force
  // direction rotated into the world, negated.
  ImuBias bias;
  Eigen::Vector3d g_accum = Eigen::Vector3d::Zero();
  for (size_t i = 0; i + 1 < n; ++i) {
    Eigen::Vector3d mean_accel = Eigen::Vector3d::Zero();
    int count = 0;
    for (const ImuMeasurement& m : imu) {
      if (m.timestamp >= body_poses[i].timestamp &&
          m.timestamp < body_poses[i + 1].timestamp) {
        mean_accel += m.accel;
        ++count;
      }
    }
    if (count > 0) g_accum += body_poses[i].R_wb * (mean_accel / count);
  }
  Eigen::Vector3d g_dir = -g_accum;
  if (g_dir.norm() < 1e-9) g_dir = Eigen::Vector3d(0, 0, -1);
  g_dir.normalize();

  *preints = build_preints(body_poses, imu, bias, noise);

  const int rounds = 1 + config.step2_relinearize_rounds;
  for (int round = 0; round < rounds; ++round) {
    LeastSquaresProblem problem;
    std::vector<int> rot_blocks(n), pos_blocks(n), vel_blocks(n);
    for (size_t i = 0; i < n; ++i) {
      rot_blocks[i] = problem.add_rotation_block(body_poses[i].R_wb);
      pos_blocks[i] = problem.add_euclidean_block(body_poses[i].p_wb);
      vel_blocks[i] = problem.add_euclidean_block(out.velocities[i]);
      problem.set_block_fixed(rot_blocks[i], true);
      problem.set_block_fixed(pos_blocks[i], true);
    }
    const int bg = problem.add_euclidean_block(bias.gyro);
    const int ba = problem.add_euclidean_block(bias.accel);
    const int gdir = problem.add_unit_vector_block(g_dir);
    for (size_t i = 0; i + 1 < n; ++i) {
      problem.add_residual(std::make_unique<InertialFactor>(
          rot_blocks[i], pos_blocks[i], vel_blocks[i], rot_blocks[i + 1],
          pos_blocks[i + 1], vel_blocks[i + 1], bg, ba, gdir, (*preints)[i],
          gravity_mag));
    }
    problem.add_residual(std::make_unique<BiasPriorFactor>(
        bg, ba, ImuBias{}, bias_prior_sqrt_info(config)));

    out.report = solve(problem, config.solve_options);
    if (!out.report.usable()) return out;

    for (size_t i = 0; i < n; ++i) {
      out.velocities[i] = problem.vec3_value(vel_blocks[i]);
    }
    bias.gyro = problem.vec3_value(bg);
    bias.accel = problem.vec3_value(ba);
    g_dir = problem.vec3_value(gdir);

    if (round + 1 < rounds) {
      *preints = build_preints(body_poses, imu, bias, noise);
    }
  }

  out.params.bias = bias;
  out.params.gravity_dir = g_dir;
  out.params.gravity_mag = gravity_mag;
  // Leave the preintegrations linearized at the final bias estimate.
  *preints = build_preints(body_poses, imu, bias, noise);
  return out;
}

// ---------------------------------------------------------------------------
// Step 3: rotation-translation-decoupled refinement

DecoupledRefineResult step3_decoupled_refine(
    const TrackSet& tracks, const std::vector<char>& track_active,
    const CameraIntrinsics& k, const PoseSE3& T_bc,
    const std::vector<PreintegratedImu>& preints, const ImuBias& bias,
    std::vector<KeyframeState>* states, std::vector<Landmark>* landmarks,
    const InitConfig& config) {
  const size_t n = states->size();
  DecoupledRefineResult out;

  // (a) Overwrite rotations by chaining bias-corrected deltas from the
  // first keyframe (kept as gauge).
  for (size_t i = 0; i + 1 < n; ++i) {
    const CorrectedDeltas d = correct_first_order(preints[i], bias);
    (*states)[i + 1].R_wb = (*states)[i].R_wb * d.delta_R;
  }

  // (b) 3-dof translation BA with all rotations fixed. Camera poses are
  // rebuilt from the new rotations and the current body positions, so the
  // keyframe centers carry over as the translation seed.
  LeastSquaresProblem problem;
  std::vector<int> rot_blocks(n), trans_blocks(n);
  std::vector<PoseSE3> poses_cw(n);
  for (size_t i = 0; i < n; ++i) {
    poses_cw[i] = camera_pose_from_body((*states)[i], T_bc);
    rot_blocks[i] = problem.add_rotation_block(poses_cw[i].rotation);
    trans_blocks[i] = problem.add_euclidean_block(poses_cw[i].translation);
    problem.set_block_fixed(rot_blocks[i], true);
  }
  problem.set_block_fixed(trans_blocks[0], true);

  std::vector<int> lm_blocks(tracks.tracks.size(), -1);
  for (size_t t = 0; t < tracks.tracks.size(); ++t) {
    if (!track_active[t]) continue;
    lm_blocks[t] =
        problem.add_euclidean_block((*landmarks)[t].position_world);
    if (config.step3_optimize_landmarks) {
      problem.set_block_eliminable(lm_blocks[t]);
    } else {
      problem.set_block_fixed(lm_blocks[t], true);
    }
    for (const Observation& obs : tracks.tracks[t].observations) {
      auto factor = std::make_unique<ReprojectionFactorCam>(
          rot_blocks[obs.keyframe_id], trans_blocks[obs.keyframe_id],
          lm_blocks[t], obs, k);
      factor->set_robust_delta(obs.kind == ObservationKind::kStereo
                                   ? config.huber_stereo
                                   : config.huber_mono);
      problem.add_residual(std::move(factor));
    }
  }

  out.report = solve(problem, config.solve_options);
  if (!out.report.usable()) {
    out.ok = false;
    return out;
  }

  for (size_t i = 1; i < n; ++i) {
    PoseSE3 pose_cw = poses_cw[i];
    pose_cw.translation = problem.vec3_value(trans_blocks[i]);
    body_from_camera_pose(pose_cw, T_bc, &(*states)[i]);
  }
  if (config.step3_optimize_landmarks) {
    for (size_t t = 0; t < tracks.tracks.size(); ++t) {
      if (lm_blocks[t] >= 0) {
        (*landmarks)[t].position_world = problem.vec3_value(lm_blocks[t]);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Step 4: joint visual-inertial bundle adjustment

JointVibaResult step4_joint_viba(const TrackSet& tracks,
                                 const std::vector<char>& track_active,
                                 const CameraIntrinsics& k, const PoseSE3& T_bc,
                                 const std::vector<PreintegratedImu>& preints,
                                 double gravity_mag,
                                 std::vector<KeyframeState>* states,
                                 std::vector<Landmark>* landmarks,
                                 InertialParams* inertial,
                                 const InitConfig& config, bool solve_it) {
  const size_t n = states->size();
  JointVibaResult out;

  LeastSquaresProblem problem;
  std::vector<int> rot_blocks(n), pos_blocks(n), vel_blocks(n);
  for (size_t i = 0; i < n; ++i) {
    rot_blocks[i] = problem.add_rotation_block((*states)[i].R_wb);
    pos_blocks[i] = problem.add_euclidean_block((*states)[i].p_wb);
    vel_blocks[i] = problem.add_euclidean_block((*states)[i].v_w);
  }
  problem.set_block_fixed(rot_blocks[0], true);
  problem.set_block_fixed(pos_blocks[0], true);
  const int bg = problem.add_euclidean_block(inertial->bias.gyro);
  const int ba = problem.add_euclidean_block(inertial->bias.accel);
  const int gdir = problem.add_unit_vector_block(inertial->gravity_dir);

  std::vector<int> lm_blocks(tracks.tracks.size(), -1);
  for (size_t t = 0; t < tracks.tracks.size(); ++t) {
    if (!track_active[t]) continue;
    lm_blocks[t] =
        problem.add_euclidean_block((*landmarks)[t].position_world);
    problem.set_block_eliminable(lm_blocks[t]);
    for (const Observation& obs : tracks.tracks[t].observations) {
      auto factor = std::make_unique<ReprojectionFactorBody>(
          rot_blocks[obs.keyframe_id], pos_blocks[obs.keyframe_id],
          lm_blocks[t], obs, k, T_bc);
      factor->set_robust_delta(obs.kind == ObservationKind::kStereo
                                   ? config.huber_stereo
                                   : config.huber_mono);
      problem.add_residual(std::move(factor));
    }
  }
  for (size_t i = 0; i + 1 < n; ++i) {
    problem.add_residual(std::make_unique<InertialFactor>(
        rot_blocks[i], pos_blocks[i], vel_blocks[i], rot_blocks[i + 1],
        pos_blocks[i + 1], vel_blocks[i + 1], bg, ba, gdir, preints[i],
        gravity_mag));
  }
  problem.add_residual(std::make_unique<BiasPriorFactor>(
      bg, ba, ImuBias{}, bias_prior_sqrt_info(config)));

  if (!solve_it) {
    out.cost_initial = out.cost_final = evaluate_cost(problem);
    return out;
  }

  out.report = solve(problem, config.solve_options);
  out.cost_initial = out.report.initial_cost;
  out.cost_final = out.report.final_cost;
  if (!out.report.usable()) {
    out.ok = false;
    out.cost_final = out.cost_initial;
    return out;
  }

  for (size_t i = 0; i < n; ++i) {
    (*states)[i].R_wb = problem.rotation_value(rot_blocks[i]);
    (*states)[i].p_wb = problem.vec3_value(pos_blocks[i]);
    (*states)[i].v_w = problem.vec3_value(vel_blocks[i]);
  }
  inertial->bias.gyro = problem.vec3_value(bg);
  inertial->bias.accel = problem.vec3_value(ba);
  inertial->gravity_dir = problem.vec3_value(gdir);
  for (size_t t = 0; t < tracks.tracks.size(); ++t) {
    if (lm_blocks[t] >= 0) {
      (*landmarks)[t].position_world = problem.vec3_value(lm_blocks[t]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orchestration

namespace {

// Triangulates each track's landmark from its earliest stereo observation
// under the seed poses. Tracks without any stereo observation stay
// inactive and take no part in the optimization.
std::vector<char> seed_landmarks(const TrackSet& tracks,
                                 const std::vector<PoseSE3>& poses_cw,
                                 const CameraIntrinsics& k,
                                 std::vector<Landmark>* landmarks) {
  std::vector<char> active(tracks.tracks.size(), 0);
  landmarks->assign(tracks.tracks.size(), Landmark{});
  for (size_t t = 0; t < tracks.tracks.size(); ++t) {
    (*landmarks)[t].id = tracks.tracks[t].landmark.id;
    for (const Observation& obs : tracks.tracks[t].observations) {
      if (obs.kind != ObservationKind::kStereo) continue;
      try {
        const Eigen::Vector3d pc = triangulate_stereo(obs.pixel, k);
        (*landmarks)[t].position_world =
            poses_cw[obs.keyframe_id].inverse() * pc;
        active[t] = 1;
      } catch (const Error&) {
        continue;  // degenerate disparity; try the next stereo observation
      }
      break;
    }
  }
  return active;
}

std::vector<PoseSE3> seed_poses_from_ground_truth(
    const DatasetBundle& slice, const std::vector<std::int64_t>& kf_ts,
    const PoseSE3& T_bc, const InitConfig& config) {
  std::vector<PoseSE3> poses;
  poses.reserve(kf_ts.size());
  std::mt19937_64 rng(config.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (size_t i = 0; i < kf_ts.size(); ++i) {
    const double t = static_cast<double>(kf_ts[i]) * 1e-9;
    const GroundTruthEntry* best = nullptr;
    double best_dt = kGtAssociationGate;
    for (const GroundTruthEntry& e : slice.ground_truth) {
      const double dt = std::abs(e.state.timestamp - t);
      if (dt <= best_dt) {
        best = &e;
        best_dt = dt;
      }
    }
    if (!best) {
      throw data_error("no ground-truth pose within 5 ms of keyframe " +
                       format_int64(kf_ts[i]));
    }
    PoseSE3 pose_cw = camera_pose_from_body(best->state, T_bc);
    if (i > 0) {
      Eigen::Vector3d rot_noise, pos_noise;
      for (int a = 0; a < 3; ++a) rot_noise[a] = gauss(rng);
      for (int a = 0; a < 3; ++a) pos_noise[a] = gauss(rng);
      if (config.seed_perturb_rot_deg > 0) {
        pose_cw.rotation =
            pose_cw.rotation *
            RotationSO3::exp(rot_noise * config.seed_perturb_rot_deg *
                             M_PI / 180.0);
      }
      if (config.seed_perturb_pos > 0) {
        pose_cw.translation += pos_noise * config.seed_perturb_pos;
      }
    }
    poses.push_back(pose_cw);
  }
  return poses;
}

std::vector<PoseSE3> seed_poses_visual(const TrackSet& tracks,
                                       size_t n_kf,
                                       const CameraIntrinsics& k) {
  // Per-keyframe stereo triangulations keyed by landmark id.
  std::vector<std::unordered_map<std::int64_t, Eigen::Vector3d>> points(n_kf);
  for (const Track& t : tracks.tracks) {
    for (const Observation& obs : t.observations) {
      if (obs.kind != ObservationKind::kStereo) continue;
      try {
        points[obs.keyframe_id][t.landmark.id] =
            triangulate_stereo(obs.pixel, k);
      } catch (const Error&) {
      }
    }
  }
  std::vector<PoseSE3> t_wc(n_kf);  // camera-to-world, world = first camera
  for (size_t i = 0; i + 1 < n_kf; ++i) {
    std::vector<Eigen::Vector3d> from, to;
    for (const auto& [id, p_next] : points[i + 1]) {
      const auto it = points[i].find(id);
      if (it != points[i].end()) {
        from.push_back(p_next);
        to.push_back(it->second);
      }
    }
    if (from.size() < 3) {
      throw data_error(
          "visual seeding: fewer than 3 shared stereo points between "
          "keyframes " +
          std::to_string(i) + " and " + std::to_string(i + 1));
    }
    const PoseSE3 t_rel = rigid_align(from, to);  // p_i = t_rel p_{i+1}
    t_wc[i + 1] = t_wc[i] * t_rel;
  }
  std::vector<PoseSE3> poses_cw(n_kf);
  for (size_t i = 0; i < n_kf; ++i) poses_cw[i] = t_wc[i].inverse();
  return poses_cw;
}

}  // namespace

InitResult run_initialization(const DatasetBundle& slice,
                              const InitConfig& config) {
  config.validate();
  const CalibrationBundle& calib = slice.calibration;
  calib.intrinsics.validate();

  if (slice.tracks.tracks.empty()) {
    throw data_error("initialization needs feature tracks");
  }
  if (slice.imu.size() < 2) {
    throw data_error("initialization needs IMU data");
  }

  InitResult result;
  result.keyframe_timestamps_ns = slice.tracks.keyframe_timestamps_ns;
  const size_t n_kf = result.keyframe_timestamps_ns.size();
  if (static_cast<int>(n_kf) < config.min_keyframes) {
    throw data_error("not enough keyframes: " + std::to_string(n_kf) +
                     " < " + std::to_string(config.min_keyframes));
  }

  // Every keyframe must observe enough tracks.
  std::vector<int> obs_per_kf(n_kf, 0);
  for (const Track& t : slice.tracks.tracks) {
    for (const Observation& o : t.observations) ++obs_per_kf[o.keyframe_id];
  }
  for (size_t i = 0; i < n_kf; ++i) {
    if (obs_per_kf[i] < config.min_tracks_per_keyframe) {
      throw data_error("keyframe " + std::to_string(i) + " observes only " +
                       std::to_string(obs_per_kf[i]) + " tracks");
    }
  }

  // --- Seeding --------------------------------------------------------
  SeedMode mode = config.seed_mode;
  if (mode == SeedMode::kAuto) {
    mode = slice.ground_truth.empty() ? SeedMode::kVisual
                                      : SeedMode::kGroundTruth;
  }
  std::vector<PoseSE3> poses_cw =
      (mode == SeedMode::kGroundTruth)
          ? seed_poses_from_ground_truth(slice, result.keyframe_timestamps_ns,
                                         calib.T_bc, config)
          : seed_poses_visual(slice.tracks, n_kf, calib.intrinsics);

  std::vector<Landmark> landmarks;
  const std::vector<char> track_active =
      seed_landmarks(slice.tracks, poses_cw, calib.intrinsics, &landmarks);
  int active_count = 0;
  for (char a : track_active) active_count += a;
  if (active_count < config.min_tracks_per_keyframe) {
    throw data_error("only " + std::to_string(active_count) +
                     " tracks could be triangulated");
  }

  // --- Step 1: visual BA ----------------------------------------------
  double t0 = now_seconds();
  VisualBaResult r1 = step1_visual_ba(slice.tracks, track_active,
                                      calib.intrinsics, &poses_cw,
                                      &landmarks, config);
  result.step1.ran = true;
  result.step1.solve = r1.report;
  result.step1.wall_time_s = now_seconds() - t0;
  result.mean_reprojection_error_px = r1.mean_reprojection_error_px;
  if (!r1.report.usable()) {
    result.step1.failed = true;
    result.failed_stage = InitStage::kStep1;
    throw numerical_error("step 1 visual BA failed: " +
                          to_string(r1.report.termination));
  }

  if (config.step1_rotation_noise_deg > 0) {
    std::mt19937_64 rng(config.rng_seed ^ 0xa5a5a5a5ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sigma = config.step1_rotation_noise_deg * M_PI / 180.0;
    for (size_t i = 1; i < n_kf; ++i) {
      Eigen::Vector3d w;
      for (int a = 0; a < 3; ++a) w[a] = sigma * gauss(rng);
      poses_cw[i].rotation = poses_cw[i].rotation * RotationSO3::exp(w);
    }
  }

  // Body-frame states for the inertial steps.
  result.states.resize(n_kf);
  for (size_t i = 0; i < n_kf; ++i) {
    body_from_camera_pose(poses_cw[i], calib.T_bc, &result.states[i]);
    result.states[i].timestamp =
        static_cast<double>(result.keyframe_timestamps_ns[i]) * 1e-9;
  }

  // --- Step 2: inertial-only MAP --------------------------------------
  std::vector<PreintegratedImu> preints;
  t0 = now_seconds();
  InertialOnlyResult r2;
  try {
    r2 = step2_inertial_only(result.states, slice.imu, calib.noise,
                             calib.gravity_mag, config, &preints);
  } catch (const Error&) {
    result.step2.ran = true;
    result.step2.failed = true;
    result.step2.wall_time_s = now_seconds() - t0;
    result.failed_stage = InitStage::kStep2;
    result.degraded = true;
    throw;
  }
  result.step2.ran = true;
  result.step2.solve = r2.report;
  result.step2.wall_time_s = now_seconds() - t0;
  if (!r2.report.usable()) {
    result.step2.failed = true;
    result.failed_stage = InitStage::kStep2;
    result.degraded = true;
    result.inertial.gravity_mag = calib.gravity_mag;
    return result;
  }
  for (size_t i = 0; i < n_kf; ++i) result.states[i].v_w = r2.velocities[i];
  result.inertial = r2.params;

  // --- Step 3: decoupled refinement ------------------------------------
  if (config.enable_step3) {
    auto backup_states = result.states;
    auto backup_landmarks = landmarks;
    t0 = now_seconds();
    DecoupledRefineResult r3 = step3_decoupled_refine(
        slice.tracks, track_active, calib.intrinsics, calib.T_bc, preints,
        result.inertial.bias, &result.states, &landmarks, config);
    result.step3.ran = true;
    result.step3.solve = r3.report;
    result.step3.wall_time_s = now_seconds() - t0;
    if (!r3.ok) {
      result.step3.failed = true;
      result.failed_stage = InitStage::kStep3;
      result.degraded = true;
      result.states = std::move(backup_states);
      landmarks = std::move(backup_landmarks);
    }
  }

  // --- Step 4: joint visual-inertial BA --------------------------------
  t0 = now_seconds();
  JointVibaResult r4 = step4_joint_viba(
      slice.tracks, track_active, calib.intrinsics, calib.T_bc, preints,
      calib.gravity_mag, &result.states, &landmarks, &result.inertial, config,
      config.enable_step4);
  result.cost_pre_step4 = r4.cost_initial;
  result.cost_post_step4 = r4.cost_final;
  if (config.enable_step4) {
    result.step4.ran = true;
    result.step4.solve = r4.report;
    result.step4.wall_time_s = now_seconds() - t0;
    if (!r4.ok) {
      result.step4.failed = true;
      result.failed_stage = InitStage::kStep4;
      result.degraded = true;
    }
  }

  result.landmarks.clear();
  for (size_t t = 0; t < landmarks.size(); ++t) {
    if (track_active[t]) result.landmarks.push_back(landmarks[t]);
  }
  return result;
}

}  // namespace viinit
