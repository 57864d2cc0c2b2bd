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
#ifndef VIINIT_PIPELINE_HPP_
#define VIINIT_PIPELINE_HPP_

#include <string>
#include <vector>

#include "viinit/euroc_io.hpp"
#include "viinit/factors.hpp"
#include "viinit/solver.hpp"

namespace viinit {

enum class SeedMode { kAuto, kGroundTruth, kVisual };

SeedMode seed_mode_from_string(const std::string& s);

/**
 * Initializer configuration. Every default is overridable through the
 * key-value config file (see load_init_config and the README).
 */
struct InitConfig {
  double window_length = 2.0;  ///< s
  int min_keyframes = 10;
  int min_tracks_per_keyframe = 10;

  bool enable_step3 = true;  ///< rotation-translation-decoupled refinement
  bool enable_step4 = true;  ///< joint visual-inertial BA
  /// Re-optimize landmarks inside the 3-dof translation BA (default) or
  /// hold them at their step-1 values.
  bool step3_optimize_landmarks = true;

  double bias_prior_sigma_gyro = 0.01;   ///< rad/s
  double bias_prior_sigma_accel = 0.1;   ///< m/s^2
  double bias_prior_weight = 1.0;        ///< scales the prior information
  /// Re-integration + re-solve passes of the inertial-only step after the
  /// first solve, each at the freshly estimated bias.
  int step2_relinearize_rounds = 1;

  double huber_mono = kHuberMono;
  double huber_stereo = kHuberStereo;

  SeedMode seed_mode = SeedMode::kAuto;
  double seed_perturb_pos = 0.0;      ///< m, ground-truth seeding only
  double seed_perturb_rot_deg = 0.0;  ///< deg, ground-truth seeding only
  /// Rotation noise injected into the step-1 output poses (ablation hook
  /// modeling degraded visual rotations; 0 disables).
  double step1_rotation_noise_deg = 0.0;
  std::uint64_t rng_seed = 1;

  SolveOptions solve_options;

  void validate() const;
};

InitConfig load_init_config(const std::string& path);
std::vector<std::pair<std::string, std::string>> init_config_entries(
    const InitConfig& c);

enum class InitStage { kNone, kStep1, kStep2, kStep3, kStep4 };
std::string to_string(InitStage s);

struct StepReport {
  bool ran = false;
  bool failed = false;
  SolveReport solve;
  double wall_time_s = 0;
};

struct InitResult {
  std::vector<std::int64_t> keyframe_timestamps_ns;
  std::vector<KeyframeState> states;  ///< body frame, one per keyframe
  InertialParams inertial;
  std::vector<Landmark> landmarks;    ///< refined landmarks (active tracks)
  StepReport step1, step2, step3, step4;
  double mean_reprojection_error_px = 0;  ///< after step 1
  /// Joint visual-inertial objective evaluated at the pre-step-4 estimate
  /// and after step 4 (equal when step 4 is disabled).
  double cost_pre_step4 = 0;
  double cost_post_step4 = 0;
  InitStage failed_stage = InitStage::kNone;
  bool degraded = false;
};

// ---------------------------------------------------------------------------
// Individual steps, exposed for ablation. run_initialization() wires them
// together; see its implementation for the expected call order.

struct VisualBaResult {
  SolveReport report;
  double mean_reprojection_error_px = 0;
};

/// Joint 6-dof bundle adjustment over all window poses and landmarks
/// (first pose fixed as gauge). Poses and landmarks are updated in place.
VisualBaResult step1_visual_ba(const TrackSet& tracks,
                               const std::vector<char>& track_active,
                               const CameraIntrinsics& k,
                               std::vector<PoseSE3>* poses_cw,
                               std::vector<Landmark>* landmarks,
                               const InitConfig& config);

struct InertialOnlyResult {
  std::vector<Eigen::Vector3d> velocities;
  InertialParams params;
  SolveReport report;
};

/// Inertial-only MAP with keyframe poses fixed: estimates velocities,
/// gravity direction and both biases from the preintegrated intervals plus
/// the bias prior. `preints` is re-integrated at the estimated bias after
/// each relinearization round and left at the final linearization point.
InertialOnlyResult step2_inertial_only(
    const std::vector<KeyframeState>& body_poses,
    const std::vector<ImuMeasurement>& imu, const ImuNoiseSpec& noise,
    double gravity_mag, const InitConfig& config,
    std::vector<PreintegratedImu>* preints);

struct DecoupledRefineResult {
  SolveReport report;
  bool ok = true;
};

/**
 * Rotation-translation-decoupled refinement: keyframe rotations are
 * overwritten by chaining the bias-corrected preintegrated rotations from
 * the first keyframe, then keyframe translations (and, by default, the
 * landmarks) are re-optimized by a 3-dof-per-keyframe bundle adjustment
 * with every rotation held fixed.
 */
DecoupledRefineResult step3_decoupled_refine(
    const TrackSet& tracks, const std::vector<char>& track_active,
    const CameraIntrinsics& k, const PoseSE3& T_bc,
    const std::vector<PreintegratedImu>& preints, const ImuBias& bias,
    std::vector<KeyframeState>* states, std::vector<Landmark>* landmarks,
    const InitConfig& config);

struct JointVibaResult {
  SolveReport report;
  double cost_initial = 0;
  double cost_final = 0;
  bool ok = true;
};

/// Joint visual-inertial MAP over all keyframe states, biases, gravity
/// direction and landmarks, seeded at the current estimates (first pose
/// fixed as gauge). When `solve_it` is false the objective is only
/// evaluated, leaving the estimates untouched.
JointVibaResult step4_joint_viba(const TrackSet& tracks,
                                 const std::vector<char>& track_active,
                                 const CameraIntrinsics& k, const PoseSE3& T_bc,
                                 const std::vector<PreintegratedImu>& preints,
                                 double gravity_mag,
                                 std::vector<KeyframeState>* states,
                                 std::vector<Landmark>* landmarks,
                                 InertialParams* inertial,
                                 const InitConfig& config, bool solve_it);

/// Full four-step initialization over a dataset slice. Deterministic given
/// (slice, config). Data-level precondition violations throw; solver
/// failures inside steps 3 and 4 fall back to the previous step's estimate
/// and mark the result degraded.
InitResult run_initialization(const DatasetBundle& slice,
                              const InitConfig& config);

// Frame conversion helpers (camera-from-world <-> body-to-world).
PoseSE3 camera_pose_from_body(const KeyframeState& state, const PoseSE3& T_bc);
void body_from_camera_pose(const PoseSE3& pose_cw, const PoseSE3& T_bc,
                           KeyframeState* state);

}  // namespace viinit

#endif  // VIINIT_PIPELINE_HPP_
