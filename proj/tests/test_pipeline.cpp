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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "viinit/error.hpp"
#include "viinit/evaluation.hpp"
#include "viinit/pipeline.hpp"
#include "viinit/simulator.hpp"

using namespace viinit;

namespace {

SimulationConfig default_scene() {
  SimulationConfig c;
  c.trajectory.kind = TrajectoryKind::kSinusoid;
  c.trajectory.amplitude = 1.0;
  c.trajectory.angular_rate = 1.2;
  c.trajectory.duration = 2.0;
  c.trajectory.rotation.yaw_rate = 0.3;
  c.trajectory.rotation.tilt_amplitude = 0.15;
  c.trajectory.rotation.tilt_frequency = 2.0;
  c.keyframe_rate = 10.0;
  c.imu_rate = 200.0;
  c.landmark_count = 500;
  c.pixel_noise_sigma = 0.0;
  c.imu_noise_scale = 0.0;
  c.pyramid_levels = 1;
  c.seed = 21;
  return c;
}

SimulationConfig biased_scene() {
  SimulationConfig c = default_scene();
  c.true_bias.gyro = {0.02, -0.01, 0.03};
  c.true_bias.accel = {0.1, 0.0, -0.05};
  return c;
}

InitConfig default_config() {
  InitConfig c;
  c.rng_seed = 5;
  return c;
}

double state_ate(const InitResult& result,
                 const std::vector<GroundTruthEntry>& gt) {
  return ate(to_timed_poses(result), to_timed_poses(gt), AteMode::kRaw);
}

}  // namespace

TEST_CASE("noise-free ground-truth seed is a fixpoint of step 1") {
  const SimulatedDataset sim = simulate(default_scene());
  const DatasetBundle data = sim.to_bundle();
  InitConfig config = default_config();
  config.enable_step3 = false;
  config.enable_step4 = false;
  const InitResult r = run_initialization(data, config);
  CHECK(r.mean_reprojection_error_px < 1e-8);
  for (size_t i = 0; i < r.states.size(); ++i) {
    CHECK((r.states[i].p_wb - sim.keyframes[i].state.p_wb).norm() < 1e-9);
    CHECK((r.states[i].R_wb.matrix() - sim.keyframes[i].state.R_wb.matrix())
              .cwiseAbs()
              .maxCoeff() < 1e-9);
  }
}

TEST_CASE("perturbed seeds recover ground truth on noise-free tracks") {
  const SimulatedDataset sim = simulate(default_scene());
  const DatasetBundle data = sim.to_bundle();
  InitConfig config = default_config();
  config.seed_perturb_pos = 0.01;     // 1 cm
  config.seed_perturb_rot_deg = 1.0;  // 1 degree
  config.enable_step3 = false;
  config.enable_step4 = false;
  const InitResult r = run_initialization(data, config);
  for (size_t i = 0; i < r.states.size(); ++i) {
    CHECK((r.states[i].p_wb - sim.keyframes[i].state.p_wb).norm() < 1e-6);
    const Eigen::Vector3d rot_err =
        (sim.keyframes[i].state.R_wb.inverse() * r.states[i].R_wb).log();
    CHECK(rot_err.norm() < 1e-6);
  }
}

TEST_CASE("inertial-only step recovers an injected gyro bias exactly on "
          "noise-free data") {
  const SimulatedDataset sim = simulate(biased_scene());
  const DatasetBundle data = sim.to_bundle();
  InitConfig config = default_config();
  config.enable_step3 = false;
  config.enable_step4 = false;
  const InitResult r = run_initialization(data, config);
  CHECK((r.inertial.bias.gyro - sim.true_bias.gyro).norm() < 1e-5);
  CHECK((r.inertial.bias.accel - sim.true_bias.accel).norm() < 1e-4);
  CHECK((r.inertial.gravity_dir - sim.gravity_world.normalized()).norm() <
        1e-5);
}

TEST_CASE("stationary dataset: gravity aligns, velocities vanish") {
  SimulationConfig scene = default_scene();
  scene.trajectory.kind = TrajectoryKind::kStationaryRotation;
  scene.trajectory.rotation.yaw_rate = 0.4;
  scene.trajectory.rotation.tilt_amplitude = 0.2;
  scene.trajectory.rotation.tilt_frequency = 1.5;
  scene.landmark_count = 250;
  const SimulatedDataset sim = simulate(scene);
  const DatasetBundle data = sim.to_bundle();
  InitConfig config = default_config();
  config.enable_step3 = false;
  config.enable_step4 = false;
  const InitResult r = run_initialization(data, config);
  const double angle = std::acos(std::clamp(
      r.inertial.gravity_dir.dot(sim.gravity_world.normalized()), -1.0, 1.0));
  CHECK(angle < 1e-6);
  for (const KeyframeState& s : r.states) {
    CHECK(s.v_w.norm() < 1e-6);
  }
}

TEST_CASE("accel bias is weakly observable without attitude excitation") {
  // Constant attitude: accel bias and gravity direction are degenerate in
  // the horizontal tangent, so the prior pulls the bias to zero.
  SimulationConfig flat = default_scene();
  flat.trajectory.kind = TrajectoryKind::kStationaryRotation;
  flat.trajectory.rotation = {};
  flat.landmark_count = 300;
  flat.true_bias.accel = {0.1, 0.0, -0.05};

  SimulationConfig excited = flat;
  excited.trajectory.rotation.yaw_rate = 0.4;
  excited.trajectory.rotation.tilt_amplitude = 0.25;
  excited.trajectory.rotation.tilt_frequency = 2.0;

  InitConfig config = default_config();
  config.enable_step3 = false;
  config.enable_step4 = false;

  const InitResult r_flat =
      run_initialization(simulate(flat).to_bundle(), config);
  const InitResult r_excited =
      run_initialization(simulate(excited).to_bundle(), config);

  const double err_flat =
      (r_flat.inertial.bias.accel - flat.true_bias.accel).norm();
  const double err_excited =
      (r_excited.inertial.bias.accel - excited.true_bias.accel).norm();
  INFO("flat ", err_flat, " excited ", err_excited);
  CHECK(err_flat > 5.0 * err_excited);
}

TEST_CASE("step-3 rotation chaining matches the preintegrated deltas "
          "exactly") {
  const SimulatedDataset sim = simulate(biased_scene());
  const DatasetBundle data = sim.to_bundle();
  InitConfig config = default_config();
  const InitResult r = run_initialization(data, config);

  // Re-derive the chained rotations independently.
  std::vector<PreintegratedImu> preints;
  for (size_t i = 0; i + 1 < r.states.size(); ++i) {
    preints.push_back(preintegrate_between(
        data.imu, r.states[i].timestamp, r.states[i + 1].timestamp,
        r.inertial.bias, data.calibration.noise));
  }
  RotationSO3 chain = r.states[0].R_wb;
  for (size_t i = 0; i + 1 < r.states.size(); ++i) {
    chain = chain * correct_first_order(preints[i], r.inertial.bias).delta_R;
    // Step 4 re-optimizes rotations, so compare only loosely unless it is
    // disabled; here we check the chain stays near the result.
    const Eigen::Vector3d diff =
        (chain.inverse() * r.states[i + 1].R_wb).log();
    CHECK(diff.norm() < 1e-5);
  }
}

TEST_CASE("noise-free end-to-end run lands on ground truth") {
  const SimulatedDataset sim = simulate(biased_scene());
  const DatasetBundle data = sim.to_bundle();
  const InitResult r = run_initialization(data, default_config());
  CHECK_FALSE(r.degraded);
  CHECK(r.failed_stage == InitStage::kNone);
  CHECK((r.inertial.bias.gyro - sim.true_bias.gyro).norm() < 1e-4);
  CHECK((r.inertial.bias.accel - sim.true_bias.accel).norm() < 1e-3);
  CHECK((r.inertial.gravity_dir - sim.gravity_world.normalized()).norm() <
        1e-4);
  CHECK(state_ate(r, sim.keyframes) < 1e-5);
  for (size_t i = 0; i < r.states.size(); ++i) {
    CHECK((r.states[i].v_w - sim.keyframes[i].state.v_w).norm() < 1e-4);
  }
  CHECK(r.cost_post_step4 <= r.cost_pre_step4);
}

TEST_CASE("step flags control which stages run") {
  const SimulatedDataset sim = simulate(default_scene());
  const DatasetBundle data = sim.to_bundle();
  InitConfig config = default_config();
  config.enable_step3 = false;
  config.enable_step4 = false;
  const InitResult r = run_initialization(data, config);
  CHECK(r.step1.ran);
  CHECK(r.step2.ran);
  CHECK_FALSE(r.step3.ran);
  CHECK_FALSE(r.step4.ran);
  CHECK(r.cost_pre_step4 == r.cost_post_step4);

  const InitResult full = run_initialization(data, default_config());
  CHECK(full.step3.ran);
  CHECK(full.step4.ran);
}

TEST_CASE("repeated runs are bit-identical") {
  const SimulatedDataset sim = simulate(biased_scene());
  const DatasetBundle data = sim.to_bundle();
  InitConfig config = default_config();
  config.seed_perturb_pos = 0.01;
  config.seed_perturb_rot_deg = 0.5;
  const InitResult a = run_initialization(data, config);
  const InitResult b = run_initialization(data, config);
  REQUIRE(a.states.size() == b.states.size());
  for (size_t i = 0; i < a.states.size(); ++i) {
    CHECK(std::memcmp(a.states[i].R_wb.matrix().data(),
                      b.states[i].R_wb.matrix().data(),
                      9 * sizeof(double)) == 0);
    CHECK(std::memcmp(a.states[i].p_wb.data(), b.states[i].p_wb.data(),
                      3 * sizeof(double)) == 0);
    CHECK(std::memcmp(a.states[i].v_w.data(), b.states[i].v_w.data(),
                      3 * sizeof(double)) == 0);
  }
  CHECK(std::memcmp(a.inertial.bias.gyro.data(), b.inertial.bias.gyro.data(),
                    3 * sizeof(double)) == 0);
  CHECK(a.cost_post_step4 == b.cost_post_step4);
}

TEST_CASE("first keyframe pose is gauge-fixed across all steps") {
  const SimulatedDataset sim = simulate(biased_scene());
  const DatasetBundle data = sim.to_bundle();

  InitConfig base = default_config();
  base.seed_perturb_pos = 0.02;
  base.seed_perturb_rot_deg = 1.0;

  InitConfig no_refine = base;
  no_refine.enable_step3 = false;
  no_refine.enable_step4 = false;

  const InitResult full = run_initialization(data, base);
  const InitResult plain = run_initialization(data, no_refine);
  CHECK(std::memcmp(full.states[0].R_wb.matrix().data(),
                    plain.states[0].R_wb.matrix().data(),
                    9 * sizeof(double)) == 0);
  CHECK(std::memcmp(full.states[0].p_wb.data(), plain.states[0].p_wb.data(),
                    3 * sizeof(double)) == 0);
}

TEST_CASE("visual seeding initializes without ground truth") {
  SimulationConfig scene = default_scene();
  scene.pixel_noise_sigma = 0.0;
  const SimulatedDataset sim = simulate(scene);
  DatasetBundle data = sim.to_bundle();
  data.ground_truth.clear();  // force the visual seeding path

  InitConfig config = default_config();
  config.enable_step3 = false;
  config.enable_step4 = false;
  const InitResult r = run_initialization(data, config);
  // World frame is the first camera; compare via aligned ATE.
  const double err = ate(to_timed_poses(r), to_timed_poses(sim.keyframes),
                         AteMode::kRigidAligned);
  CHECK(err < 1e-6);
}

TEST_CASE("data preconditions are enforced") {
  const SimulatedDataset sim = simulate(default_scene());

  // No tracks at all.
  DatasetBundle no_tracks = sim.to_bundle();
  no_tracks.tracks = TrackSet{};
  CHECK_THROWS_AS(run_initialization(no_tracks, default_config()), Error);

  // Too few keyframes.
  DatasetBundle data = sim.to_bundle();
  InitConfig strict = default_config();
  strict.min_keyframes = 200;
  CHECK_THROWS_AS(run_initialization(data, strict), Error);
}

TEST_CASE("an imu gap inside the window is rejected") {
  const SimulatedDataset sim = simulate(default_scene());
  DatasetBundle data = sim.to_bundle();
  // Remove a chunk of samples mid-window.
  std::vector<ImuMeasurement> gappy;
  std::vector<std::int64_t> gappy_ns;
  for (size_t i = 0; i < data.imu.size(); ++i) {
    const double t = data.imu[i].timestamp;
    if (t > 0.9 && t < 1.1) continue;
    gappy.push_back(data.imu[i]);
    gappy_ns.push_back(data.imu_timestamps_ns[i]);
  }
  data.imu = std::move(gappy);
  data.imu_timestamps_ns = std::move(gappy_ns);
  CHECK_THROWS_AS(run_initialization(data, default_config()), Error);
}

TEST_CASE("window slicing drives keyframe counts") {
  SimulationConfig scene = default_scene();
  scene.trajectory.duration = 6.0;
  scene.landmark_count = 600;
  const DatasetBundle data = simulate(scene).to_bundle();
  const double t0 = data.imu_t_begin();
  const DatasetBundle cut = slice(data, t0 + 1.0, t0 + 3.0);
  const InitResult r = run_initialization(cut, default_config());
  CHECK(r.states.size() == cut.tracks.keyframe_timestamps_ns.size());
  CHECK(r.states.size() >= 10);
  CHECK(r.states.size() <= 22);
}
