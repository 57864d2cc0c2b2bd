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
#ifndef VIINIT_SIMULATOR_HPP_
#define VIINIT_SIMULATOR_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "viinit/euroc_io.hpp"

namespace viinit {

enum class TrajectoryKind {
  kSinusoid,
  kCircle,
  kFigureEight,
  kStationaryRotation,
};

TrajectoryKind trajectory_kind_from_string(const std::string& s);
std::string to_string(TrajectoryKind k);

/// Closed-form orientation profile R_wb(t) = exp(z yaw(t)) exp(x tilt(t))
/// with yaw(t) = yaw_rate t + yaw_amplitude sin(yaw_frequency t) and
/// tilt(t) = tilt_amplitude sin(tilt_frequency t). Body angular velocity
/// has an exact closed form.
struct RotationProfile {
  double yaw_rate = 0;        ///< rad/s
  double yaw_amplitude = 0;   ///< rad
  double yaw_frequency = 0;   ///< rad/s
  double tilt_amplitude = 0;  ///< rad
  double tilt_frequency = 0;  ///< rad/s
};

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kSinusoid;
  double amplitude = 1.0;     ///< m
  double angular_rate = 1.0;  ///< rad/s
  double duration = 10.0;     ///< s
  RotationProfile rotation;
};

/// Exact state of the analytic trajectory at time t (t = 0 is the
/// trajectory start). Velocities are analytic derivatives.
struct TrajectorySample {
  KeyframeState state;
  Eigen::Vector3d accel_world = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega_body = Eigen::Vector3d::Zero();
};

TrajectorySample trajectory_sample(const TrajectorySpec& spec, double t);

/// Ground-truth keyframe states at the given rate over [0, duration].
std::vector<KeyframeState> generate_trajectory(const TrajectorySpec& spec,
                                               double keyframe_rate);

struct SimulationConfig {
  TrajectorySpec trajectory;
  double keyframe_rate = 10.0;  ///< Hz
  double imu_rate = 200.0;      ///< Hz
  ImuBias true_bias;
  ImuNoiseSpec noise;           ///< densities; also written to calibration
  double imu_noise_scale = 1.0;   ///< 0 disables the noise realization
  double pixel_noise_sigma = 1.0; ///< px at pyramid level 0
  int landmark_count = 300;
  double landmark_margin = 3.0;   ///< box inflation around the trajectory, m
  int pyramid_levels = 3;
  double min_depth = 0.2;         ///< visibility cull, m
  double gravity_mag = 9.81;
  CameraIntrinsics intrinsics;    ///< defaults EuRoC-like when left zero
  PoseSE3 T_bc;                   ///< defaults to camera z forward when identity
  std::uint64_t seed = 1;
  std::int64_t start_time_ns = 0;
};

/// EuRoC-like defaults for the fields the caller left at zero.
void apply_simulation_defaults(SimulationConfig* config);

struct SimulatedDataset {
  std::vector<GroundTruthEntry> keyframes;  ///< ground truth at keyframe rate
  std::vector<ImuMeasurement> imu;
  std::vector<std::int64_t> imu_timestamps_ns;
  TrackSet tracks;
  std::vector<Eigen::Vector3d> true_landmarks;  ///< by landmark id
  ImuBias true_bias;
  Eigen::Vector3d gravity_world = Eigen::Vector3d::Zero();
  CalibrationBundle calibration;

  DatasetBundle to_bundle() const;
};

/**
 * Noisy IMU stream for the trajectory. Samples are synthesized as exact
 * interval increments (delta-angle and delta-velocity over the sample
 * period divided by dt, the convention of integrating IMUs), offset by the
 * bias and white noise with per-sample sigma = density * sqrt(rate) *
 * noise_scale. Deterministic given the seed.
 */
std::vector<ImuMeasurement> sample_imu(const TrajectorySpec& spec,
                                       double imu_rate, const ImuBias& bias,
                                       const ImuNoiseSpec& noise,
                                       double noise_scale,
                                       const Eigen::Vector3d& gravity,
                                       std::uint64_t seed);

/**
 * Landmarks uniform in a box around the trajectory, observed wherever the
 * true projection lands inside the image with positive depth; stereo when
 * both eyes see the point, mono otherwise. Pixel noise is Gaussian with
 * sigma * pyramid_scale^level per coordinate. Tracks keeping fewer than
 * two observations are discarded.
 */
SimulatedDataset simulate(const SimulationConfig& config);

/// Simulation spec file (flat key-value; see README for the keys).
SimulationConfig load_simulation_spec(const std::string& path);

}  // namespace viinit

#endif  // VIINIT_SIMULATOR_HPP_
