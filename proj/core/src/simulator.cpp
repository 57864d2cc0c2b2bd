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
#include "viinit/simulator.hpp"

#include <cmath>
#include <random>

#include "viinit/error.hpp"

namespace viinit {

TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "sinusoid") return TrajectoryKind::kSinusoid;
  if (s == "circle") return TrajectoryKind::kCircle;
  if (s == "figure-eight") return TrajectoryKind::kFigureEight;
  if (s == "stationary-rotation") return TrajectoryKind::kStationaryRotation;
  throw config_error("unknown trajectory kind '" + s + "'");
}

std::string to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kSinusoid:
      return "sinusoid";
    case TrajectoryKind::kCircle:
      return "circle";
    case TrajectoryKind::kFigureEight:
      return "figure-eight";
    case TrajectoryKind::kStationaryRotation:
      return "stationary-rotation";
  }
  return "unknown";
}

namespace {

void position_derivatives(const TrajectorySpec& spec, double t,
                          Eigen::Vector3d* p, Eigen::Vector3d* v,
                          Eigen::Vector3d* a) {
  const double A = spec.amplitude;
  const double w = spec.angular_rate;
  const double wt = w * t;
  switch (spec.kind) {
    case TrajectoryKind::kStationaryRotation:
      p->setZero();
      v->setZero();
      a->setZero();
      break;
    case TrajectoryKind::kCircle:
      *p = A * Eigen::Vector3d(std::cos(wt) - 1.0, std::sin(wt), 0);
      *v = A * w * Eigen::Vector3d(-std::sin(wt), std::cos(wt), 0);
      *a = A * w * w * Eigen::Vector3d(-std::cos(wt), -std::sin(wt), 0);
      break;
    case TrajectoryKind::kSinusoid:
      *p = A * Eigen::Vector3d(std::sin(wt), 1.0 - std::cos(wt),
                               0.5 * std::sin(2 * wt));
      *v = A * w *
           Eigen::Vector3d(std::cos(wt), std::sin(wt), std::cos(2 * wt));
      *a = A * w * w *
           Eigen::Vector3d(-std::sin(wt), std::cos(wt),
                           -2.0 * std::sin(2 * wt));
      break;
    case TrajectoryKind::kFigureEight:
      *p = A * Eigen::Vector3d(std::sin(wt), 0.5 * std::sin(2 * wt),
                               0.3 * (1.0 - std::cos(wt)));
      *v = A * w *
           Eigen::Vector3d(std::cos(wt), std::cos(2 * wt),
                           0.3 * std::sin(wt));
      *a = A * w * w *
           Eigen::Vector3d(-std::sin(wt), -2.0 * std::sin(2 * wt),
                           0.3 * std::cos(wt));
      break;
  }
}

}  // namespace

TrajectorySample trajectory_sample(const TrajectorySpec& spec, double t) {
  if (!(spec.duration > 0) || !std::isfinite(spec.angular_rate)) {
    throw config_error("trajectory spec: duration/rates invalid");
  }
  TrajectorySample out;
  Eigen::Vector3d p, v, a;
  position_derivatives(spec, t, &p, &v, &a);

  const RotationProfile& rp = spec.rotation;
  const double yaw = rp.yaw_rate * t +
                     rp.yaw_amplitude * std::sin(rp.yaw_frequency * t);
  const double dyaw = rp.yaw_rate + rp.yaw_amplitude * rp.yaw_frequency *
                                        std::cos(rp.yaw_frequency * t);
  const double tilt = rp.tilt_amplitude * std::sin(rp.tilt_frequency * t);
  const double dtilt =
      rp.tilt_amplitude * rp.tilt_frequency * std::cos(rp.tilt_frequency * t);

  const RotationSO3 r_yaw = RotationSO3::exp(yaw * Eigen::Vector3d::UnitZ());
  const RotationSO3 r_tilt = RotationSO3::exp(tilt * Eigen::Vector3d::UnitX());
  out.state.R_wb = r_yaw * r_tilt;
  // omega_body = dyaw * R_tilt^T z + dtilt * x (exact for this profile).
  out.omega_body = dyaw * (r_tilt.inverse() * Eigen::Vector3d::UnitZ()) +
                   dtilt * Eigen::Vector3d::UnitX();
  out.state.p_wb = p;
  out.state.v_w = v;
  out.state.timestamp = t;
  out.accel_world = a;
  return out;
}

std::vector<KeyframeState> generate_trajectory(const TrajectorySpec& spec,
                                               double keyframe_rate) {
  if (!(keyframe_rate > 0)) {
    throw config_error("keyframe rate must be positive");
  }
  std::vector<KeyframeState> out;
  const int n = static_cast<int>(std::floor(spec.duration * keyframe_rate)) + 1;
  for (int i = 0; i < n; ++i) {
    out.push_back(trajectory_sample(spec, i / keyframe_rate).state);
  }
  return out;
}

std::vector<ImuMeasurement> sample_imu(const TrajectorySpec& spec,
                                       double imu_rate, const ImuBias& bias,
                                       const ImuNoiseSpec& noise,
                                       double noise_scale,
                                       const Eigen::Vector3d& gravity,
                                       std::uint64_t seed) {
  if (!(imu_rate > 0)) throw config_error("imu rate must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int n = static_cast<int>(std::floor(spec.duration * imu_rate));
  std::vector<ImuMeasurement> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double t0 = i / imu_rate;
    const double t1 = (i + 1) / imu_rate;
    const double dt = t1 - t0;
    const TrajectorySample s0 = trajectory_sample(spec, t0);
    const TrajectorySample s1 = trajectory_sample(spec, t1);

    ImuMeasurement m;
    m.timestamp = t0;
    // Interval increments divided by dt: reproduces the analytic motion
    // exactly under zero-order-hold integration.
    m.gyro = (s0.state.R_wb.inverse() * s1.state.R_wb).log() / dt + bias.gyro;
    m.accel = s0.state.R_wb.inverse() *
                  ((s1.state.v_w - s0.state.v_w) / dt - gravity) +
              bias.accel;
    if (noise_scale > 0) {
      const double sg =
          noise.gyro_noise_density * std::sqrt(imu_rate) * noise_scale;
      const double sa =
          noise.accel_noise_density * std::sqrt(imu_rate) * noise_scale;
      for (int a = 0; a < 3; ++a) m.gyro[a] += sg * gauss(rng);
      for (int a = 0; a < 3; ++a) m.accel[a] += sa * gauss(rng);
    }
    out.push_back(m);
  }
  return out;
}

void apply_simulation_defaults(SimulationConfig* config) {
  if (config->intrinsics.fx == 0) {
    config->intrinsics.fx = 458.654;
    config->intrinsics.fy = 457.296;
    config->intrinsics.cx = 367.215;
    config->intrinsics.cy = 248.375;
    config->intrinsics.baseline_b = 0.11;
    config->intrinsics.image_width = 752;
    config->intrinsics.image_height = 480;
  }
  const Eigen::Matrix3d r_bc = config->T_bc.rotation.matrix();
  if ((r_bc - Eigen::Matrix3d::Identity()).norm() < 1e-12 &&
      config->T_bc.translation.norm() < 1e-12) {
    // Camera optical axis along body x, image right along -y, down along -z.
    Eigen::Matrix3d m;
    // clang-format off
    m << 0,  0, 1,
        -1,  0, 0,
         0, -1, 0;
    // clang-format on
    config->T_bc =
        PoseSE3(RotationSO3::from_matrix(m), {0.05, -0.02, 0.01});
  }
  if (config->noise.gyro_noise_density == 0 &&
      config->noise.accel_noise_density == 0) {
    config->noise.gyro_noise_density = 1.7e-4;
    config->noise.accel_noise_density = 2.0e-3;
    config->noise.gyro_bias_walk = 1.9e-5;
    config->noise.accel_bias_walk = 3.0e-3;
  }
}

SimulatedDataset simulate(const SimulationConfig& config_in) {
  SimulationConfig config = config_in;
  apply_simulation_defaults(&config);
  config.intrinsics.validate();
  if (config.landmark_count <= 0) {
    throw config_error("landmark_count must be positive");
  }
  if (config.imu_rate < 10.0 * config.keyframe_rate) {
    throw config_error("imu rate must be at least 10x the keyframe rate");
  }

  SimulatedDataset out;
  out.true_bias = config.true_bias;
  out.gravity_world = Eigen::Vector3d(0, 0, -config.gravity_mag);
  out.calibration.intrinsics = config.intrinsics;
  out.calibration.T_bc = config.T_bc;
  out.calibration.noise = config.noise;
  out.calibration.gravity_mag = config.gravity_mag;

  // Keyframe ground truth, timestamped on an exact integer-ns grid.
  const int n_kf = static_cast<int>(std::floor(
                       config.trajectory.duration * config.keyframe_rate)) +
                   1;
  for (int i = 0; i < n_kf; ++i) {
    const std::int64_t ns =
        config.start_time_ns +
        static_cast<std::int64_t>(std::llround(i * 1e9 / config.keyframe_rate));
    const double t = i / config.keyframe_rate;
    GroundTruthEntry e;
    e.timestamp_ns = ns;
    e.state = trajectory_sample(config.trajectory, t).state;
    e.state.timestamp = static_cast<double>(ns) * 1e-9;
    e.bias = config.true_bias;
    out.keyframes.push_back(e);
  }

  // IMU stream (trajectory-relative times shifted onto the ns grid).
  out.imu = sample_imu(config.trajectory, config.imu_rate, config.true_bias,
                       config.noise, config.imu_noise_scale,
                       out.gravity_world, config.seed);
  out.imu_timestamps_ns.reserve(out.imu.size());
  for (size_t i = 0; i < out.imu.size(); ++i) {
    const std::int64_t ns =
        config.start_time_ns +
        static_cast<std::int64_t>(std::llround(i * 1e9 / config.imu_rate));
    out.imu_timestamps_ns.push_back(ns);
    out.imu[i].timestamp = static_cast<double>(ns) * 1e-9;
  }

  // Landmarks uniform in the inflated trajectory bounding box.
  Eigen::Vector3d lo = out.keyframes.front().state.p_wb;
  Eigen::Vector3d hi = lo;
  for (const GroundTruthEntry& e : out.keyframes) {
    lo = lo.cwiseMin(e.state.p_wb);
    hi = hi.cwiseMax(e.state.p_wb);
  }
  // Cube around the trajectory so that coverage does not depend on the
  // viewing direction.
  const Eigen::Vector3d center = 0.5 * (lo + hi);
  const double half_extent =
      0.5 * (hi - lo).maxCoeff() + config.landmark_margin;
  lo = center - Eigen::Vector3d::Constant(half_extent);
  hi = center + Eigen::Vector3d::Constant(half_extent);

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> level_dist(
      0, std::max(0, config.pyramid_levels - 1));

  out.true_landmarks.reserve(config.landmark_count);
  for (int i = 0; i < config.landmark_count; ++i) {
    Eigen::Vector3d x;
    for (int a = 0; a < 3; ++a) x[a] = lo[a] + (hi[a] - lo[a]) * u01(rng);
    out.true_landmarks.push_back(x);
  }

  const CameraIntrinsics& k = config.intrinsics;
  const double border = 1.0;
  std::vector<Track> tracks(config.landmark_count);
  for (int i = 0; i < config.landmark_count; ++i) {
    tracks[i].landmark.id = i;
    tracks[i].landmark.position_world = out.true_landmarks[i];
  }

  for (int kf = 0; kf < n_kf; ++kf) {
    const KeyframeState& s = out.keyframes[kf].state;
    const PoseSE3 t_wc = PoseSE3(s.R_wb, s.p_wb) * config.T_bc;
    const PoseSE3 t_cw = t_wc.inverse();
    for (int i = 0; i < config.landmark_count; ++i) {
      const Eigen::Vector3d pc = t_cw * out.true_landmarks[i];
      if (pc.z() < config.min_depth) continue;
      const Eigen::Vector3d px = project_stereo(pc, k);
      const bool left_ok = px.x() >= border && px.x() <= k.image_width - border &&
                           px.y() >= border && px.y() <= k.image_height - border;
      if (!left_ok) continue;
      const bool right_ok =
          px.z() >= border && px.z() <= k.image_width - border;

      Observation obs;
      obs.keyframe_id = kf;
      obs.landmark_id = i;
      obs.kind = right_ok ? ObservationKind::kStereo : ObservationKind::kMono;
      obs.pyramid_level = level_dist(rng);
      obs.pixel = px;
      if (config.pixel_noise_sigma > 0) {
        const double sigma =
            config.pixel_noise_sigma * std::pow(kPyramidScale, obs.pyramid_level);
        obs.pixel.x() += sigma * gauss(rng);
        obs.pixel.y() += sigma * gauss(rng);
        if (right_ok) obs.pixel.z() += sigma * gauss(rng);
      }
      if (!right_ok) obs.pixel.z() = 0.0;
      tracks[i].observations.push_back(obs);
    }
  }

  out.tracks.keyframe_timestamps_ns.reserve(n_kf);
  for (const GroundTruthEntry& e : out.keyframes) {
    out.tracks.keyframe_timestamps_ns.push_back(e.timestamp_ns);
  }
  for (Track& t : tracks) {
    if (t.observations.size() >= 2) {
      out.tracks.tracks.push_back(std::move(t));
    } else {
      ++out.tracks.dropped_tracks;
    }
  }
  return out;
}

DatasetBundle SimulatedDataset::to_bundle() const {
  DatasetBundle b;
  b.imu = imu;
  b.imu_timestamps_ns = imu_timestamps_ns;
  b.ground_truth = keyframes;
  b.calibration = calibration;
  b.tracks = tracks;
  // File-backed tracks never carry landmark positions; keep the in-memory
  // bundle consistent with what a reload would produce.
  for (Track& t : b.tracks.tracks) {
    t.landmark.position_world.setZero();
  }
  return b;
}

SimulationConfig load_simulation_spec(const std::string& path) {
  const auto kv = read_key_value_file(path);
  SimulationConfig c;
  auto get = [&](const std::string& key, double fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : parse_double(it->second);
  };
  const auto it_kind = kv.find("trajectory");
  if (it_kind != kv.end()) {
    c.trajectory.kind = trajectory_kind_from_string(it_kind->second);
  }
  c.trajectory.amplitude = get("amplitude", c.trajectory.amplitude);
  c.trajectory.angular_rate = get("angular_rate", c.trajectory.angular_rate);
  c.trajectory.duration = get("duration", c.trajectory.duration);
  c.trajectory.rotation.yaw_rate =
      get("yaw_rate", c.trajectory.rotation.yaw_rate);
  c.trajectory.rotation.yaw_amplitude =
      get("yaw_amplitude", c.trajectory.rotation.yaw_amplitude);
  c.trajectory.rotation.yaw_frequency =
      get("yaw_frequency", c.trajectory.rotation.yaw_frequency);
  c.trajectory.rotation.tilt_amplitude =
      get("tilt_amplitude", c.trajectory.rotation.tilt_amplitude);
  c.trajectory.rotation.tilt_frequency =
      get("tilt_frequency", c.trajectory.rotation.tilt_frequency);
  c.keyframe_rate = get("keyframe_rate", c.keyframe_rate);
  c.imu_rate = get("imu_rate", c.imu_rate);
  for (int i = 0; i < 3; ++i) {
    c.true_bias.gyro[i] =
        get("gyro_bias_" + std::string(1, "xyz"[i]), c.true_bias.gyro[i]);
    c.true_bias.accel[i] =
        get("accel_bias_" + std::string(1, "xyz"[i]), c.true_bias.accel[i]);
  }
  c.noise.gyro_noise_density =
      get("gyro_noise_density", c.noise.gyro_noise_density);
  c.noise.accel_noise_density =
      get("accel_noise_density", c.noise.accel_noise_density);
  c.noise.gyro_bias_walk = get("gyro_bias_walk", c.noise.gyro_bias_walk);
  c.noise.accel_bias_walk = get("accel_bias_walk", c.noise.accel_bias_walk);
  c.imu_noise_scale = get("imu_noise_scale", c.imu_noise_scale);
  c.pixel_noise_sigma = get("pixel_noise_sigma", c.pixel_noise_sigma);
  c.landmark_count =
      static_cast<int>(get("landmark_count", c.landmark_count));
  c.landmark_margin = get("landmark_margin", c.landmark_margin);
  c.pyramid_levels = static_cast<int>(get("pyramid_levels", c.pyramid_levels));
  c.min_depth = get("min_depth", c.min_depth);
  c.gravity_mag = get("gravity_mag", c.gravity_mag);
  c.seed = static_cast<std::uint64_t>(get("seed", static_cast<double>(c.seed)));
  c.start_time_ns =
      static_cast<std::int64_t>(get("start_time_ns", 0.0));
  return c;
}

}  // namespace viinit
