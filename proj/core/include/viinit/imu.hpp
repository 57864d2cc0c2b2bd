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
#ifndef VIINIT_IMU_HPP_
#define VIINIT_IMU_HPP_

#include <limits>
#include <vector>

#include "viinit/geometry.hpp"

namespace viinit {

using Vector9d = Eigen::Matrix<double, 9, 1>;
using Matrix9d = Eigen::Matrix<double, 9, 9>;
using Matrix9x3d = Eigen::Matrix<double, 9, 3>;

/// One gyro + accelerometer sample. The accelerometer reports specific
/// force (body acceleration minus gravity, in the body frame).
struct ImuMeasurement {
  double timestamp = 0;  ///< s
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();   ///< rad/s
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  ///< m/s^2
};

/// Continuous-time noise densities (units per sqrt(Hz)).
struct ImuNoiseSpec {
  double gyro_noise_density = 0;   ///< rad/s/sqrt(Hz)
  double accel_noise_density = 0;  ///< m/s^2/sqrt(Hz)
  double gyro_bias_walk = 0;       ///< rad/s^2/sqrt(Hz)
  double accel_bias_walk = 0;      ///< m/s^3/sqrt(Hz)
};

struct ImuBias {
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();   ///< rad/s
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  ///< m/s^2
};

/// Per-keyframe body state: attitude, position, velocity in the world frame.
struct KeyframeState {
  RotationSO3 R_wb;
  Eigen::Vector3d p_wb = Eigen::Vector3d::Zero();
  Eigen::Vector3d v_w = Eigen::Vector3d::Zero();
  double timestamp = 0;
};

/// Inertial unknowns shared across the window: biases plus the gravity
/// direction (unit vector; the magnitude is a fixed constant).
struct InertialParams {
  ImuBias bias;
  Eigen::Vector3d gravity_dir = Eigen::Vector3d(0, 0, -1);
  double gravity_mag = 9.81;

  Eigen::Vector3d gravity() const { return gravity_mag * gravity_dir; }
};

/// Per-step position process noise accounting for the zero-order-hold
/// truncation error of the position update (std = scale * |accel| * dt^2).
/// Without it the conditional position confidence of the propagated
/// covariance drops below the integrator's own truncation error and the
/// MAP steps start fitting discretization artifacts.
inline constexpr double kZohPositionNoiseScale = 0.01;

/**
 * Accumulated IMU increments between two keyframes: relative rotation,
 * velocity and position deltas, their 9x9 noise covariance (tangent order:
 * rotation 0-2, velocity 3-5, position 6-8), and first-order Jacobians of
 * the deltas with respect to the bias used at integration time.
 *
 * Measurements are treated as piecewise constant over their interval
 * (zero-order hold). The bias linearization point is fixed at construction;
 * use correct_first_order() to evaluate the deltas at a different bias.
 */
class PreintegratedImu {
 public:
  explicit PreintegratedImu(const ImuBias& bias_linearization_point = {})
      : bias_lin_(bias_linearization_point) {}

  /// Accumulates one measurement held for dt seconds.
  /// Throws a data error for dt <= 0 or a non-increasing timestamp.
  void integrate(const ImuMeasurement& m, double dt, const ImuNoiseSpec& noise);

  const RotationSO3& delta_R() const { return delta_R_; }
  const Eigen::Vector3d& delta_V() const { return delta_V_; }
  const Eigen::Vector3d& delta_p() const { return delta_p_; }
  double delta_t() const { return delta_t_; }
  const Matrix9d& covariance() const { return covariance_; }
  const Matrix9x3d& jacobian_wrt_gyro_bias() const { return jac_bg_; }
  const Matrix9x3d& jacobian_wrt_accel_bias() const { return jac_ba_; }
  const ImuBias& bias_linearization_point() const { return bias_lin_; }

 private:
  RotationSO3 delta_R_;
  Eigen::Vector3d delta_V_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d delta_p_ = Eigen::Vector3d::Zero();
  double delta_t_ = 0;
  Matrix9d covariance_ = Matrix9d::Zero();
  Matrix9x3d jac_bg_ = Matrix9x3d::Zero();
  Matrix9x3d jac_ba_ = Matrix9x3d::Zero();
  ImuBias bias_lin_;
  double last_timestamp_ = -std::numeric_limits<double>::infinity();
};

/// Deltas re-expressed at a new bias via the stored first-order Jacobians.
struct CorrectedDeltas {
  RotationSO3 delta_R;
  Eigen::Vector3d delta_V = Eigen::Vector3d::Zero();
  Eigen::Vector3d delta_p = Eigen::Vector3d::Zero();
  /// Set when the bias step exceeded the warning threshold and the
  /// first-order correction may be inaccurate.
  bool bias_step_large = false;
};

CorrectedDeltas correct_first_order(const PreintegratedImu& preint,
                                    const ImuBias& new_bias,
                                    double warn_threshold = 0.05);

/**
 * 9-vector inertial residual [r_dR, r_dV, r_dp] between two keyframe
 * states given the preintegrated deltas and the world gravity vector:
 *
 *   r_dR = log(dR^T R_prev^T R_next)
 *   r_dV = R_prev^T (v_next - v_prev - g dt) - dV
 *   r_dp = R_prev^T (p_next - p_prev - v_prev dt - 1/2 g dt^2) - dp
 *
 * Throws a data error if the keyframe interval disagrees with the
 * preintegrated delta_t by more than 1e-4 s.
 */
Vector9d inertial_residual(const PreintegratedImu& preint,
                           const KeyframeState& state_prev,
                           const KeyframeState& state_next,
                           const Eigen::Vector3d& gravity);

/// Same residual, evaluated with externally bias-corrected deltas.
Vector9d inertial_residual(const CorrectedDeltas& deltas, double delta_t,
                           const KeyframeState& state_prev,
                           const KeyframeState& state_next,
                           const Eigen::Vector3d& gravity);

/// The unique next state with zero inertial residual.
KeyframeState predict(const KeyframeState& state_prev,
                      const PreintegratedImu& preint,
                      const Eigen::Vector3d& gravity);

/**
 * Integrates every measurement overlapping [t_start, t_end] under the
 * zero-order-hold model. A sample interval straddling a boundary is split,
 * with the measurement value linearly interpolated at the split point.
 * The stream must be sorted by timestamp.
 */
PreintegratedImu preintegrate_between(const std::vector<ImuMeasurement>& imu,
                                      double t_start, double t_end,
                                      const ImuBias& bias,
                                      const ImuNoiseSpec& noise);

}  // namespace viinit

#endif  // VIINIT_IMU_HPP_
