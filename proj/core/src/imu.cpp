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
#include "viinit/imu.hpp"

#include <algorithm>
#include <cmath>

#include "viinit/error.hpp"

namespace viinit {

void PreintegratedImu::integrate(const ImuMeasurement& m, double dt,
                                 const ImuNoiseSpec& noise) {
  if (!(dt > 0) || !std::isfinite(dt)) {
    throw data_error("imu integrate: dt must be positive");
  }
  if (!(m.timestamp > last_timestamp_)) {
    throw data_error("imu integrate: non-monotone timestamp");
  }
  if (!m.gyro.allFinite() || !m.accel.allFinite()) {
    throw data_error("imu integrate: non-finite measurement");
  }
  last_timestamp_ = m.timestamp;

  const Eigen::Vector3d w = m.gyro - bias_lin_.gyro;
  const Eigen::Vector3d a = m.accel - bias_lin_.accel;
  const Eigen::Matrix3d dR_old = delta_R_.matrix();
  const Eigen::Matrix3d a_hat = skew(a);
  const RotationSO3 step = RotationSO3::exp(w * dt);
  const Eigen::Matrix3d jr = right_jacobian_so3(w * dt);

  // Covariance propagation in the [rotation, velocity, position] tangent.
  Matrix9d A = Matrix9d::Identity();
  A.block<3, 3>(0, 0) = step.matrix().transpose();
  A.block<3, 3>(3, 0) = -dR_old * a_hat * dt;
  A.block<3, 3>(6, 0) = -0.5 * dR_old * a_hat * dt * dt;
  A.block<3, 3>(6, 3) = Eigen::Matrix3d::Identity() * dt;

  Eigen::Matrix<double, 9, 6> B = Eigen::Matrix<double, 9, 6>::Zero();
  B.block<3, 3>(0, 0) = jr * dt;
  B.block<3, 3>(3, 3) = dR_old * dt;
  B.block<3, 3>(6, 3) = 0.5 * dR_old * dt * dt;

  Eigen::Matrix<double, 6, 6> Q = Eigen::Matrix<double, 6, 6>::Zero();
  const double gyro_var = noise.gyro_noise_density * noise.gyro_noise_density / dt;
  const double accel_var =
      noise.accel_noise_density * noise.accel_noise_density / dt;
  Q.topLeftCorner<3, 3>() = gyro_var * Eigen::Matrix3d::Identity();
  Q.bottomRightCorner<3, 3>() = accel_var * Eigen::Matrix3d::Identity();

  covariance_ = A * covariance_ * A.transpose() + B * Q * B.transpose();
  const double zoh_sigma = kZohPositionNoiseScale * a.norm() * dt * dt;
  covariance_.block<3, 3>(6, 6) +=
      zoh_sigma * zoh_sigma * Eigen::Matrix3d::Identity();
  covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();

  // Bias Jacobians; position rows use the pre-update velocity/rotation rows.
  const Eigen::Matrix3d jr_bg = jac_bg_.block<3, 3>(0, 0);
  const Eigen::Matrix3d jv_bg = jac_bg_.block<3, 3>(3, 0);
  const Eigen::Matrix3d jv_ba = jac_ba_.block<3, 3>(3, 0);

  jac_bg_.block<3, 3>(6, 0) +=
      jv_bg * dt - 0.5 * dR_old * a_hat * jr_bg * dt * dt;
  jac_ba_.block<3, 3>(6, 0) += jv_ba * dt - 0.5 * dR_old * dt * dt;
  jac_bg_.block<3, 3>(3, 0) += -dR_old * a_hat * jr_bg * dt;
  jac_ba_.block<3, 3>(3, 0) += -dR_old * dt;
  jac_bg_.block<3, 3>(0, 0) = step.matrix().transpose() * jr_bg - jr * dt;

  // Delta updates; position uses the pre-update velocity and rotation.
  delta_p_ += delta_V_ * dt + 0.5 * dR_old * a * dt * dt;
  delta_V_ += dR_old * a * dt;
  delta_R_ = delta_R_ * step;
  delta_t_ += dt;
}

CorrectedDeltas correct_first_order(const PreintegratedImu& preint,
                                    const ImuBias& new_bias,
                                    double warn_threshold) {
  const Eigen::Vector3d dbg = new_bias.gyro - preint.bias_linearization_point().gyro;
  const Eigen::Vector3d dba =
      new_bias.accel - preint.bias_linearization_point().accel;
  CorrectedDeltas out;
  out.delta_R = preint.delta_R() *
                RotationSO3::exp(preint.jacobian_wrt_gyro_bias().block<3, 3>(0, 0) * dbg);
  out.delta_V = preint.delta_V() +
                preint.jacobian_wrt_gyro_bias().block<3, 3>(3, 0) * dbg +
                preint.jacobian_wrt_accel_bias().block<3, 3>(3, 0) * dba;
  out.delta_p = preint.delta_p() +
                preint.jacobian_wrt_gyro_bias().block<3, 3>(6, 0) * dbg +
                preint.jacobian_wrt_accel_bias().block<3, 3>(6, 0) * dba;
  out.bias_step_large =
      std::max(dbg.norm(), dba.norm()) > warn_threshold;
  return out;
}

Vector9d inertial_residual(const CorrectedDeltas& deltas, double delta_t,
                           const KeyframeState& prev,
                           const KeyframeState& next,
                           const Eigen::Vector3d& gravity) {
  const Eigen::Matrix3d R_prev_t = prev.R_wb.matrix().transpose();
  Vector9d r;
  r.segment<3>(0) =
      (deltas.delta_R.inverse() * prev.R_wb.inverse() * next.R_wb).log();
  r.segment<3>(3) =
      R_prev_t * (next.v_w - prev.v_w - gravity * delta_t) - deltas.delta_V;
  r.segment<3>(6) = R_prev_t * (next.p_wb - prev.p_wb - prev.v_w * delta_t -
                                0.5 * gravity * delta_t * delta_t) -
                    deltas.delta_p;
  return r;
}

Vector9d inertial_residual(const PreintegratedImu& preint,
                           const KeyframeState& prev,
                           const KeyframeState& next,
                           const Eigen::Vector3d& gravity) {
  if (std::abs(preint.delta_t() - (next.timestamp - prev.timestamp)) > 1e-4) {
    throw data_error("inertial_residual: keyframe interval inconsistent with "
                     "preintegrated delta_t");
  }
  CorrectedDeltas deltas{preint.delta_R(), preint.delta_V(), preint.delta_p(),
                         false};
  return inertial_residual(deltas, preint.delta_t(), prev, next, gravity);
}

KeyframeState predict(const KeyframeState& prev, const PreintegratedImu& preint,
                      const Eigen::Vector3d& gravity) {
  const double dt = preint.delta_t();
  KeyframeState next;
  next.R_wb = prev.R_wb * preint.delta_R();
  next.v_w = prev.v_w + gravity * dt + prev.R_wb * preint.delta_V();
  next.p_wb = prev.p_wb + prev.v_w * dt + 0.5 * gravity * dt * dt +
              prev.R_wb * preint.delta_p();
  next.timestamp = prev.timestamp + dt;
  return next;
}

namespace {

ImuMeasurement interpolate(const ImuMeasurement& a, const ImuMeasurement& b,
                           double t) {
  const double alpha = (t - a.timestamp) / (b.timestamp - a.timestamp);
  ImuMeasurement out;
  out.timestamp = t;
  out.gyro = (1.0 - alpha) * a.gyro + alpha * b.gyro;
  out.accel = (1.0 - alpha) * a.accel + alpha * b.accel;
  return out;
}

}  // namespace

PreintegratedImu preintegrate_between(const std::vector<ImuMeasurement>& imu,
                                      double t_start, double t_end,
                                      const ImuBias& bias,
                                      const ImuNoiseSpec& noise) {
  if (!(t_end > t_start)) {
    throw data_error("preintegrate_between: empty interval");
  }
  if (imu.empty()) {
    throw data_error("preintegrate_between: no measurements");
  }
  PreintegratedImu out(bias);

  // Sample whose hold interval contains t_start.
  auto it = std::upper_bound(
      imu.begin(), imu.end(), t_start,
      [](double t, const ImuMeasurement& m) { return t < m.timestamp; });
  size_t i = (it == imu.begin()) ? 0 : (std::distance(imu.begin(), it) - 1);

  double t = t_start;
  while (t < t_end - 1e-12) {
    double seg_end =
        (i + 1 < imu.size()) ? std::min(imu[i + 1].timestamp, t_end) : t_end;
    if (seg_end <= t + 1e-15) {
      ++i;
      continue;
    }
    ImuMeasurement m = imu[i];
    if (t > imu[i].timestamp && i + 1 < imu.size()) {
      m = interpolate(imu[i], imu[i + 1], t);
    }
    m.timestamp = t;
    out.integrate(m, seg_end - t, noise);
    t = seg_end;
    if (i + 1 < imu.size() && t >= imu[i + 1].timestamp - 1e-12) ++i;
  }
  return out;
}

}  // namespace viinit
