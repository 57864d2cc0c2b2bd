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
#ifndef VIINIT_FACTORS_HPP_
#define VIINIT_FACTORS_HPP_

#include <vector>

#include "viinit/camera.hpp"
#include "viinit/imu.hpp"
#include "viinit/solver.hpp"

namespace viinit {

/// Default Huber thresholds on whitened reprojection residuals
/// (chi-square 0.95 quantiles for 2 and 3 dof).
inline constexpr double kHuberMono = 2.45;
inline constexpr double kHuberStereo = 2.80;

/**
 * Reprojection residual for a camera-from-world pose split into a
 * rotation block and a translation block:
 *
 *   r = (observed - project(R_cw X + t_cw)) / sigma_level
 *
 * Blocks: [rotation R_cw, translation t_cw, landmark X].
 * Mono observations produce 2-dim residuals, stereo 3-dim.
 */
class ReprojectionFactorCam : public ResidualBlock {
 public:
  ReprojectionFactorCam(int rot_cw_block, int t_cw_block, int landmark_block,
                        const Observation& obs, const CameraIntrinsics& k);

  int dim() const override { return obs_.dim(); }
  const std::vector<int>& parameter_blocks() const override { return blocks_; }
  bool evaluate(const LeastSquaresProblem& problem, Eigen::VectorXd* residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  std::vector<int> blocks_;
  Observation obs_;
  CameraIntrinsics k_;
  double inv_sigma_;
};

/**
 * Reprojection residual expressed over the body state, with fixed
 * body-to-camera extrinsics: point_cam = R_bc^T (R_wb^T (X - p_wb) - t_bc).
 *
 * Blocks: [rotation R_wb, position p_wb, landmark X].
 */
class ReprojectionFactorBody : public ResidualBlock {
 public:
  ReprojectionFactorBody(int R_wb_block, int p_wb_block, int landmark_block,
                         const Observation& obs, const CameraIntrinsics& k,
                         const PoseSE3& T_bc);

  int dim() const override { return obs_.dim(); }
  const std::vector<int>& parameter_blocks() const override { return blocks_; }
  bool evaluate(const LeastSquaresProblem& problem, Eigen::VectorXd* residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  std::vector<int> blocks_;
  Observation obs_;
  CameraIntrinsics k_;
  Eigen::Matrix3d R_cb_;
  Eigen::Vector3d t_cb_;
  double inv_sigma_;
};

/**
 * Preintegrated inertial residual between two keyframes, whitened by the
 * square root of (covariance + 1e-12 I)^-1. The preintegrated deltas are
 * re-expressed at the current bias blocks via the stored first-order
 * Jacobians; gravity enters as a unit direction with fixed magnitude.
 *
 * Blocks: [R_wb1, p_wb1, v_w1, R_wb2, p_wb2, v_w2, b_gyro, b_accel,
 *          gravity_dir].
 */
class InertialFactor : public ResidualBlock {
 public:
  InertialFactor(int R1, int p1, int v1, int R2, int p2, int v2, int bg,
                 int ba, int gravity_dir, const PreintegratedImu& preint,
                 double gravity_mag);

  int dim() const override { return 9; }
  const std::vector<int>& parameter_blocks() const override { return blocks_; }
  bool evaluate(const LeastSquaresProblem& problem, Eigen::VectorXd* residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  std::vector<int> blocks_;
  const PreintegratedImu* preint_;  // owned by the pipeline, outlives solves
  double gravity_mag_;
  Matrix9d sqrt_info_;
};

/// Gaussian prior on both biases: r = sqrt_info ([bg; ba] - mean).
/// Blocks: [b_gyro, b_accel].
class BiasPriorFactor : public ResidualBlock {
 public:
  BiasPriorFactor(int bg_block, int ba_block, const ImuBias& mean,
                  const Eigen::Matrix<double, 6, 6>& sqrt_info);

  int dim() const override { return 6; }
  const std::vector<int>& parameter_blocks() const override { return blocks_; }
  bool evaluate(const LeastSquaresProblem& problem, Eigen::VectorXd* residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  std::vector<int> blocks_;
  Eigen::Matrix<double, 6, 1> mean_;
  Eigen::Matrix<double, 6, 6> sqrt_info_;
};

/// Plain bias-prior residual without solver plumbing:
/// sqrt_info ([bias] - [mean]) as a 6-vector.
Eigen::Matrix<double, 6, 1> bias_prior_residual(
    const ImuBias& bias, const ImuBias& prior_mean,
    const Eigen::Matrix<double, 6, 6>& sqrt_info);

/// Square root (upper Cholesky factor) of (covariance + 1e-12 I)^-1.
Matrix9d inertial_sqrt_information(const Matrix9d& covariance);

}  // namespace viinit

#endif  // VIINIT_FACTORS_HPP_
