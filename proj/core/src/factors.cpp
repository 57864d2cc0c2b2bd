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
#include "viinit/factors.hpp"

#include <Eigen/Cholesky>

#include "viinit/error.hpp"

namespace viinit {

// ---------------------------------------------------------------------------
// ReprojectionFactorCam

ReprojectionFactorCam::ReprojectionFactorCam(int rot_cw_block, int t_cw_block,
                                             int landmark_block,
                                             const Observation& obs,
                                             const CameraIntrinsics& k)
    : blocks_{rot_cw_block, t_cw_block, landmark_block},
      obs_(obs),
      k_(k),
      inv_sigma_(1.0 / obs.sigma()) {
  set_robust_delta(obs.kind == ObservationKind::kStereo ? kHuberStereo
                                                        : kHuberMono);
}

bool ReprojectionFactorCam::evaluate(
    const LeastSquaresProblem& problem, Eigen::VectorXd* residual,
    std::vector<Eigen::MatrixXd>* jacobians) const {
  const Eigen::Matrix3d r_cw =
      Eigen::Map<const Eigen::Matrix3d>(problem.value(blocks_[0]).data());
  const Eigen::Vector3d t_cw = problem.vec3_value(blocks_[1]);
  const Eigen::Vector3d x = problem.vec3_value(blocks_[2]);

  const Eigen::Vector3d p = r_cw * x + t_cw;
  if (p.z() <= kDepthEpsilon) return false;

  const int d = dim();
  Eigen::MatrixXd j_p(d, 3);
  residual->resize(d);
  if (obs_.kind == ObservationKind::kStereo) {
    residual->head<3>() = obs_.pixel - project_stereo(p, k_);
    j_p = project_stereo_jacobian(p, k_);
  } else {
    residual->head<2>() = obs_.pixel.head<2>() - project_mono(p, k_);
    j_p = project_mono_jacobian(p, k_);
  }
  *residual *= inv_sigma_;

  if (jacobians) {
    jacobians->resize(3);
    (*jacobians)[0] = inv_sigma_ * j_p * r_cw * skew(x);
    (*jacobians)[1] = -inv_sigma_ * j_p;
    (*jacobians)[2] = -inv_sigma_ * j_p * r_cw;
  }
  return true;
}

// ---------------------------------------------------------------------------
// ReprojectionFactorBody

ReprojectionFactorBody::ReprojectionFactorBody(int R_wb_block, int p_wb_block,
                                               int landmark_block,
                                               const Observation& obs,
                                               const CameraIntrinsics& k,
                                               const PoseSE3& T_bc)
    : blocks_{R_wb_block, p_wb_block, landmark_block},
      obs_(obs),
      k_(k),
      R_cb_(T_bc.rotation.matrix().transpose()),
      t_cb_(-(T_bc.rotation.matrix().transpose() * T_bc.translation)),
      inv_sigma_(1.0 / obs.sigma()) {
  set_robust_delta(obs.kind == ObservationKind::kStereo ? kHuberStereo
                                                        : kHuberMono);
}

bool ReprojectionFactorBody::evaluate(
    const LeastSquaresProblem& problem, Eigen::VectorXd* residual,
    std::vector<Eigen::MatrixXd>* jacobians) const {
  const Eigen::Matrix3d r_wb =
      Eigen::Map<const Eigen::Matrix3d>(problem.value(blocks_[0]).data());
  const Eigen::Vector3d p_wb = problem.vec3_value(blocks_[1]);
  const Eigen::Vector3d x = problem.vec3_value(blocks_[2]);

  const Eigen::Vector3d u = r_wb.transpose() * (x - p_wb);
  const Eigen::Vector3d p = R_cb_ * u + t_cb_;
  if (p.z() <= kDepthEpsilon) return false;

  const int d = dim();
  Eigen::MatrixXd j_p(d, 3);
  residual->resize(d);
  if (obs_.kind == ObservationKind::kStereo) {
    residual->head<3>() = obs_.pixel - project_stereo(p, k_);
    j_p = project_stereo_jacobian(p, k_);
  } else {
    residual->head<2>() = obs_.pixel.head<2>() - project_mono(p, k_);
    j_p = project_mono_jacobian(p, k_);
  }
  *residual *= inv_sigma_;

  if (jacobians) {
    const Eigen::Matrix3d r_cw = R_cb_ * r_wb.transpose();
    jacobians->resize(3);
    (*jacobians)[0] = -inv_sigma_ * j_p * R_cb_ * skew(u);
    (*jacobians)[1] = inv_sigma_ * j_p * r_cw;
    (*jacobians)[2] = -inv_sigma_ * j_p * r_cw;
  }
  return true;
}

// ---------------------------------------------------------------------------
// InertialFactor

Matrix9d inertial_sqrt_information(const Matrix9d& covariance) {
  Matrix9d reg = covariance + 1e-12 * Matrix9d::Identity();
  Matrix9d info = reg.ldlt().solve(Matrix9d::Identity());
  info = 0.5 * (info + info.transpose()).eval();
  Eigen::LLT<Matrix9d> llt(info);
  if (llt.info() != Eigen::Success) {
    throw numerical_error("inertial information is not positive definite");
  }
  return llt.matrixL().transpose();
}

InertialFactor::InertialFactor(int R1, int p1, int v1, int R2, int p2, int v2,
                               int bg, int ba, int gravity_dir,
                               const PreintegratedImu& preint,
                               double gravity_mag)
    : blocks_{R1, p1, v1, R2, p2, v2, bg, ba, gravity_dir},
      preint_(&preint),
      gravity_mag_(gravity_mag),
      sqrt_info_(inertial_sqrt_information(preint.covariance())) {}

bool InertialFactor::evaluate(const LeastSquaresProblem& problem,
                              Eigen::VectorXd* residual,
                              std::vector<Eigen::MatrixXd>* jacobians) const {
  const Eigen::Matrix3d r1 =
      Eigen::Map<const Eigen::Matrix3d>(problem.value(blocks_[0]).data());
  const Eigen::Vector3d p1 = problem.vec3_value(blocks_[1]);
  const Eigen::Vector3d v1 = problem.vec3_value(blocks_[2]);
  const Eigen::Matrix3d r2 =
      Eigen::Map<const Eigen::Matrix3d>(problem.value(blocks_[3]).data());
  const Eigen::Vector3d p2 = problem.vec3_value(blocks_[4]);
  const Eigen::Vector3d v2 = problem.vec3_value(blocks_[5]);
  ImuBias bias;
  bias.gyro = problem.vec3_value(blocks_[6]);
  bias.accel = problem.vec3_value(blocks_[7]);
  const Eigen::Vector3d g_dir = problem.vec3_value(blocks_[8]);
  const Eigen::Vector3d gravity = gravity_mag_ * g_dir;

  const double dt = preint_->delta_t();
  const CorrectedDeltas deltas = correct_first_order(*preint_, bias);

  const Eigen::Matrix3d r1_t = r1.transpose();
  const Eigen::Matrix3d e_mat =
      deltas.delta_R.matrix().transpose() * r1_t * r2;
  Eigen::Matrix<double, 9, 1> e;
  e.segment<3>(0) = log_so3_matrix(e_mat);
  const Eigen::Vector3d dv_world = v2 - v1 - gravity * dt;
  const Eigen::Vector3d dp_world =
      p2 - p1 - v1 * dt - 0.5 * gravity * dt * dt;
  e.segment<3>(3) = r1_t * dv_world - deltas.delta_V;
  e.segment<3>(6) = r1_t * dp_world - deltas.delta_p;

  *residual = sqrt_info_ * e;

  if (jacobians) {
    const Eigen::Matrix3d jr_inv =
        right_jacobian_inverse_so3(e.segment<3>(0));
    const Eigen::Matrix3d j_rbg =
        preint_->jacobian_wrt_gyro_bias().block<3, 3>(0, 0);
    const Eigen::Vector3d dbg =
        bias.gyro - preint_->bias_linearization_point().gyro;
    const Eigen::Matrix<double, 3, 2> g_basis =
        unit_vector_tangent_basis(g_dir);
    const Eigen::Matrix<double, 3, 2> dg_dtheta =
        -gravity_mag_ * skew(g_dir) * g_basis;

    Eigen::Matrix<double, 9, 3> j;
    jacobians->resize(9);

    // R1
    j.setZero();
    j.block<3, 3>(0, 0) = -jr_inv * r2.transpose() * r1;
    j.block<3, 3>(3, 0) = skew(r1_t * dv_world);
    j.block<3, 3>(6, 0) = skew(r1_t * dp_world);
    (*jacobians)[0] = sqrt_info_ * j;
    // p1
    j.setZero();
    j.block<3, 3>(6, 0) = -r1_t;
    (*jacobians)[1] = sqrt_info_ * j;
    // v1
    j.setZero();
    j.block<3, 3>(3, 0) = -r1_t;
    j.block<3, 3>(6, 0) = -r1_t * dt;
    (*jacobians)[2] = sqrt_info_ * j;
    // R2
    j.setZero();
    j.block<3, 3>(0, 0) = jr_inv;
    (*jacobians)[3] = sqrt_info_ * j;
    // p2
    j.setZero();
    j.block<3, 3>(6, 0) = r1_t;
    (*jacobians)[4] = sqrt_info_ * j;
    // v2
    j.setZero();
    j.block<3, 3>(3, 0) = r1_t;
    (*jacobians)[5] = sqrt_info_ * j;
    // gyro bias
    j.setZero();
    j.block<3, 3>(0, 0) = -jr_inv * e_mat.transpose() *
                          right_jacobian_so3(j_rbg * dbg) * j_rbg;
    j.block<3, 3>(3, 0) =
        -preint_->jacobian_wrt_gyro_bias().block<3, 3>(3, 0);
    j.block<3, 3>(6, 0) =
        -preint_->jacobian_wrt_gyro_bias().block<3, 3>(6, 0);
    (*jacobians)[6] = sqrt_info_ * j;
    // accel bias
    j.setZero();
    j.block<3, 3>(3, 0) =
        -preint_->jacobian_wrt_accel_bias().block<3, 3>(3, 0);
    j.block<3, 3>(6, 0) =
        -preint_->jacobian_wrt_accel_bias().block<3, 3>(6, 0);
    (*jacobians)[7] = sqrt_info_ * j;
    // gravity direction (2-dof)
    Eigen::Matrix<double, 9, 2> jg;
    jg.setZero();
    jg.block<3, 2>(3, 0) = -r1_t * dt * dg_dtheta;
    jg.block<3, 2>(6, 0) = -0.5 * r1_t * dt * dt * dg_dtheta;
    (*jacobians)[8] = sqrt_info_ * jg;
  }
  return true;
}

// ---------------------------------------------------------------------------
// BiasPriorFactor

Eigen::Matrix<double, 6, 1> bias_prior_residual(
    const ImuBias& bias, const ImuBias& prior_mean,
    const Eigen::Matrix<double, 6, 6>& sqrt_info) {
  Eigen::Matrix<double, 6, 1> d;
  d.head<3>() = bias.gyro - prior_mean.gyro;
  d.tail<3>() = bias.accel - prior_mean.accel;
  return sqrt_info * d;
}

BiasPriorFactor::BiasPriorFactor(int bg_block, int ba_block,
                                 const ImuBias& mean,
                                 const Eigen::Matrix<double, 6, 6>& sqrt_info)
    : blocks_{bg_block, ba_block}, sqrt_info_(sqrt_info) {
  mean_.head<3>() = mean.gyro;
  mean_.tail<3>() = mean.accel;
}

bool BiasPriorFactor::evaluate(const LeastSquaresProblem& problem,
                               Eigen::VectorXd* residual,
                               std::vector<Eigen::MatrixXd>* jacobians) const {
  Eigen::Matrix<double, 6, 1> x;
  x.head<3>() = problem.vec3_value(blocks_[0]);
  x.tail<3>() = problem.vec3_value(blocks_[1]);
  *residual = sqrt_info_ * (x - mean_);
  if (jacobians) {
    jacobians->resize(2);
    (*jacobians)[0] = sqrt_info_.leftCols<3>();
    (*jacobians)[1] = sqrt_info_.rightCols<3>();
  }
  return true;
}

}  // namespace viinit
