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
#include "viinit/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "viinit/error.hpp"

namespace viinit {

namespace {
constexpr double kTaylorThreshold = 1e-8;  // rad
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  // clang-format off
  m <<     0, -v.z(),  v.y(),
       v.z(),      0, -v.x(),
      -v.y(),  v.x(),      0;
  // clang-format on
  return m;
}

RotationSO3 RotationSO3::from_matrix(const Eigen::Matrix3d& m, double tol) {
  if (!m.allFinite()) {
    throw config_error("rotation matrix has non-finite entries");
  }
  const double ortho_err =
      (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > tol || std::abs(m.determinant() - 1.0) > tol) {
    throw config_error("matrix is not a rotation (orthonormality error " +
                       std::to_string(ortho_err) + ")");
  }
  return RotationSO3(m);
}

RotationSO3 RotationSO3::exp(const Eigen::Vector3d& omega) {
  if (!omega.allFinite()) {
    throw config_error("so3_exp: non-finite input");
  }
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d w = skew(omega);
  Eigen::Matrix3d m;
  if (theta < kTaylorThreshold) {
    // I + W + W^2/2, exact to second order.
    m = Eigen::Matrix3d::Identity() + w + 0.5 * w * w;
  } else {
    m = Eigen::Matrix3d::Identity() + (std::sin(theta) / theta) * w +
        ((1.0 - std::cos(theta)) / theta2) * w * w;
  }
  return RotationSO3(m);
}

RotationSO3 RotationSO3::from_quaternion(const Eigen::Quaterniond& q) {
  return RotationSO3(q.normalized().toRotationMatrix());
}

Eigen::Vector3d RotationSO3::log() const { return log_so3_matrix(matrix_); }

Eigen::Vector3d log_so3_matrix(const Eigen::Matrix3d& m) {
  const double ortho_err =
      (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-6) {
    throw config_error("so3_log: input is not orthonormal");
  }

  const double cos_theta =
      std::clamp(0.5 * (m.trace() - 1.0), -1.0, 1.0);
  const Eigen::Vector3d antisym(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0),
                                m(1, 0) - m(0, 1));  // 2 sin(theta) * axis
  const double sin_theta = std::min(0.5 * antisym.norm(), 1.0);
  // atan2 keeps the angle accurate at both ends of [0, pi].
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < 1e-6) {
    // log(R) ~= vee(R - R^T)/2 * (1 + theta^2/6)
    return 0.5 * antisym * (1.0 + theta * theta / 6.0);
  }

  if (theta > M_PI - 1e-3) {
    // Axis from the largest diagonal of R + I = 2(cos I + (1-cos) aa^T + ...).
    int k;
    (m.diagonal() + Eigen::Vector3d::Ones()).maxCoeff(&k);
    const double one_minus_cos = 1.0 - cos_theta;
    Eigen::Vector3d axis;
    axis[k] = std::sqrt(std::max(0.0, (m(k, k) - cos_theta) / one_minus_cos));
    for (int j = 0; j < 3; ++j) {
      if (j != k) axis[j] = (m(j, k) + m(k, j)) / (2.0 * axis[k] * one_minus_cos);
    }
    axis.normalize();
    if (antisym.norm() > 1e-12) {
      // Angle strictly below pi: sign fixed by the antisymmetric part.
      if (antisym.dot(axis) < 0) axis = -axis;
    } else {
      // Angle pi: sign convention, largest-magnitude component positive.
      int imax;
      axis.cwiseAbs().maxCoeff(&imax);
      if (axis[imax] < 0) axis = -axis;
    }
    return theta * axis;
  }

  return (theta / (2.0 * sin_theta)) * antisym;
}

RotationSO3 RotationSO3::normalized() const {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      matrix_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return RotationSO3(r);
}

bool RotationSO3::is_valid(double tol) const {
  return (matrix_.transpose() * matrix_ - Eigen::Matrix3d::Identity())
                 .cwiseAbs()
                 .maxCoeff() <= tol &&
         std::abs(matrix_.determinant() - 1.0) <= tol;
}

Eigen::Matrix3d right_jacobian_so3(const Eigen::Vector3d& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d w = skew(omega);
  if (theta < kTaylorThreshold) {
    return Eigen::Matrix3d::Identity() - 0.5 * w + (1.0 / 6.0) * w * w;
  }
  const double theta3 = theta2 * theta;
  return Eigen::Matrix3d::Identity() -
         ((1.0 - std::cos(theta)) / theta2) * w +
         ((theta - std::sin(theta)) / theta3) * w * w;
}

Eigen::Matrix3d right_jacobian_inverse_so3(const Eigen::Vector3d& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d w = skew(omega);
  if (theta < kTaylorThreshold) {
    return Eigen::Matrix3d::Identity() + 0.5 * w + (1.0 / 12.0) * w * w;
  }
  const double coeff =
      1.0 / theta2 -
      (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() + 0.5 * w + coeff * w * w;
}

namespace {

// Projection of M onto SO(3): argmax_R tr(R^T M).
Eigen::Matrix3d project_to_so3(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) {
    d(2, 2) = -1.0;
  }
  return svd.matrixU() * d * svd.matrixV().transpose();
}

}  // namespace

PoseSE3 rigid_align(const std::vector<Eigen::Vector3d>& from,
                    const std::vector<Eigen::Vector3d>& to) {
  if (from.size() != to.size() || from.size() < 3) {
    throw data_error("rigid_align: need >= 3 correspondences");
  }
  const auto n = static_cast<double>(from.size());
  Eigen::Vector3d c_from = Eigen::Vector3d::Zero();
  Eigen::Vector3d c_to = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < from.size(); ++i) {
    c_from += from[i];
    c_to += to[i];
  }
  c_from /= n;
  c_to /= n;
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < from.size(); ++i) {
    h += (to[i] - c_to) * (from[i] - c_from).transpose();
  }
  const Eigen::Matrix3d r = project_to_so3(h);
  PoseSE3 out;
  out.rotation = RotationSO3::from_matrix(r, 1e-6);
  out.translation = c_to - r * c_from;
  return out;
}

RotationSO3 chordal_align(const std::vector<RotationSO3>& a,
                          const std::vector<RotationSO3>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw data_error("chordal_align: size mismatch or empty input");
  }
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < a.size(); ++i) {
    h += a[i].matrix() * b[i].matrix().transpose();
  }
  return RotationSO3::from_matrix(project_to_so3(h), 1e-6);
}

}  // namespace viinit
