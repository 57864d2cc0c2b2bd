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
#ifndef VIINIT_GEOMETRY_HPP_
#define VIINIT_GEOMETRY_HPP_

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

namespace viinit {

/// Hat operator: skew(v) * w == v x w.
Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/**
 * Rotation on SO(3), stored as an orthonormal 3x3 matrix with det +1.
 *
 * Values are immutable after construction and safe to share across threads.
 * Use from_matrix() to wrap externally produced matrices (validated to
 * 1e-6), exp() to build rotations from axis-angle vectors.
 */
class RotationSO3 {
 public:
  /// Identity rotation.
  RotationSO3() : matrix_(Eigen::Matrix3d::Identity()) {}

  /// Wraps a matrix, validating orthonormality and det within `tol`.
  /// Throws a config error if the matrix is not a rotation.
  static RotationSO3 from_matrix(const Eigen::Matrix3d& m, double tol = 1e-6);

  /// Exponential map (Rodrigues). Second-order Taylor branch below 1e-8 rad.
  /// Throws a config error on non-finite input.
  static RotationSO3 exp(const Eigen::Vector3d& omega);

  /// Wraps a unit quaternion (normalized internally).
  static RotationSO3 from_quaternion(const Eigen::Quaterniond& q);

  /**
   * Logarithm map: minimal axis-angle vector with norm <= pi.
   *
   * Near angle pi the axis is recovered from the largest diagonal element
   * of R + I; when the angle is pi to machine precision the sign of the
   * axis is fixed so that its largest-magnitude component is positive.
   */
  Eigen::Vector3d log() const;

  RotationSO3 inverse() const { return RotationSO3(matrix_.transpose()); }

  RotationSO3 operator*(const RotationSO3& rhs) const {
    return RotationSO3(matrix_ * rhs.matrix_);
  }
  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const {
    return matrix_ * v;
  }

  const Eigen::Matrix3d& matrix() const { return matrix_; }
  Eigen::Quaterniond quaternion() const {
    return Eigen::Quaterniond(matrix_);
  }

  /// Projects back onto SO(3) via SVD. Counters drift in long
  /// multiplication chains.
  RotationSO3 normalized() const;

  bool is_valid(double tol = 1e-9) const;

 private:
  explicit RotationSO3(const Eigen::Matrix3d& m) : matrix_(m) {}
  Eigen::Matrix3d matrix_;
};

/// so3_exp/so3_log free-function spellings.
inline RotationSO3 so3_exp(const Eigen::Vector3d& omega) {
  return RotationSO3::exp(omega);
}
inline Eigen::Vector3d so3_log(const RotationSO3& r) { return r.log(); }

/// Logarithm map on a raw matrix; validates orthonormality to 1e-6.
Eigen::Vector3d log_so3_matrix(const Eigen::Matrix3d& m);

/**
 * Right Jacobian of SO(3): exp(omega + d) ~= exp(omega) * exp(Jr(omega) d)
 * to first order in d. Taylor branch below 1e-8 rad.
 */
Eigen::Matrix3d right_jacobian_so3(const Eigen::Vector3d& omega);

/// Inverse of the right Jacobian (closed form, Taylor branch near zero).
Eigen::Matrix3d right_jacobian_inverse_so3(const Eigen::Vector3d& omega);

/**
 * Rigid-body pose: p_out = R * p_in + t.
 *
 * The frame convention is carried by the variable name at the use site
 * (e.g. pose_cw maps world points into the camera frame).
 */
struct PoseSE3 {
  RotationSO3 rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  PoseSE3() = default;
  PoseSE3(const RotationSO3& r, const Eigen::Vector3d& t)
      : rotation(r), translation(t) {}

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  PoseSE3 operator*(const PoseSE3& rhs) const {
    return PoseSE3(rotation * rhs.rotation,
                   rotation * rhs.translation + translation);
  }

  PoseSE3 inverse() const {
    RotationSO3 rinv = rotation.inverse();
    return PoseSE3(rinv, -(rinv * translation));
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation.matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  static PoseSE3 from_matrix(const Eigen::Matrix4d& m, double tol = 1e-6) {
    return PoseSE3(RotationSO3::from_matrix(m.topLeftCorner<3, 3>(), tol),
                   m.topRightCorner<3, 1>());
  }
};

/**
 * Closed-form rigid alignment (rotation + translation, no scale):
 * minimizes sum_i || to[i] - (R * from[i] + t) ||^2.
 * Requires at least 3 non-degenerate correspondences.
 */
PoseSE3 rigid_align(const std::vector<Eigen::Vector3d>& from,
                    const std::vector<Eigen::Vector3d>& to);

/// Best-fit rotation between two rotation sequences under the chordal
/// metric: maximizes sum_i tr(a[i]^T * R * b[i]).
RotationSO3 chordal_align(const std::vector<RotationSO3>& a,
                          const std::vector<RotationSO3>& b);

}  // namespace viinit

#endif  // VIINIT_GEOMETRY_HPP_
