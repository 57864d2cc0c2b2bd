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
#include "viinit/camera.hpp"

#include "viinit/error.hpp"

namespace viinit {

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) {
    throw config_error("camera intrinsics: focal lengths must be positive");
  }
  if (!(baseline_b > 0)) {
    throw config_error("camera intrinsics: stereo baseline must be positive");
  }
  if (image_width <= 0 || image_height <= 0) {
    throw config_error("camera intrinsics: image dimensions must be positive");
  }
}

Eigen::Vector2d project_mono(const Eigen::Vector3d& p,
                             const CameraIntrinsics& k) {
  if (p.z() <= kDepthEpsilon) {
    throw data_error("project_mono: point behind camera");
  }
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

Eigen::Vector3d project_stereo(const Eigen::Vector3d& p,
                               const CameraIntrinsics& k) {
  if (p.z() <= kDepthEpsilon) {
    throw data_error("project_stereo: point behind camera");
  }
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy,
          k.fx * (p.x() - k.baseline_b) / p.z() + k.cx};
}

Eigen::Vector3d triangulate_stereo(const Eigen::Vector3d& obs,
                                   const CameraIntrinsics& k) {
  const double disparity = obs.x() - obs.z();  // u_L - u_R
  if (disparity <= kDisparityEpsilon) {
    throw data_error("triangulate_stereo: degenerate disparity");
  }
  const double z = k.fx * k.baseline_b / disparity;
  return {(obs.x() - k.cx) * z / k.fx, (obs.y() - k.cy) * z / k.fy, z};
}

Eigen::Matrix<double, 2, 3> project_mono_jacobian(const Eigen::Vector3d& p,
                                                  const CameraIntrinsics& k) {
  const double iz = 1.0 / p.z();
  const double iz2 = iz * iz;
  Eigen::Matrix<double, 2, 3> j;
  // clang-format off
  j << k.fx * iz, 0,         -k.fx * p.x() * iz2,
       0,         k.fy * iz, -k.fy * p.y() * iz2;
  // clang-format on
  return j;
}

Eigen::Matrix3d project_stereo_jacobian(const Eigen::Vector3d& p,
                                        const CameraIntrinsics& k) {
  const double iz = 1.0 / p.z();
  const double iz2 = iz * iz;
  Eigen::Matrix3d j;
  // clang-format off
  j << k.fx * iz, 0,         -k.fx * p.x() * iz2,
       0,         k.fy * iz, -k.fy * p.y() * iz2,
       k.fx * iz, 0,         -k.fx * (p.x() - k.baseline_b) * iz2;
  // clang-format on
  return j;
}

}  // namespace viinit
