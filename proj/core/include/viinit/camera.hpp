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
#ifndef VIINIT_CAMERA_HPP_
#define VIINIT_CAMERA_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "viinit/geometry.hpp"

namespace viinit {

/// Guard against projecting points at or behind the optical center.
inline constexpr double kDepthEpsilon = 1e-6;  // m
/// Minimum stereo disparity accepted for triangulation.
inline constexpr double kDisparityEpsilon = 1e-3;  // px

/// Conventional image-pyramid scale ratio; observation covariance at
/// level L is (kPyramidScale^L)^2 * I.
inline constexpr double kPyramidScale = 1.2;

/**
 * Rectified pinhole stereo model. Both eyes share the intrinsics and
 * image rows are aligned; the right eye is offset by `baseline_b` along
 * the camera x axis.
 */
struct CameraIntrinsics {
  double fx = 0, fy = 0;  ///< focal lengths, px
  double cx = 0, cy = 0;  ///< principal point, px
  double baseline_b = 0;  ///< stereo baseline, m
  int image_width = 0, image_height = 0;

  /// Throws a config error unless fx, fy, baseline and image dims are > 0.
  void validate() const;
};

struct Landmark {
  std::int64_t id = -1;
  Eigen::Vector3d position_world = Eigen::Vector3d::Zero();
};

enum class ObservationKind { kMono, kStereo };

/**
 * A 2D measurement of a landmark in one keyframe.
 * pixel = (u_L, v) for mono, (u_L, v, u_R) for stereo (u_R unused for mono).
 */
struct Observation {
  int keyframe_id = -1;          ///< index into the keyframe window
  std::int64_t landmark_id = -1;
  ObservationKind kind = ObservationKind::kMono;
  Eigen::Vector3d pixel = Eigen::Vector3d::Zero();
  int pyramid_level = 0;

  int dim() const { return kind == ObservationKind::kStereo ? 3 : 2; }
  /// Standard deviation of this observation given its pyramid level.
  double sigma() const { return std::pow(kPyramidScale, pyramid_level); }
};

/// A landmark with all of its observations across the window.
/// Invariants: >= 2 observations, at most one per keyframe.
struct Track {
  Landmark landmark;
  std::vector<Observation> observations;
};

/// Monocular projection: (fx X/Z + cx, fy Y/Z + cy).
/// Throws a data error ("behind camera") if Z <= kDepthEpsilon.
Eigen::Vector2d project_mono(const Eigen::Vector3d& point_cam,
                             const CameraIntrinsics& k);

/// Rectified stereo projection: mono plus the right-eye column
/// fx (X - b)/Z + cx. Throws like project_mono.
Eigen::Vector3d project_stereo(const Eigen::Vector3d& point_cam,
                               const CameraIntrinsics& k);

/// Exact inverse of project_stereo. Depth Z = fx b / (u_L - u_R).
/// Throws a data error if disparity <= kDisparityEpsilon.
Eigen::Vector3d triangulate_stereo(const Eigen::Vector3d& obs,
                                   const CameraIntrinsics& k);

/// R_cw * X + t_cw.
inline Eigen::Vector3d world_to_cam(const PoseSE3& pose_cw,
                                    const Eigen::Vector3d& point_world) {
  return pose_cw * point_world;
}

/// d(projection)/d(point_cam), 2x3 for mono.
Eigen::Matrix<double, 2, 3> project_mono_jacobian(
    const Eigen::Vector3d& point_cam, const CameraIntrinsics& k);

/// d(projection)/d(point_cam), 3x3 for stereo.
Eigen::Matrix3d project_stereo_jacobian(const Eigen::Vector3d& point_cam,
                                        const CameraIntrinsics& k);

}  // namespace viinit

#endif  // VIINIT_CAMERA_HPP_
