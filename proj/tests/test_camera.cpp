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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"
#include "viinit/camera.hpp"
#include "viinit/error.hpp"

using namespace viinit;
using viinit::testing::random_rotation;
using viinit::testing::random_vector;

namespace {
CameraIntrinsics test_intrinsics() {
  CameraIntrinsics k;
  k.fx = 458.654;
  k.fy = 457.296;
  k.cx = 367.215;
  k.cy = 248.375;
  k.baseline_b = 0.11;
  k.image_width = 752;
  k.image_height = 480;
  return k;
}
}  // namespace

TEST_CASE("optical axis projects to the principal point") {
  const CameraIntrinsics k = test_intrinsics();
  for (double z : {0.3, 1.0, 25.0}) {
    const Eigen::Vector2d px = project_mono({0, 0, z}, k);
    CHECK(px.x() == doctest::Approx(k.cx));
    CHECK(px.y() == doctest::Approx(k.cy));
  }
}

TEST_CASE("mono projection hand-evaluated example") {
  CameraIntrinsics k;
  k.fx = k.fy = 100;
  k.cx = k.cy = 50;
  k.baseline_b = 0.1;
  k.image_width = k.image_height = 100;
  const Eigen::Vector2d px = project_mono({1, 2, 10}, k);
  CHECK(px.x() == doctest::Approx(60.0));
  CHECK(px.y() == doctest::Approx(70.0));
}

TEST_CASE("projection rejects points at or behind the camera") {
  const CameraIntrinsics k = test_intrinsics();
  CHECK_THROWS_AS(project_mono({0, 0, 0}, k), Error);
  CHECK_THROWS_AS(project_mono({1, 1, -2}, k), Error);
  CHECK_THROWS_AS(project_stereo({0, 0, 0}, k), Error);
}

TEST_CASE("stereo projection on the optical axis") {
  const CameraIntrinsics k = test_intrinsics();
  const double z = 4.0;
  const Eigen::Vector3d px = project_stereo({0, 0, z}, k);
  CHECK(px.x() == doctest::Approx(k.cx));
  CHECK(px.y() == doctest::Approx(k.cy));
  CHECK(px.z() == doctest::Approx(k.cx - k.fx * k.baseline_b / z));
}

TEST_CASE("stereo disparity identity and mono consistency") {
  const CameraIntrinsics k = test_intrinsics();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> depth(0.5, 50.0);
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d p = random_vector(rng, 5.0);
    p.z() = depth(rng);
    const Eigen::Vector3d s = project_stereo(p, k);
    const Eigen::Vector2d m = project_mono(p, k);
    CHECK(s.x() == doctest::Approx(m.x()).epsilon(1e-12));
    CHECK(s.y() == doctest::Approx(m.y()).epsilon(1e-12));
    CHECK(s.x() - s.z() ==
          doctest::Approx(k.fx * k.baseline_b / p.z()).epsilon(1e-12));
  }
}

TEST_CASE("stereo triangulation round trip") {
  const CameraIntrinsics k = test_intrinsics();
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> depth(0.5, 50.0);
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d p = random_vector(rng, 5.0);
    p.z() = depth(rng);
    const Eigen::Vector3d back = triangulate_stereo(project_stereo(p, k), k);
    CHECK((back - p).norm() < 1e-9);
    CHECK((project_stereo(back, k) - project_stereo(p, k)).norm() < 1e-9);
  }
}

TEST_CASE("triangulation inverse of the optical-axis case") {
  const CameraIntrinsics k = test_intrinsics();
  const double z0 = 7.5;
  const Eigen::Vector3d obs(k.cx, k.cy, k.cx - k.fx * k.baseline_b / z0);
  const Eigen::Vector3d p = triangulate_stereo(obs, k);
  CHECK(p.x() == doctest::Approx(0.0));
  CHECK(p.y() == doctest::Approx(0.0));
  CHECK(p.z() == doctest::Approx(z0));
}

TEST_CASE("zero disparity is rejected") {
  const CameraIntrinsics k = test_intrinsics();
  CHECK_THROWS_AS(triangulate_stereo({100.0, 50.0, 100.0}, k), Error);
}

TEST_CASE("world_to_cam trivial and round-trip cases") {
  std::mt19937_64 rng(23);
  const Eigen::Vector3d p = random_vector(rng, 10.0);
  CHECK((world_to_cam(PoseSE3(), p) - p).norm() == doctest::Approx(0.0));

  PoseSE3 shift;
  shift.translation = Eigen::Vector3d(1, -2, 3);
  CHECK((world_to_cam(shift, p) - (p + shift.translation)).norm() ==
        doctest::Approx(0.0));

  for (int i = 0; i < 100; ++i) {
    const PoseSE3 t(random_rotation(rng), random_vector(rng, 5.0));
    const Eigen::Vector3d q = random_vector(rng, 10.0);
    CHECK((world_to_cam(t.inverse(), world_to_cam(t, q)) - q).norm() < 1e-12);
  }
}

TEST_CASE("projection jacobians match finite differences") {
  const CameraIntrinsics k = test_intrinsics();
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> depth(0.5, 30.0);
  const double h = 1e-7;
  for (int i = 0; i < 100; ++i) {
    Eigen::Vector3d p = random_vector(rng, 3.0);
    p.z() = depth(rng);
    const Eigen::Matrix3d j = project_stereo_jacobian(p, k);
    for (int c = 0; c < 3; ++c) {
      Eigen::Vector3d dp = Eigen::Vector3d::Zero();
      dp[c] = h;
      const Eigen::Vector3d fd =
          (project_stereo(p + dp, k) - project_stereo(p - dp, k)) / (2 * h);
      CHECK((fd - j.col(c)).cwiseAbs().maxCoeff() <
            1e-4 * std::max(1.0, j.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("intrinsics validation") {
  CameraIntrinsics k = test_intrinsics();
  CHECK_NOTHROW(k.validate());
  k.baseline_b = 0;
  CHECK_THROWS_AS(k.validate(), Error);
}
