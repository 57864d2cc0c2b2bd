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

#include <Eigen/Eigenvalues>

#include "test_util.hpp"
#include "viinit/error.hpp"
#include "viinit/imu.hpp"

using namespace viinit;
using viinit::testing::random_rotation;
using viinit::testing::random_unit_vector;
using viinit::testing::random_vector;

namespace {

ImuNoiseSpec euroc_like_noise() {
  ImuNoiseSpec n;
  n.gyro_noise_density = 1.7e-4;
  n.accel_noise_density = 2.0e-3;
  n.gyro_bias_walk = 1.9e-5;
  n.accel_bias_walk = 3.0e-3;
  return n;
}

// A smooth wiggly measurement profile for oracle integrations.
ImuMeasurement profile(double t) {
  ImuMeasurement m;
  m.timestamp = t;
  m.gyro = {0.3 * std::sin(2.0 * t), -0.2 * std::cos(3.0 * t), 0.25};
  m.accel = {1.5 * std::cos(t), 9.81 + 0.5 * std::sin(2.5 * t), -0.8};
  return m;
}

PreintegratedImu integrate_profile(double t0, double t1, double dt,
                                   const ImuBias& bias,
                                   const ImuNoiseSpec& noise,
                                   std::mt19937_64* noise_rng = nullptr) {
  PreintegratedImu p(bias);
  const int n = static_cast<int>(std::round((t1 - t0) / dt));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    ImuMeasurement m = profile(t0 + i * dt);
    if (noise_rng) {
      const double sg = noise.gyro_noise_density / std::sqrt(dt);
      const double sa = noise.accel_noise_density / std::sqrt(dt);
      for (int a = 0; a < 3; ++a) {
        m.gyro[a] += sg * gauss(*noise_rng);
        m.accel[a] += sa * gauss(*noise_rng);
      }
    }
    p.integrate(m, dt, noise);
  }
  return p;
}

}  // namespace

TEST_CASE("zero measurements leave the identity deltas") {
  PreintegratedImu p;
  CHECK((p.delta_R().matrix() - Eigen::Matrix3d::Identity()).norm() == 0.0);
  CHECK(p.delta_V().norm() == 0.0);
  CHECK(p.delta_p().norm() == 0.0);
  CHECK(p.delta_t() == 0.0);
  CHECK(p.covariance().norm() == 0.0);
}

TEST_CASE("stationary zero-bias input keeps deltas at identity") {
  PreintegratedImu p;
  const ImuNoiseSpec noise = euroc_like_noise();
  for (int i = 0; i < 200; ++i) {
    ImuMeasurement m;
    m.timestamp = i * 0.005;
    p.integrate(m, 0.005, noise);
  }
  CHECK((p.delta_R().matrix() - Eigen::Matrix3d::Identity()).norm() < 1e-15);
  CHECK(p.delta_V().norm() == 0.0);
  CHECK(p.delta_p().norm() == 0.0);
  CHECK(p.delta_t() == doctest::Approx(1.0));
}

TEST_CASE("constant gyro matches the analytic rotation") {
  const double w = 0.7, T = 1.0, dt = 1e-4;
  PreintegratedImu p;
  const ImuNoiseSpec noise = euroc_like_noise();
  const int n = static_cast<int>(std::round(T / dt));
  for (int i = 0; i < n; ++i) {
    ImuMeasurement m;
    m.timestamp = i * dt;
    m.gyro = {0, 0, w};
    p.integrate(m, dt, noise);
  }
  const Eigen::Matrix3d expected =
      RotationSO3::exp({0, 0, w * T}).matrix();
  CHECK((p.delta_R().matrix() - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("constant accel matches the kinematic closed form") {
  const double T = 2.0, dt = 1e-3;
  PreintegratedImu p;
  const ImuNoiseSpec noise = euroc_like_noise();
  const int n = static_cast<int>(std::round(T / dt));
  for (int i = 0; i < n; ++i) {
    ImuMeasurement m;
    m.timestamp = i * dt;
    m.accel = {1.0, 0, 0};
    p.integrate(m, dt, noise);
  }
  CHECK((p.delta_V() - Eigen::Vector3d(T, 0, 0)).norm() < 1e-9);
  CHECK((p.delta_p() - Eigen::Vector3d(T * T / 2, 0, 0)).norm() < 1e-9);
}

TEST_CASE("integrate rejects bad dt and non-monotone timestamps") {
  PreintegratedImu p;
  const ImuNoiseSpec noise = euroc_like_noise();
  ImuMeasurement m;
  m.timestamp = 0.0;
  CHECK_THROWS_AS(p.integrate(m, 0.0, noise), Error);
  CHECK_THROWS_AS(p.integrate(m, -0.01, noise), Error);
  p.integrate(m, 0.005, noise);
  m.timestamp = -1.0;
  CHECK_THROWS_AS(p.integrate(m, 0.005, noise), Error);
}

TEST_CASE("covariance stays symmetric PSD through integration") {
  std::mt19937_64 rng(31);
  ImuBias bias;
  bias.gyro = random_vector(rng, 0.02);
  bias.accel = random_vector(rng, 0.1);
  PreintegratedImu p(bias);
  const ImuNoiseSpec noise = euroc_like_noise();
  for (int i = 0; i < 300; ++i) {
    ImuMeasurement m = profile(i * 0.005);
    p.integrate(m, 0.005, noise);
    const Matrix9d& c = p.covariance();
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix9d> es(c);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("monte-carlo covariance consistency") {
  const ImuNoiseSpec noise = euroc_like_noise();
  const double dt = 0.005, t1 = 1.0;
  const PreintegratedImu clean = integrate_profile(0.0, t1, dt, {}, noise);

  std::mt19937_64 rng(32);
  const int trials = 500;
  std::vector<Vector9d> errors;
  errors.reserve(trials);
  Vector9d mean = Vector9d::Zero();
  for (int t = 0; t < trials; ++t) {
    const PreintegratedImu noisy =
        integrate_profile(0.0, t1, dt, {}, noise, &rng);
    Vector9d e;
    e.segment<3>(0) =
        (clean.delta_R().inverse() * noisy.delta_R()).log();
    e.segment<3>(3) = noisy.delta_V() - clean.delta_V();
    e.segment<3>(6) = noisy.delta_p() - clean.delta_p();
    errors.push_back(e);
    mean += e;
  }
  mean /= trials;
  Matrix9d sample = Matrix9d::Zero();
  for (const Vector9d& e : errors) {
    sample += (e - mean) * (e - mean).transpose();
  }
  sample /= (trials - 1);

  for (int i = 0; i < 9; ++i) {
    const double ratio = sample(i, i) / clean.covariance()(i, i);
    INFO("diagonal ", i, " ratio ", ratio);
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
  }
}

TEST_CASE("analytic bias jacobians match re-integration finite differences") {
  const ImuNoiseSpec noise = euroc_like_noise();
  const double dt = 0.005, t1 = 0.8, h = 1e-6;
  ImuBias bias;
  bias.gyro = {0.01, -0.02, 0.015};
  bias.accel = {0.05, 0.1, -0.08};
  const PreintegratedImu base = integrate_profile(0.0, t1, dt, bias, noise);

  Matrix9x3d fd_bg = Matrix9x3d::Zero();
  Matrix9x3d fd_ba = Matrix9x3d::Zero();
  for (int c = 0; c < 3; ++c) {
    for (int sign : {-1, 1}) {
      ImuBias bg = bias, ba = bias;
      bg.gyro[c] += sign * h;
      ba.accel[c] += sign * h;
      const PreintegratedImu pg = integrate_profile(0.0, t1, dt, bg, noise);
      const PreintegratedImu pa = integrate_profile(0.0, t1, dt, ba, noise);
      const double s = sign / (2.0 * h);
      fd_bg.block<3, 1>(0, c) +=
          s * (base.delta_R().inverse() * pg.delta_R()).log();
      fd_bg.block<3, 1>(3, c) += s * (pg.delta_V() - base.delta_V());
      fd_bg.block<3, 1>(6, c) += s * (pg.delta_p() - base.delta_p());
      fd_ba.block<3, 1>(0, c) +=
          s * (base.delta_R().inverse() * pa.delta_R()).log();
      fd_ba.block<3, 1>(3, c) += s * (pa.delta_V() - base.delta_V());
      fd_ba.block<3, 1>(6, c) += s * (pa.delta_p() - base.delta_p());
    }
  }
  const double scale_bg =
      std::max(1.0, base.jacobian_wrt_gyro_bias().cwiseAbs().maxCoeff());
  const double scale_ba =
      std::max(1.0, base.jacobian_wrt_accel_bias().cwiseAbs().maxCoeff());
  CHECK((fd_bg - base.jacobian_wrt_gyro_bias()).cwiseAbs().maxCoeff() /
            scale_bg <
        1e-5);
  CHECK((fd_ba - base.jacobian_wrt_accel_bias()).cwiseAbs().maxCoeff() /
            scale_ba <
        1e-5);
}

TEST_CASE("concatenation equals predict composition on noise-free data") {
  const ImuNoiseSpec noise = euroc_like_noise();
  const double dt = 0.005, T = 1.0;
  const PreintegratedImu full = integrate_profile(0.0, T, dt, {}, noise);
  const PreintegratedImu first = integrate_profile(0.0, T / 2, dt, {}, noise);
  const PreintegratedImu second = integrate_profile(T / 2, T, dt, {}, noise);

  std::mt19937_64 rng(33);
  KeyframeState s0;
  s0.R_wb = random_rotation(rng);
  s0.p_wb = random_vector(rng, 2.0);
  s0.v_w = random_vector(rng, 1.0);
  s0.timestamp = 0.0;
  const Eigen::Vector3d g(0, 0, -9.81);

  const KeyframeState via_full = predict(s0, full, g);
  const KeyframeState via_halves = predict(predict(s0, first, g), second, g);
  CHECK((via_full.R_wb.matrix() - via_halves.R_wb.matrix())
            .cwiseAbs()
            .maxCoeff() < 1e-9);
  CHECK((via_full.p_wb - via_halves.p_wb).norm() < 1e-9);
  CHECK((via_full.v_w - via_halves.v_w).norm() < 1e-9);
}

TEST_CASE("correct_first_order at the linearization point is a no-op") {
  const ImuNoiseSpec noise = euroc_like_noise();
  ImuBias bias;
  bias.gyro = {0.02, -0.01, 0.03};
  const PreintegratedImu p = integrate_profile(0.0, 0.5, 0.005, bias, noise);
  const CorrectedDeltas d = correct_first_order(p, bias);
  CHECK((d.delta_R.matrix() - p.delta_R().matrix()).norm() == 0.0);
  CHECK((d.delta_V - p.delta_V()).norm() == 0.0);
  CHECK((d.delta_p - p.delta_p()).norm() == 0.0);
  CHECK_FALSE(d.bias_step_large);
}

TEST_CASE("small gyro-bias correction matches full re-integration") {
  const ImuNoiseSpec noise = euroc_like_noise();
  ImuBias bias;
  const double h = 1e-4;
  const PreintegratedImu base = integrate_profile(0.0, 1.0, 0.005, bias, noise);
  ImuBias shifted = bias;
  shifted.gyro += Eigen::Vector3d(h, -h, 0.5 * h);
  const PreintegratedImu exact =
      integrate_profile(0.0, 1.0, 0.005, shifted, noise);
  const CorrectedDeltas corr = correct_first_order(base, shifted);
  CHECK((corr.delta_R.matrix() - exact.delta_R().matrix())
            .cwiseAbs()
            .maxCoeff() < 1e-7);
  CHECK((corr.delta_V - exact.delta_V()).norm() < 1e-6);
  CHECK((corr.delta_p - exact.delta_p()).norm() < 1e-6);
}

TEST_CASE("accel-bias-only correction leaves rotation untouched") {
  const ImuNoiseSpec noise = euroc_like_noise();
  const PreintegratedImu p = integrate_profile(0.0, 0.5, 0.005, {}, noise);
  ImuBias shifted;
  shifted.accel = {0.05, -0.02, 0.01};
  const CorrectedDeltas d = correct_first_order(p, shifted);
  CHECK((d.delta_R.matrix() - p.delta_R().matrix()).norm() == 0.0);
  CHECK((d.delta_V - p.delta_V()).norm() > 0.0);
}

TEST_CASE("large bias step sets the warning flag") {
  const ImuNoiseSpec noise = euroc_like_noise();
  const PreintegratedImu p = integrate_profile(0.0, 0.5, 0.005, {}, noise);
  ImuBias big;
  big.gyro = {0.2, 0, 0};
  CHECK(correct_first_order(p, big).bias_step_large);
}

TEST_CASE("inertial residual vanishes at the predicted state") {
  const ImuNoiseSpec noise = euroc_like_noise();
  std::mt19937_64 rng(34);
  for (int i = 0; i < 20; ++i) {
    const PreintegratedImu p = integrate_profile(0.0, 0.6, 0.005, {}, noise);
    KeyframeState s0;
    s0.R_wb = random_rotation(rng);
    s0.p_wb = random_vector(rng, 3.0);
    s0.v_w = random_vector(rng, 2.0);
    s0.timestamp = 10.0;
    const Eigen::Vector3d g = 9.81 * random_unit_vector(rng);
    const KeyframeState s1 = predict(s0, p, g);
    CHECK(inertial_residual(p, s0, s1, g).norm() < 1e-10);
  }
}

TEST_CASE("residual velocity row is exactly linear in v_next") {
  const ImuNoiseSpec noise = euroc_like_noise();
  std::mt19937_64 rng(35);
  const PreintegratedImu p = integrate_profile(0.0, 0.6, 0.005, {}, noise);
  KeyframeState s0;
  s0.R_wb = random_rotation(rng);
  s0.timestamp = 0.0;
  const Eigen::Vector3d g(0, 0, -9.81);
  KeyframeState s1 = predict(s0, p, g);
  const Vector9d r0 = inertial_residual(p, s0, s1, g);
  const Eigen::Vector3d delta = random_vector(rng, 0.5);
  s1.v_w += delta;
  const Vector9d r1 = inertial_residual(p, s0, s1, g);
  const Eigen::Vector3d expected = s0.R_wb.matrix().transpose() * delta;
  CHECK(((r1 - r0).segment<3>(3) - expected).norm() < 1e-12);
  CHECK((r1 - r0).segment<3>(0).norm() == 0.0);
  CHECK((r1 - r0).segment<3>(6).norm() == 0.0);
}

TEST_CASE("rotation row perturbation is first-order in epsilon") {
  const ImuNoiseSpec noise = euroc_like_noise();
  std::mt19937_64 rng(36);
  const PreintegratedImu p = integrate_profile(0.0, 0.6, 0.005, {}, noise);
  KeyframeState s0;
  s0.R_wb = random_rotation(rng);
  s0.timestamp = 0.0;
  const Eigen::Vector3d g(0, 0, -9.81);
  const KeyframeState s1 = predict(s0, p, g);
  for (double eps : {1e-3, 1e-4, 1e-5}) {
    const Eigen::Vector3d step = eps * random_unit_vector(rng);
    KeyframeState s1p = s1;
    s1p.R_wb = s1.R_wb * RotationSO3::exp(step);
    const Vector9d r = inertial_residual(p, s0, s1p, g);
    CHECK((r.segment<3>(0) - step).norm() < 10.0 * eps * eps);
  }
}

TEST_CASE("residual rejects inconsistent keyframe intervals") {
  const ImuNoiseSpec noise = euroc_like_noise();
  const PreintegratedImu p = integrate_profile(0.0, 0.6, 0.005, {}, noise);
  KeyframeState s0, s1;
  s0.timestamp = 0.0;
  s1.timestamp = 0.8;  // preint covers 0.6 s
  CHECK_THROWS_AS(inertial_residual(p, s0, s1, {0, 0, -9.81}), Error);
}

TEST_CASE("predict round trips and trivial cases") {
  PreintegratedImu zero;
  KeyframeState s;
  s.p_wb = {1, 2, 3};
  const KeyframeState same = predict(s, zero, Eigen::Vector3d::Zero());
  CHECK((same.p_wb - s.p_wb).norm() == 0.0);
  CHECK((same.v_w - s.v_w).norm() == 0.0);

  // Free fall: zero measurements, gravity only.
  const ImuNoiseSpec noise = euroc_like_noise();
  PreintegratedImu coast;
  for (int i = 0; i < 100; ++i) {
    ImuMeasurement m;
    m.timestamp = i * 0.01;
    coast.integrate(m, 0.01, noise);
  }
  const Eigen::Vector3d g(0, 0, -9.81);
  KeyframeState s0;
  s0.v_w = {0.5, 0, 1.0};
  const KeyframeState s1 = predict(s0, coast, g);
  const double dt = coast.delta_t();
  CHECK((s1.p_wb - (s0.p_wb + s0.v_w * dt + 0.5 * g * dt * dt)).norm() <
        1e-12);
  CHECK((s1.v_w - (s0.v_w + g * dt)).norm() < 1e-12);
}

TEST_CASE("preintegrate_between splits boundaries consistently") {
  const ImuNoiseSpec noise = euroc_like_noise();
  std::vector<ImuMeasurement> stream;
  for (int i = 0; i <= 100; ++i) {
    stream.push_back(profile(i * 0.01));
  }
  const PreintegratedImu full =
      preintegrate_between(stream, 0.0, 1.0, {}, noise);

  KeyframeState s0;
  s0.timestamp = 0.0;
  const Eigen::Vector3d g(0, 0, -9.81);
  const KeyframeState direct = predict(s0, full, g);

  // Split on a sample boundary: the hold intervals are identical, so the
  // composition is exact.
  {
    const PreintegratedImu a =
        preintegrate_between(stream, 0.0, 0.35, {}, noise);
    const PreintegratedImu b =
        preintegrate_between(stream, 0.35, 1.0, {}, noise);
    const KeyframeState split = predict(predict(s0, a, g), b, g);
    CHECK((direct.R_wb.matrix() - split.R_wb.matrix()).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((direct.p_wb - split.p_wb).norm() < 1e-12);
    CHECK((direct.v_w - split.v_w).norm() < 1e-12);
    CHECK(a.delta_t() + b.delta_t() == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Split inside a sample interval: the interpolated sub-hold changes the
  // discretization by O(dt^2) per boundary, nothing more.
  {
    const PreintegratedImu a =
        preintegrate_between(stream, 0.0, 0.3456, {}, noise);
    const PreintegratedImu b =
        preintegrate_between(stream, 0.3456, 1.0, {}, noise);
    const KeyframeState split = predict(predict(s0, a, g), b, g);
    CHECK(a.delta_t() == doctest::Approx(0.3456).epsilon(1e-12));
    CHECK(a.delta_t() + b.delta_t() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((direct.R_wb.matrix() - split.R_wb.matrix()).cwiseAbs().maxCoeff() <
          1e-4);
    CHECK((direct.p_wb - split.p_wb).norm() < 1e-3);
    CHECK((direct.v_w - split.v_w).norm() < 1e-3);
  }
}

TEST_CASE("preintegrate_between on an empty interval fails") {
  std::vector<ImuMeasurement> stream(1);
  CHECK_THROWS_AS(preintegrate_between(stream, 1.0, 1.0, {}, {}), Error);
  CHECK_THROWS_AS(
      preintegrate_between(std::vector<ImuMeasurement>{}, 0.0, 1.0, {}, {}),
      Error);
}
