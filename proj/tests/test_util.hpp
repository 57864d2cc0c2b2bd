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
#ifndef VIINIT_TESTS_TEST_UTIL_HPP_
#define VIINIT_TESTS_TEST_UTIL_HPP_

#include <random>

#include "viinit/geometry.hpp"

namespace viinit::testing {

inline Eigen::Vector3d random_vector(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

inline Eigen::Vector3d random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6) v = Eigen::Vector3d(n(rng), n(rng), n(rng));
  return v.normalized();
}

/// Rotation with angle uniform in (0, max_angle).
inline RotationSO3 random_rotation(std::mt19937_64& rng,
                                   double max_angle = 3.0) {
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return RotationSO3::exp(u(rng) * random_unit_vector(rng));
}

}  // namespace viinit::testing

#endif  // VIINIT_TESTS_TEST_UTIL_HPP_
