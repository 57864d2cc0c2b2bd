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
#ifndef VIINIT_EVALUATION_HPP_
#define VIINIT_EVALUATION_HPP_

#include <string>
#include <vector>

#include "viinit/pipeline.hpp"
#include "viinit/simulator.hpp"

namespace viinit {

struct TimedPose {
  double timestamp = 0;
  RotationSO3 rotation;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

enum class AteMode { kRaw, kRigidAligned };

AteMode ate_mode_from_string(const std::string& s);
std::string to_string(AteMode m);

std::vector<TimedPose> to_timed_poses(const InitResult& result);
std::vector<TimedPose> to_timed_poses(
    const std::vector<GroundTruthEntry>& gt);

/// Pairs poses by nearest timestamp within a 5 ms gate.
std::vector<std::pair<int, int>> associate(
    const std::vector<TimedPose>& estimated,
    const std::vector<TimedPose>& ground_truth, double gate = 5e-3);

/**
 * Absolute trajectory error: RMSE of position differences over associated
 * pairs. Raw mode compares positions directly; rigid-aligned mode first
 * applies the closed-form SE(3) alignment (rotation + translation, never
 * scale). Throws a data error with fewer than 2 associated pairs.
 */
double ate(const std::vector<TimedPose>& estimated,
           const std::vector<TimedPose>& ground_truth, AteMode mode);

/**
 * RMS geodesic rotation error in degrees over associated pairs:
 * angle(R_gt^T R_align R_est), with R_align the chordal best-fit rotation
 * between the two rotation sequences (identity in raw mode).
 */
double rotation_error_deg(const std::vector<TimedPose>& estimated,
                          const std::vector<TimedPose>& ground_truth,
                          AteMode mode);

struct MetricReport {
  double t_start = 0;
  bool ok = false;
  std::string error;  ///< failure reason when !ok
  double ate_rmse = 0;
  double rotation_err_deg = 0;
  AteMode mode = AteMode::kRigidAligned;
  int keyframes = 0;
};

struct ProtocolReport {
  std::vector<MetricReport> segments;
  int attempted = 0;
  int failed = 0;
  double mean_ate = 0, median_ate = 0;
  double mean_rot = 0, median_rot = 0;
};

/**
 * Exhaustive initialization protocol: runs the full pipeline on windows
 * starting every `interval` seconds from the start of the dataset and
 * scores each against ground truth. Segments that error are recorded as
 * failures. Aggregates cover the successful segments.
 */
ProtocolReport exhaustive_protocol(const DatasetBundle& dataset,
                                   double interval, double window_length,
                                   const InitConfig& config, AteMode mode);

/// Per-seed paired metrics of the two strategies (6-dof-only vs
/// rotation-translation-decoupled), each without and with the final joint
/// VI-BA. Order: [6dof no-VIBA, decoupled no-VIBA, 6dof VIBA, decoupled VIBA].
struct ComparisonRow {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double ate_m[4] = {0, 0, 0, 0};
  double rot_deg[4] = {0, 0, 0, 0};
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  /// Fraction of successful seeds where the decoupled strategy beats the
  /// 6-dof strategy on ATE (strictly), before/after VI-BA.
  double win_rate_no_viba = 0;
  double win_rate_viba = 0;
  double median_ate[4] = {0, 0, 0, 0};
  double median_rot[4] = {0, 0, 0, 0};
};

/// Fresh dataset per seed from the scene config; both strategies run on
/// identical data within a seed.
ComparisonReport compare_strategies(const SimulationConfig& scene,
                                    const InitConfig& config, int n_seeds,
                                    AteMode mode);

/// One dataset, per-seed pipeline randomness only.
ComparisonReport compare_strategies(const DatasetBundle& dataset,
                                    const InitConfig& config, int n_seeds,
                                    AteMode mode);

/// Bar plot of per-segment ATE (failures marked), written as a standalone
/// SVG file.
void write_protocol_svg(const std::string& path, const ProtocolReport& report);

}  // namespace viinit

#endif  // VIINIT_EVALUATION_HPP_
