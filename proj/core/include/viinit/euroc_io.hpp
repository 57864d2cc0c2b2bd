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
#ifndef VIINIT_EUROC_IO_HPP_
#define VIINIT_EUROC_IO_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "viinit/camera.hpp"
#include "viinit/imu.hpp"

namespace viinit {

// ---------------------------------------------------------------------------
// Locale-independent number formatting (shortest round-trip representation).

std::string format_double(double v);
std::string format_int64(std::int64_t v);
double parse_double(const std::string& s);
std::int64_t parse_int64(const std::string& s);

/// Flat whitespace-separated key-value file: one key per line, '#' comments.
std::unordered_map<std::string, std::string> read_key_value_file(
    const std::string& path);
void write_key_value_file(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& entries);

// ---------------------------------------------------------------------------
// Dataset containers

struct GroundTruthEntry {
  std::int64_t timestamp_ns = 0;
  KeyframeState state;  ///< state.timestamp mirrors timestamp_ns in seconds
  ImuBias bias;
};

/// Calibration as stored in the flat calibration file: rectified stereo
/// intrinsics, the body-to-camera transform (points: p_body = T_bc p_cam),
/// IMU noise densities and the gravity magnitude.
struct CalibrationBundle {
  CameraIntrinsics intrinsics;
  PoseSE3 T_bc;
  ImuNoiseSpec noise;
  double gravity_mag = 9.81;
};

/// Tracks plus the keyframe timestamps they reference. Observation
/// keyframe_id fields index into keyframe_timestamps_ns.
struct TrackSet {
  std::vector<Track> tracks;
  std::vector<std::int64_t> keyframe_timestamps_ns;  ///< sorted, unique
  int dropped_tracks = 0;  ///< tracks discarded for having < 2 observations
};

struct DatasetBundle {
  std::vector<ImuMeasurement> imu;
  std::vector<std::int64_t> imu_timestamps_ns;
  std::vector<GroundTruthEntry> ground_truth;  ///< may be empty
  CalibrationBundle calibration;
  TrackSet tracks;  ///< may be empty

  double imu_t_begin() const;
  double imu_t_end() const;
};

// ---------------------------------------------------------------------------
// EuRoC ASL CSV readers/writers
//
// IMU rows:  timestamp [ns], w_x, w_y, w_z [rad/s], a_x, a_y, a_z [m/s^2]
// GT rows:   timestamp [ns], p_x, p_y, p_z [m], q_w, q_x, q_y, q_z,
//            v_x, v_y, v_z [m/s], b_w_x, b_w_y, b_w_z, b_a_x, b_a_y, b_a_z
//
// Timestamps must be strictly increasing; a malformed row fails with its
// line number; quaternions are normalized on load and rejected when their
// norm is off by more than 1e-3.

struct ImuCsv {
  std::vector<ImuMeasurement> measurements;
  std::vector<std::int64_t> timestamps_ns;
};

ImuCsv load_imu_csv(const std::string& path);
void save_imu_csv(const std::string& path,
                  const std::vector<ImuMeasurement>& imu,
                  const std::vector<std::int64_t>& timestamps_ns);

std::vector<GroundTruthEntry> load_ground_truth_csv(const std::string& path);
void save_ground_truth_csv(const std::string& path,
                           const std::vector<GroundTruthEntry>& entries);

// ---------------------------------------------------------------------------
// Track file
//
//   L <landmark_id>
//   O <keyframe_timestamp_ns> <pyramid_level> <u_L> <v> [<u_R>]
//
// Stereo observations carry the trailing u_R column. Tracks with fewer
// than two observations are dropped (counted); two observations of one
// track in the same keyframe are a validation error. When `valid_ts` is
// given, every observation timestamp must be a member.

TrackSet load_tracks(
    const std::string& path,
    const std::optional<std::unordered_set<std::int64_t>>& valid_ts =
        std::nullopt);
void save_tracks(const std::string& path, const TrackSet& tracks);

// ---------------------------------------------------------------------------
// Calibration file (flat key-value: fx fy cx cy baseline image_width
// image_height, T_BC as 16 row-major values, noise densities, gravity_mag)

CalibrationBundle load_calibration(const std::string& path);
void save_calibration(const std::string& path, const CalibrationBundle& c);

// ---------------------------------------------------------------------------
// Dataset directory layout:
//   <dir>/mav0/imu0/data.csv
//   <dir>/mav0/state_groundtruth_estimate0/data.csv   (optional)
//   <dir>/calibration.txt
//   <dir>/tracks.txt                                  (optional)

DatasetBundle load_dataset(const std::string& dir);
void save_dataset(const std::string& dir, const DatasetBundle& bundle);

/// Restricts all streams to [t_start, t_end] (seconds, same epoch as the
/// loaded timestamps), keeping one IMU sample before t_start for
/// interpolation. Throws a data error when the slice is empty.
DatasetBundle slice(const DatasetBundle& bundle, double t_start, double t_end);

}  // namespace viinit

#endif  // VIINIT_EUROC_IO_HPP_
