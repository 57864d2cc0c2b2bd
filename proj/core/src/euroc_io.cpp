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
#include "viinit/euroc_io.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "viinit/error.hpp"

namespace viinit {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Number formatting

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_int64(std::int64_t v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw data_error("cannot parse number '" + s + "'");
  }
  return v;
}

std::int64_t parse_int64(const std::string& s) {
  std::int64_t v = 0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw data_error("cannot parse integer '" + s + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Generic helpers

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  return out;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open '" + path + "' for writing");
  return out;
}

bool is_comment_or_empty(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

void check_monotone(std::int64_t prev, std::int64_t cur,
                    const std::string& path, int line_no) {
  if (cur <= prev) {
    throw data_error(path + ":" + std::to_string(line_no) +
                     ": non-monotone timestamp");
  }
}

constexpr double kNsToS = 1e-9;

}  // namespace

std::unordered_map<std::string, std::string> read_key_value_file(
    const std::string& path) {
  std::ifstream in = open_input(path);
  std::unordered_map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_empty(line)) continue;
    const auto pos = line.find_first_of(" \t");
    if (pos == std::string::npos) {
      throw data_error(path + ":" + std::to_string(line_no) +
                       ": expected 'key value'");
    }
    const std::string key = line.substr(0, pos);
    std::string value = line.substr(pos + 1);
    const auto b = value.find_first_not_of(" \t\r");
    const auto e = value.find_last_not_of(" \t\r");
    value = (b == std::string::npos) ? "" : value.substr(b, e - b + 1);
    out[key] = value;
  }
  return out;
}

void write_key_value_file(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out = open_output(path);
  for (const auto& [k, v] : entries) {
    out << k << " " << v << "\n";
  }
}

// ---------------------------------------------------------------------------
// IMU CSV

ImuCsv load_imu_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  ImuCsv out;
  std::string line;
  int line_no = 0;
  std::int64_t prev_ts = std::numeric_limits<std::int64_t>::min();
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_empty(line)) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 7) {
      throw data_error(path + ":" + std::to_string(line_no) +
                       ": expected 7 columns, got " +
                       std::to_string(fields.size()));
    }
    ImuMeasurement m;
    std::int64_t ts;
    try {
      ts = parse_int64(fields[0]);
      for (int i = 0; i < 3; ++i) m.gyro[i] = parse_double(fields[1 + i]);
      for (int i = 0; i < 3; ++i) m.accel[i] = parse_double(fields[4 + i]);
    } catch (const Error& e) {
      throw data_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    check_monotone(prev_ts, ts, path, line_no);
    prev_ts = ts;
    m.timestamp = static_cast<double>(ts) * kNsToS;
    out.measurements.push_back(m);
    out.timestamps_ns.push_back(ts);
  }
  return out;
}

void save_imu_csv(const std::string& path,
                  const std::vector<ImuMeasurement>& imu,
                  const std::vector<std::int64_t>& timestamps_ns) {
  if (imu.size() != timestamps_ns.size()) {
    throw config_error("save_imu_csv: size mismatch");
  }
  std::ofstream out = open_output(path);
  out << "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],"
         "w_RS_S_z [rad s^-1],a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],"
         "a_RS_S_z [m s^-2]\n";
  for (size_t i = 0; i < imu.size(); ++i) {
    out << format_int64(timestamps_ns[i]);
    for (int a = 0; a < 3; ++a) out << "," << format_double(imu[i].gyro[a]);
    for (int a = 0; a < 3; ++a) out << "," << format_double(imu[i].accel[a]);
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Ground truth CSV

std::vector<GroundTruthEntry> load_ground_truth_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<GroundTruthEntry> out;
  std::string line;
  int line_no = 0;
  std::int64_t prev_ts = std::numeric_limits<std::int64_t>::min();
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_empty(line)) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 17) {
      throw data_error(path + ":" + std::to_string(line_no) +
                       ": expected 17 columns, got " +
                       std::to_string(fields.size()));
    }
    GroundTruthEntry e;
    try {
      e.timestamp_ns = parse_int64(fields[0]);
      Eigen::Vector3d p, v, bw, ba;
      for (int i = 0; i < 3; ++i) p[i] = parse_double(fields[1 + i]);
      Eigen::Quaterniond q(parse_double(fields[4]), parse_double(fields[5]),
                           parse_double(fields[6]), parse_double(fields[7]));
      for (int i = 0; i < 3; ++i) v[i] = parse_double(fields[8 + i]);
      for (int i = 0; i < 3; ++i) bw[i] = parse_double(fields[11 + i]);
      for (int i = 0; i < 3; ++i) ba[i] = parse_double(fields[14 + i]);
      if (std::abs(q.norm() - 1.0) > 1e-3) {
        throw data_error("quaternion norm " + format_double(q.norm()) +
                         " out of tolerance");
      }
      e.state.R_wb = RotationSO3::from_quaternion(q);
      e.state.p_wb = p;
      e.state.v_w = v;
      e.bias.gyro = bw;
      e.bias.accel = ba;
    } catch (const Error& err) {
      throw data_error(path + ":" + std::to_string(line_no) + ": " +
                       err.what());
    }
    check_monotone(prev_ts, e.timestamp_ns, path, line_no);
    prev_ts = e.timestamp_ns;
    e.state.timestamp = static_cast<double>(e.timestamp_ns) * kNsToS;
    out.push_back(e);
  }
  return out;
}

void save_ground_truth_csv(const std::string& path,
                           const std::vector<GroundTruthEntry>& entries) {
  std::ofstream out = open_output(path);
  out << "#timestamp [ns],p_RS_R_x [m],p_RS_R_y [m],p_RS_R_z [m],"
         "q_RS_w [],q_RS_x [],q_RS_y [],q_RS_z [],"
         "v_RS_R_x [m s^-1],v_RS_R_y [m s^-1],v_RS_R_z [m s^-1],"
         "b_w_RS_S_x [rad s^-1],b_w_RS_S_y [rad s^-1],b_w_RS_S_z [rad s^-1],"
         "b_a_RS_S_x [m s^-2],b_a_RS_S_y [m s^-2],b_a_RS_S_z [m s^-2]\n";
  for (const GroundTruthEntry& e : entries) {
    Eigen::Quaterniond q = e.state.R_wb.quaternion();
    if (q.w() < 0) q.coeffs() *= -1.0;
    out << format_int64(e.timestamp_ns);
    for (int i = 0; i < 3; ++i) out << "," << format_double(e.state.p_wb[i]);
    out << "," << format_double(q.w()) << "," << format_double(q.x()) << ","
        << format_double(q.y()) << "," << format_double(q.z());
    for (int i = 0; i < 3; ++i) out << "," << format_double(e.state.v_w[i]);
    for (int i = 0; i < 3; ++i) out << "," << format_double(e.bias.gyro[i]);
    for (int i = 0; i < 3; ++i) out << "," << format_double(e.bias.accel[i]);
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Track file

TrackSet load_tracks(
    const std::string& path,
    const std::optional<std::unordered_set<std::int64_t>>& valid_ts) {
  std::ifstream in = open_input(path);
  TrackSet out;
  std::string line;
  int line_no = 0;

  struct RawObs {
    std::int64_t ts = 0;
    Observation obs;
  };
  std::vector<std::pair<Landmark, std::vector<RawObs>>> raw;

  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_empty(line)) continue;
    const auto fields = split_ws(line);
    const std::string where = path + ":" + std::to_string(line_no);
    try {
      if (fields[0] == "L") {
        if (fields.size() != 2) throw data_error("expected 'L <id>'");
        Landmark lm;
        lm.id = parse_int64(fields[1]);
        raw.emplace_back(lm, std::vector<RawObs>());
      } else if (fields[0] == "O") {
        if (raw.empty()) {
          throw data_error("observation before any 'L' record");
        }
        if (fields.size() != 5 && fields.size() != 6) {
          throw data_error("expected 'O <ts> <level> <uL> <v> [<uR>]'");
        }
        RawObs r;
        r.ts = parse_int64(fields[1]);
        r.obs.pyramid_level = static_cast<int>(parse_int64(fields[2]));
        if (r.obs.pyramid_level < 0) {
          throw data_error("negative pyramid level");
        }
        r.obs.pixel.x() = parse_double(fields[3]);
        r.obs.pixel.y() = parse_double(fields[4]);
        if (fields.size() == 6) {
          r.obs.kind = ObservationKind::kStereo;
          r.obs.pixel.z() = parse_double(fields[5]);
        } else {
          r.obs.kind = ObservationKind::kMono;
        }
        r.obs.landmark_id = raw.back().first.id;
        if (valid_ts && !valid_ts->count(r.ts)) {
          throw data_error("unknown keyframe timestamp " + format_int64(r.ts));
        }
        raw.back().second.push_back(r);
      } else {
        throw data_error("unknown record '" + fields[0] + "'");
      }
    } catch (const Error& e) {
      throw data_error(where + ": " + e.what());
    }
  }

  // Collect the keyframe set, then resolve observation indices.
  std::map<std::int64_t, int> ts_index;
  for (const auto& [lm, obs] : raw) {
    for (const RawObs& r : obs) ts_index.emplace(r.ts, 0);
  }
  int next = 0;
  for (auto& [ts, idx] : ts_index) {
    idx = next++;
    out.keyframe_timestamps_ns.push_back(ts);
  }

  for (auto& [lm, obs] : raw) {
    if (obs.size() < 2) {
      ++out.dropped_tracks;
      continue;
    }
    Track t;
    t.landmark = lm;
    std::unordered_set<int> seen;
    for (RawObs& r : obs) {
      r.obs.keyframe_id = ts_index.at(r.ts);
      if (!seen.insert(r.obs.keyframe_id).second) {
        throw data_error(path + ": landmark " + format_int64(lm.id) +
                         " observed twice in one keyframe");
      }
      t.observations.push_back(r.obs);
    }
    out.tracks.push_back(std::move(t));
  }
  return out;
}

void save_tracks(const std::string& path, const TrackSet& tracks) {
  std::ofstream out = open_output(path);
  out << "# L <landmark_id> / O <keyframe_timestamp_ns> <pyramid_level> "
         "<u_L> <v> [<u_R>]\n";
  for (const Track& t : tracks.tracks) {
    out << "L " << format_int64(t.landmark.id) << "\n";
    for (const Observation& o : t.observations) {
      out << "O "
          << format_int64(tracks.keyframe_timestamps_ns.at(o.keyframe_id))
          << " " << o.pyramid_level << " " << format_double(o.pixel.x()) << " "
          << format_double(o.pixel.y());
      if (o.kind == ObservationKind::kStereo) {
        out << " " << format_double(o.pixel.z());
      }
      out << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// Calibration

CalibrationBundle load_calibration(const std::string& path) {
  const auto kv = read_key_value_file(path);
  auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) {
      throw data_error(path + ": missing calibration key '" + key + "'");
    }
    return it->second;
  };
  CalibrationBundle c;
  c.intrinsics.fx = parse_double(need("fx"));
  c.intrinsics.fy = parse_double(need("fy"));
  c.intrinsics.cx = parse_double(need("cx"));
  c.intrinsics.cy = parse_double(need("cy"));
  c.intrinsics.baseline_b = parse_double(need("baseline"));
  c.intrinsics.image_width =
      static_cast<int>(parse_int64(need("image_width")));
  c.intrinsics.image_height =
      static_cast<int>(parse_int64(need("image_height")));
  c.intrinsics.validate();

  const auto t_bc_fields = split_ws(need("T_BC"));
  if (t_bc_fields.size() != 16) {
    throw data_error(path + ": T_BC must have 16 row-major values");
  }
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int col = 0; col < 4; ++col) {
      m(r, col) = parse_double(t_bc_fields[r * 4 + col]);
    }
  }
  c.T_bc = PoseSE3::from_matrix(m, 1e-5);

  c.noise.gyro_noise_density = parse_double(need("gyro_noise_density"));
  c.noise.accel_noise_density = parse_double(need("accel_noise_density"));
  c.noise.gyro_bias_walk = parse_double(need("gyro_bias_walk"));
  c.noise.accel_bias_walk = parse_double(need("accel_bias_walk"));
  c.gravity_mag = parse_double(need("gravity_mag"));
  return c;
}

void save_calibration(const std::string& path, const CalibrationBundle& c) {
  std::string t_bc;
  const Eigen::Matrix4d m = c.T_bc.matrix();
  for (int r = 0; r < 4; ++r) {
    for (int col = 0; col < 4; ++col) {
      if (!t_bc.empty()) t_bc += " ";
      t_bc += format_double(m(r, col));
    }
  }
  write_key_value_file(
      path,
      {{"fx", format_double(c.intrinsics.fx)},
       {"fy", format_double(c.intrinsics.fy)},
       {"cx", format_double(c.intrinsics.cx)},
       {"cy", format_double(c.intrinsics.cy)},
       {"baseline", format_double(c.intrinsics.baseline_b)},
       {"image_width", std::to_string(c.intrinsics.image_width)},
       {"image_height", std::to_string(c.intrinsics.image_height)},
       {"T_BC", t_bc},
       {"gyro_noise_density", format_double(c.noise.gyro_noise_density)},
       {"accel_noise_density", format_double(c.noise.accel_noise_density)},
       {"gyro_bias_walk", format_double(c.noise.gyro_bias_walk)},
       {"accel_bias_walk", format_double(c.noise.accel_bias_walk)},
       {"gravity_mag", format_double(c.gravity_mag)}});
}

// ---------------------------------------------------------------------------
// Dataset directory

double DatasetBundle::imu_t_begin() const {
  if (imu.empty()) throw data_error("dataset has no IMU data");
  return imu.front().timestamp;
}

double DatasetBundle::imu_t_end() const {
  if (imu.empty()) throw data_error("dataset has no IMU data");
  return imu.back().timestamp;
}

DatasetBundle load_dataset(const std::string& dir) {
  DatasetBundle b;
  const fs::path root(dir);
  const fs::path imu_path = root / "mav0" / "imu0" / "data.csv";
  const fs::path gt_path =
      root / "mav0" / "state_groundtruth_estimate0" / "data.csv";
  const fs::path calib_path = root / "calibration.txt";
  const fs::path tracks_path = root / "tracks.txt";

  ImuCsv imu = load_imu_csv(imu_path.string());
  b.imu = std::move(imu.measurements);
  b.imu_timestamps_ns = std::move(imu.timestamps_ns);
  b.calibration = load_calibration(calib_path.string());
  if (fs::exists(gt_path)) {
    b.ground_truth = load_ground_truth_csv(gt_path.string());
  }
  if (fs::exists(tracks_path)) {
    b.tracks = load_tracks(tracks_path.string());
    for (std::int64_t ts : b.tracks.keyframe_timestamps_ns) {
      const double t = static_cast<double>(ts) * kNsToS;
      if (t < b.imu_t_begin() - 0.1 || t > b.imu_t_end() + 0.1) {
        throw data_error("track keyframe at " + format_int64(ts) +
                         " has no IMU coverage");
      }
    }
  }
  return b;
}

void save_dataset(const std::string& dir, const DatasetBundle& bundle) {
  const fs::path root(dir);
  fs::create_directories(root / "mav0" / "imu0");
  fs::create_directories(root / "mav0" / "state_groundtruth_estimate0");
  save_imu_csv((root / "mav0" / "imu0" / "data.csv").string(), bundle.imu,
               bundle.imu_timestamps_ns);
  if (!bundle.ground_truth.empty()) {
    save_ground_truth_csv(
        (root / "mav0" / "state_groundtruth_estimate0" / "data.csv").string(),
        bundle.ground_truth);
  }
  save_calibration((root / "calibration.txt").string(), bundle.calibration);
  if (!bundle.tracks.tracks.empty()) {
    save_tracks((root / "tracks.txt").string(), bundle.tracks);
  }
}

DatasetBundle slice(const DatasetBundle& bundle, double t_start,
                    double t_end) {
  if (!(t_start < t_end)) {
    throw data_error("slice: t_start must precede t_end");
  }
  DatasetBundle out;
  out.calibration = bundle.calibration;

  // IMU: [t_start, t_end] plus one leading sample.
  size_t first = 0;
  while (first < bundle.imu.size() && bundle.imu[first].timestamp < t_start) {
    ++first;
  }
  if (first > 0) --first;
  size_t in_range = 0;
  for (size_t i = first; i < bundle.imu.size(); ++i) {
    if (bundle.imu[i].timestamp > t_end) break;
    if (bundle.imu[i].timestamp >= t_start) ++in_range;
    out.imu.push_back(bundle.imu[i]);
    out.imu_timestamps_ns.push_back(bundle.imu_timestamps_ns[i]);
  }
  if (in_range == 0) throw data_error("slice: no IMU data in range");

  for (const GroundTruthEntry& e : bundle.ground_truth) {
    if (e.state.timestamp >= t_start && e.state.timestamp <= t_end) {
      out.ground_truth.push_back(e);
    }
  }

  if (!bundle.tracks.tracks.empty()) {
    // Keep observations whose keyframes fall inside the window, then
    // re-index against the reduced keyframe set.
    std::vector<char> keep(bundle.tracks.keyframe_timestamps_ns.size(), 0);
    std::vector<int> new_index(keep.size(), -1);
    for (size_t i = 0; i < keep.size(); ++i) {
      const double t =
          static_cast<double>(bundle.tracks.keyframe_timestamps_ns[i]) *
          kNsToS;
      if (t >= t_start && t <= t_end) {
        keep[i] = 1;
        new_index[i] =
            static_cast<int>(out.tracks.keyframe_timestamps_ns.size());
        out.tracks.keyframe_timestamps_ns.push_back(
            bundle.tracks.keyframe_timestamps_ns[i]);
      }
    }
    for (const Track& t : bundle.tracks.tracks) {
      Track nt;
      nt.landmark = t.landmark;
      for (const Observation& o : t.observations) {
        if (keep[o.keyframe_id]) {
          Observation no = o;
          no.keyframe_id = new_index[o.keyframe_id];
          nt.observations.push_back(no);
        }
      }
      if (nt.observations.size() >= 2) {
        out.tracks.tracks.push_back(std::move(nt));
      } else if (!t.observations.empty()) {
        ++out.tracks.dropped_tracks;
      }
    }
  }
  return out;
}

}  // namespace viinit
