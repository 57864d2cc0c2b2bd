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
#include "viinit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "viinit/error.hpp"
#include "viinit/parallel.hpp"

namespace viinit {

AteMode ate_mode_from_string(const std::string& s) {
  if (s == "raw") return AteMode::kRaw;
  if (s == "aligned") return AteMode::kRigidAligned;
  throw config_error("unknown ate mode '" + s + "' (raw|aligned)");
}

std::string to_string(AteMode m) {
  return m == AteMode::kRaw ? "raw" : "aligned";
}

std::vector<TimedPose> to_timed_poses(const InitResult& result) {
  std::vector<TimedPose> out;
  out.reserve(result.states.size());
  for (const KeyframeState& s : result.states) {
    out.push_back({s.timestamp, s.R_wb, s.p_wb});
  }
  return out;
}

std::vector<TimedPose> to_timed_poses(
    const std::vector<GroundTruthEntry>& gt) {
  std::vector<TimedPose> out;
  out.reserve(gt.size());
  for (const GroundTruthEntry& e : gt) {
    out.push_back({e.state.timestamp, e.state.R_wb, e.state.p_wb});
  }
  return out;
}

std::vector<std::pair<int, int>> associate(
    const std::vector<TimedPose>& estimated,
    const std::vector<TimedPose>& ground_truth, double gate) {
  std::vector<std::pair<int, int>> pairs;
  for (size_t i = 0; i < estimated.size(); ++i) {
    int best = -1;
    double best_dt = gate;
    for (size_t j = 0; j < ground_truth.size(); ++j) {
      const double dt =
          std::abs(ground_truth[j].timestamp - estimated[i].timestamp);
      if (dt <= best_dt) {
        best = static_cast<int>(j);
        best_dt = dt;
      }
    }
    if (best >= 0) pairs.emplace_back(static_cast<int>(i), best);
  }
  return pairs;
}

double ate(const std::vector<TimedPose>& estimated,
           const std::vector<TimedPose>& ground_truth, AteMode mode) {
  const auto pairs = associate(estimated, ground_truth);
  if (pairs.size() < 2) {
    throw data_error("ate: fewer than 2 associated poses");
  }
  std::vector<Eigen::Vector3d> est, gt;
  est.reserve(pairs.size());
  gt.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    est.push_back(estimated[i].position);
    gt.push_back(ground_truth[j].position);
  }
  PoseSE3 align;  // identity in raw mode
  if (mode == AteMode::kRigidAligned) {
    align = rigid_align(est, gt);
  }
  double sum = 0;
  for (size_t i = 0; i < est.size(); ++i) {
    sum += (gt[i] - (align * est[i])).squaredNorm();
  }
  return std::sqrt(sum / est.size());
}

double rotation_error_deg(const std::vector<TimedPose>& estimated,
                          const std::vector<TimedPose>& ground_truth,
                          AteMode mode) {
  const auto pairs = associate(estimated, ground_truth);
  if (pairs.empty()) {
    throw data_error("rotation_error: no associated poses");
  }
  RotationSO3 align;  // identity in raw mode
  if (mode == AteMode::kRigidAligned) {
    std::vector<RotationSO3> est, gt;
    for (const auto& [i, j] : pairs) {
      est.push_back(estimated[i].rotation);
      gt.push_back(ground_truth[j].rotation);
    }
    align = chordal_align(gt, est);
  }
  double sum = 0;
  for (const auto& [i, j] : pairs) {
    const Eigen::Vector3d r = (ground_truth[j].rotation.inverse() * align *
                               estimated[i].rotation)
                                  .log();
    sum += r.squaredNorm();
  }
  return std::sqrt(sum / pairs.size()) * 180.0 / M_PI;
}

// ---------------------------------------------------------------------------
// Exhaustive protocol

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MetricReport score_result(const InitResult& result,
                          const std::vector<GroundTruthEntry>& gt,
                          AteMode mode) {
  MetricReport m;
  m.mode = mode;
  m.keyframes = static_cast<int>(result.states.size());
  const auto est = to_timed_poses(result);
  const auto ref = to_timed_poses(gt);
  m.ate_rmse = ate(est, ref, mode);
  m.rotation_err_deg = rotation_error_deg(est, ref, mode);
  m.ok = true;
  return m;
}

}  // namespace

ProtocolReport exhaustive_protocol(const DatasetBundle& dataset,
                                   double interval, double window_length,
                                   const InitConfig& config, AteMode mode) {
  if (!(interval > 0)) throw config_error("interval must be positive");
  if (dataset.ground_truth.empty()) {
    throw data_error("exhaustive protocol needs ground truth");
  }
  const double t_begin = dataset.imu_t_begin();
  const double duration = dataset.imu_t_end() - t_begin;
  if (duration < window_length) {
    throw data_error("dataset shorter than the window length");
  }
  const int attempts =
      static_cast<int>(std::floor((duration - window_length) / interval)) + 1;

  ProtocolReport report;
  report.attempted = attempts;
  report.segments.resize(attempts);

  parallel_for(attempts, [&](int i) {
    const double t0 = t_begin + i * interval;
    MetricReport& m = report.segments[i];
    m.t_start = t0;
    m.mode = mode;
    try {
      const DatasetBundle seg = slice(dataset, t0, t0 + window_length);
      const InitResult result = run_initialization(seg, config);
      m = score_result(result, seg.ground_truth, mode);
      m.t_start = t0;
    } catch (const std::exception& e) {
      m.ok = false;
      m.error = e.what();
    }
  });

  std::vector<double> ates, rots;
  for (const MetricReport& m : report.segments) {
    if (m.ok) {
      ates.push_back(m.ate_rmse);
      rots.push_back(m.rotation_err_deg);
    } else {
      ++report.failed;
    }
  }
  if (!ates.empty()) {
    report.mean_ate =
        std::accumulate(ates.begin(), ates.end(), 0.0) / ates.size();
    report.mean_rot =
        std::accumulate(rots.begin(), rots.end(), 0.0) / rots.size();
    report.median_ate = median_of(ates);
    report.median_rot = median_of(rots);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Strategy comparison

namespace {

ComparisonReport compare_impl(
    const std::function<DatasetBundle(std::uint64_t)>& make_dataset,
    const InitConfig& base_config, int n_seeds, AteMode mode) {
  if (n_seeds < 1) throw config_error("n_seeds must be >= 1");
  ComparisonReport report;
  report.rows.resize(n_seeds);

  parallel_for(n_seeds, [&](int s) {
    ComparisonRow& row = report.rows[s];
    row.seed = static_cast<std::uint64_t>(s) + 1;
    try {
      const DatasetBundle data = make_dataset(row.seed);
      const std::vector<TimedPose> ref = to_timed_poses(data.ground_truth);
      // Variants: [6dof no-VIBA, decoupled no-VIBA, 6dof VIBA, decoupled VIBA]
      for (int v = 0; v < 4; ++v) {
        InitConfig c = base_config;
        c.rng_seed = row.seed;
        c.enable_step3 = (v % 2 == 1);
        c.enable_step4 = (v >= 2);
        const InitResult result = run_initialization(data, c);
        const auto est = to_timed_poses(result);
        row.ate_m[v] = ate(est, ref, mode);
        row.rot_deg[v] = rotation_error_deg(est, ref, mode);
      }
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  });

  int ok_count = 0, wins_no_viba = 0, wins_viba = 0;
  std::vector<double> ates[4], rots[4];
  for (const ComparisonRow& row : report.rows) {
    if (!row.ok) continue;
    ++ok_count;
    if (row.ate_m[1] < row.ate_m[0]) ++wins_no_viba;
    if (row.ate_m[3] < row.ate_m[2]) ++wins_viba;
    for (int v = 0; v < 4; ++v) {
      ates[v].push_back(row.ate_m[v]);
      rots[v].push_back(row.rot_deg[v]);
    }
  }
  if (ok_count > 0) {
    report.win_rate_no_viba = static_cast<double>(wins_no_viba) / ok_count;
    report.win_rate_viba = static_cast<double>(wins_viba) / ok_count;
    for (int v = 0; v < 4; ++v) {
      report.median_ate[v] = median_of(ates[v]);
      report.median_rot[v] = median_of(rots[v]);
    }
  }
  return report;
}

}  // namespace

ComparisonReport compare_strategies(const SimulationConfig& scene,
                                    const InitConfig& config, int n_seeds,
                                    AteMode mode) {
  return compare_impl(
      [&scene](std::uint64_t seed) {
        SimulationConfig c = scene;
        c.seed = seed;
        return simulate(c).to_bundle();
      },
      config, n_seeds, mode);
}

ComparisonReport compare_strategies(const DatasetBundle& dataset,
                                    const InitConfig& config, int n_seeds,
                                    AteMode mode) {
  return compare_impl([&dataset](std::uint64_t) { return dataset; }, config,
                      n_seeds, mode);
}

// ---------------------------------------------------------------------------
// SVG report

void write_protocol_svg(const std::string& path,
                        const ProtocolReport& report) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open '" + path + "' for writing");

  const int n = static_cast<int>(report.segments.size());
  const int width = std::max(320, 40 + n * 14);
  const int height = 240;
  const int base = height - 30;
  double max_ate = 1e-9;
  for (const MetricReport& m : report.segments) {
    if (m.ok) max_ate = std::max(max_ate, m.ate_rmse);
  }

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"10\" y=\"16\" font-size=\"12\">per-segment ATE [m], max "
      << format_double(max_ate) << "</text>\n";
  out << "<line x1=\"30\" y1=\"" << base << "\" x2=\"" << (width - 10)
      << "\" y2=\"" << base << "\" stroke=\"black\"/>\n";
  for (int i = 0; i < n; ++i) {
    const MetricReport& m = report.segments[i];
    const int x = 34 + i * 14;
    if (m.ok) {
      const int h =
          static_cast<int>(std::round((base - 30) * m.ate_rmse / max_ate));
      out << "<rect x=\"" << x << "\" y=\"" << (base - h)
          << "\" width=\"10\" height=\"" << h << "\" fill=\"#4477aa\"/>\n";
    } else {
      out << "<rect x=\"" << x << "\" y=\"30\" width=\"10\" height=\""
          << (base - 30) << "\" fill=\"#cc3311\" opacity=\"0.5\"/>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace viinit
