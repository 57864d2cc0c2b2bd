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
#include "viinit/solver.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "viinit/error.hpp"

namespace viinit {

double huber_weight(double residual_norm, double delta) {
  if (!(delta > 0)) {
    throw config_error("huber_weight: delta must be positive");
  }
  return residual_norm <= delta ? 1.0 : delta / residual_norm;
}

double huber_rho(double squared_norm, double delta) {
  if (!(delta > 0)) {
    throw config_error("huber_rho: delta must be positive");
  }
  if (squared_norm <= delta * delta) return squared_norm;
  return 2.0 * delta * std::sqrt(squared_norm) - delta * delta;
}

Eigen::Matrix<double, 3, 2> unit_vector_tangent_basis(
    const Eigen::Vector3d& d) {
  const Eigen::Vector3d ref = std::abs(d.x()) < 0.9
                                  ? Eigen::Vector3d::UnitX()
                                  : Eigen::Vector3d::UnitY();
  Eigen::Matrix<double, 3, 2> basis;
  basis.col(0) = d.cross(ref).normalized();
  basis.col(1) = d.cross(basis.col(0));
  return basis;
}

// ---------------------------------------------------------------------------
// LeastSquaresProblem

int LeastSquaresProblem::add_euclidean_block(const Eigen::VectorXd& value) {
  blocks_.push_back({BlockKind::kEuclidean, value});
  return static_cast<int>(blocks_.size()) - 1;
}

int LeastSquaresProblem::add_rotation_block(const RotationSO3& value) {
  Eigen::VectorXd v(9);
  Eigen::Map<Eigen::Matrix3d>(v.data()) = value.matrix();
  blocks_.push_back({BlockKind::kRotation, v});
  return static_cast<int>(blocks_.size()) - 1;
}

int LeastSquaresProblem::add_unit_vector_block(
    const Eigen::Vector3d& direction) {
  const double n = direction.norm();
  if (!(n > 0) || !direction.allFinite()) {
    throw config_error("unit vector block: invalid direction");
  }
  blocks_.push_back({BlockKind::kUnitVector, direction / n});
  return static_cast<int>(blocks_.size()) - 1;
}

const LeastSquaresProblem::Block& LeastSquaresProblem::at(int id) const {
  if (id < 0 || id >= static_cast<int>(blocks_.size())) {
    throw config_error("parameter block id out of range");
  }
  return blocks_[id];
}

LeastSquaresProblem::Block& LeastSquaresProblem::at(int id) {
  if (id < 0 || id >= static_cast<int>(blocks_.size())) {
    throw config_error("parameter block id out of range");
  }
  return blocks_[id];
}

void LeastSquaresProblem::set_block_fixed(int id, bool fixed) {
  at(id).fixed = fixed;
}
bool LeastSquaresProblem::is_block_fixed(int id) const { return at(id).fixed; }

void LeastSquaresProblem::set_block_eliminable(int id) {
  Block& b = at(id);
  if (b.kind != BlockKind::kEuclidean || b.value.size() != 3) {
    throw config_error("only 3-dof Euclidean blocks can be eliminated");
  }
  b.eliminable = true;
}
bool LeastSquaresProblem::is_block_eliminable(int id) const {
  return at(id).eliminable;
}

int LeastSquaresProblem::tangent_dim(int id) const {
  const Block& b = at(id);
  switch (b.kind) {
    case BlockKind::kEuclidean:
      return static_cast<int>(b.value.size());
    case BlockKind::kRotation:
      return 3;
    case BlockKind::kUnitVector:
      return 2;
  }
  return 0;
}

BlockKind LeastSquaresProblem::kind(int id) const { return at(id).kind; }

const Eigen::VectorXd& LeastSquaresProblem::value(int id) const {
  return at(id).value;
}

void LeastSquaresProblem::set_value(int id, const Eigen::VectorXd& v) {
  Block& b = at(id);
  if (v.size() != b.value.size()) {
    throw config_error("set_value: dimension mismatch");
  }
  b.value = v;
}

RotationSO3 LeastSquaresProblem::rotation_value(int id) const {
  const Block& b = at(id);
  if (b.kind != BlockKind::kRotation) {
    throw config_error("rotation_value: block is not a rotation");
  }
  return RotationSO3::from_matrix(
      Eigen::Map<const Eigen::Matrix3d>(b.value.data()), 1e-6);
}

Eigen::Vector3d LeastSquaresProblem::vec3_value(int id) const {
  const Block& b = at(id);
  if (b.value.size() != 3) {
    throw config_error("vec3_value: block is not 3-dimensional");
  }
  return Eigen::Vector3d(b.value);
}

void LeastSquaresProblem::apply_delta(int id, const Eigen::VectorXd& delta) {
  Block& b = at(id);
  if (delta.size() != tangent_dim(id)) {
    throw config_error("apply_delta: tangent dimension mismatch");
  }
  switch (b.kind) {
    case BlockKind::kEuclidean:
      b.value += delta;
      break;
    case BlockKind::kRotation: {
      Eigen::Map<Eigen::Matrix3d> m(b.value.data());
      m = m * RotationSO3::exp(delta).matrix();
      break;
    }
    case BlockKind::kUnitVector: {
      Eigen::Vector3d d(b.value);
      const Eigen::Matrix<double, 3, 2> basis = unit_vector_tangent_basis(d);
      d = RotationSO3::exp(basis * delta) * d;
      b.value = d.normalized();
      break;
    }
  }
}

std::vector<Eigen::VectorXd> LeastSquaresProblem::snapshot() const {
  std::vector<Eigen::VectorXd> snap;
  snap.reserve(blocks_.size());
  for (const Block& b : blocks_) snap.push_back(b.value);
  return snap;
}

void LeastSquaresProblem::restore(const std::vector<Eigen::VectorXd>& snap) {
  if (snap.size() != blocks_.size()) {
    throw config_error("restore: snapshot size mismatch");
  }
  for (size_t i = 0; i < snap.size(); ++i) blocks_[i].value = snap[i];
}

void LeastSquaresProblem::add_residual(std::unique_ptr<ResidualBlock> block) {
  for (int id : block->parameter_blocks()) {
    at(id);  // range check
  }
  residuals_.push_back(std::move(block));
}

// ---------------------------------------------------------------------------
// Solver internals

namespace {

struct Evaluation {
  double cost = 0;
  int dropped = 0;
  std::vector<char> active;  // per residual block
  bool finite = true;
};

double block_cost(const Eigen::VectorXd& r, double robust_delta) {
  const double s = r.squaredNorm();
  return 0.5 * (robust_delta > 0 ? huber_rho(s, robust_delta) : s);
}

// Cost only. When `reference_active` is given, blocks outside that set are
// skipped, and blocks inside it that fail to evaluate keep their reference
// cost so that acceptance decisions compare like with like.
Evaluation evaluate_all(const LeastSquaresProblem& problem,
                        const std::vector<char>* reference_active = nullptr,
                        const std::vector<double>* reference_costs = nullptr) {
  const auto& residuals = problem.residuals();
  Evaluation ev;
  ev.active.assign(residuals.size(), 0);
  Eigen::VectorXd r;
  for (size_t i = 0; i < residuals.size(); ++i) {
    if (reference_active && !(*reference_active)[i]) continue;
    if (residuals[i]->evaluate(problem, &r, nullptr) && r.allFinite()) {
      ev.active[i] = 1;
      ev.cost += block_cost(r, residuals[i]->robust_delta());
    } else if (reference_active && reference_costs) {
      ev.cost += (*reference_costs)[i];
      ++ev.dropped;
    } else {
      ++ev.dropped;
    }
  }
  ev.finite = std::isfinite(ev.cost);
  return ev;
}

struct TangentLayout {
  // Per block: offset into the dense/pose segment, or into the landmark
  // segment when eliminated; -1 when fixed.
  std::vector<int> offset;
  std::vector<char> eliminated;
  int pose_dim = 0;
  int landmark_dim = 0;
  std::vector<int> landmark_blocks;  // block ids in elimination order
};

TangentLayout make_layout(const LeastSquaresProblem& problem, bool use_schur) {
  TangentLayout layout;
  const int n = problem.block_count();
  layout.offset.assign(n, -1);
  layout.eliminated.assign(n, 0);
  for (int id = 0; id < n; ++id) {
    if (problem.is_block_fixed(id)) continue;
    if (use_schur && problem.is_block_eliminable(id)) {
      layout.eliminated[id] = 1;
      layout.offset[id] = layout.landmark_dim;
      layout.landmark_dim += problem.tangent_dim(id);
      layout.landmark_blocks.push_back(id);
    } else {
      layout.offset[id] = layout.pose_dim;
      layout.pose_dim += problem.tangent_dim(id);
    }
  }
  return layout;
}

struct NormalEquations {
  Eigen::MatrixXd h_pp;
  Eigen::VectorXd b_p;
  // Per landmark: 3x3 diagonal block, rhs, and cross term W (pose_dim x 3).
  std::vector<Eigen::Matrix3d> c;
  std::vector<Eigen::Vector3d> b_l;
  std::vector<Eigen::MatrixXd> w;
  double gradient_inf_norm = 0;
  double cost = 0;
  int dropped = 0;
  std::vector<char> active;
  std::vector<double> block_costs;
  bool ok = true;
};

NormalEquations assemble(const LeastSquaresProblem& problem,
                         const TangentLayout& layout) {
  const auto& residuals = problem.residuals();
  NormalEquations ne;
  ne.h_pp = Eigen::MatrixXd::Zero(layout.pose_dim, layout.pose_dim);
  ne.b_p = Eigen::VectorXd::Zero(layout.pose_dim);
  const int nl = static_cast<int>(layout.landmark_blocks.size());
  ne.c.assign(nl, Eigen::Matrix3d::Zero());
  ne.b_l.assign(nl, Eigen::Vector3d::Zero());
  ne.w.assign(nl, Eigen::MatrixXd::Zero(layout.pose_dim, 3));
  ne.active.assign(residuals.size(), 0);
  ne.block_costs.assign(residuals.size(), 0.0);

  std::vector<int> landmark_index(problem.block_count(), -1);
  for (int j = 0; j < nl; ++j) landmark_index[layout.landmark_blocks[j]] = j;

  Eigen::VectorXd r;
  std::vector<Eigen::MatrixXd> jacs;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.pose_dim + layout.landmark_dim);

  for (size_t i = 0; i < residuals.size(); ++i) {
    const ResidualBlock& block = *residuals[i];
    jacs.clear();
    if (!block.evaluate(problem, &r, &jacs) || !r.allFinite()) {
      ++ne.dropped;
      continue;
    }
    if (jacs.size() != block.parameter_blocks().size()) {
      throw config_error("residual block returned wrong jacobian count");
    }
    bool jac_finite = true;
    for (size_t a = 0; a < jacs.size(); ++a) {
      if (jacs[a].rows() != block.dim() ||
          jacs[a].cols() != problem.tangent_dim(block.parameter_blocks()[a])) {
        throw config_error("residual block jacobian has wrong dimensions");
      }
      jac_finite = jac_finite && jacs[a].allFinite();
    }
    if (!jac_finite) {
      ne.ok = false;
      return ne;
    }
    ne.active[i] = 1;
    ne.block_costs[i] = block_cost(r, block.robust_delta());
    ne.cost += ne.block_costs[i];
    const double weight =
        block.robust_delta() > 0
            ? huber_weight(r.norm(), block.robust_delta())
            : 1.0;

    const auto& ids = block.parameter_blocks();
    // Gauss-Newton contributions over free blocks.
    for (size_t a = 0; a < ids.size(); ++a) {
      const int ia = ids[a];
      if (layout.offset[ia] < 0) continue;
      const Eigen::MatrixXd& ja = jacs[a];
      const Eigen::VectorXd g_a = weight * ja.transpose() * r;
      if (layout.eliminated[ia]) {
        const int j = landmark_index[ia];
        ne.b_l[j] -= g_a;
        grad.segment(layout.pose_dim + layout.offset[ia], 3) += g_a;
      } else {
        ne.b_p.segment(layout.offset[ia], ja.cols()) -= g_a;
        grad.segment(layout.offset[ia], ja.cols()) += g_a;
      }
      for (size_t b = a; b < ids.size(); ++b) {
        const int ib = ids[b];
        if (layout.offset[ib] < 0) continue;
        const Eigen::MatrixXd& jb = jacs[b];
        const Eigen::MatrixXd h_ab = weight * ja.transpose() * jb;
        const bool ea = layout.eliminated[ia], eb = layout.eliminated[ib];
        if (!ea && !eb) {
          ne.h_pp.block(layout.offset[ia], layout.offset[ib], ja.cols(),
                        jb.cols()) += h_ab;
          if (ia != ib) {
            ne.h_pp.block(layout.offset[ib], layout.offset[ia], jb.cols(),
                          ja.cols()) += h_ab.transpose();
          }
        } else if (ea && eb) {
          if (ia != ib) {
            throw config_error(
                "schur elimination: residual couples two landmark blocks");
          }
          ne.c[landmark_index[ia]] += h_ab;
        } else if (!ea && eb) {
          ne.w[landmark_index[ib]].block(layout.offset[ia], 0, ja.cols(), 3) +=
              h_ab;
        } else {  // ea && !eb
          ne.w[landmark_index[ia]].block(layout.offset[ib], 0, jb.cols(), 3) +=
              h_ab.transpose();
        }
      }
    }
  }
  ne.gradient_inf_norm =
      grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (!std::isfinite(ne.cost)) ne.ok = false;
  return ne;
}

// Damped solve of the assembled system. Returns false on factorization
// failure or a non-finite step.
bool solve_normal_equations(const NormalEquations& ne,
                            const TangentLayout& layout, double lambda,
                            Eigen::VectorXd* delta_pose,
                            std::vector<Eigen::Vector3d>* delta_landmark) {
  const int nl = static_cast<int>(layout.landmark_blocks.size());
  Eigen::MatrixXd s = ne.h_pp;
  for (int i = 0; i < s.rows(); ++i) {
    s(i, i) += lambda * std::max(ne.h_pp(i, i), 1e-12);
  }
  Eigen::VectorXd rhs = ne.b_p;

  std::vector<Eigen::Matrix3d> c_inv(nl);
  for (int j = 0; j < nl; ++j) {
    Eigen::Matrix3d c = ne.c[j];
    for (int i = 0; i < 3; ++i) {
      c(i, i) += lambda * std::max(ne.c[j](i, i), 1e-12);
    }
    Eigen::LDLT<Eigen::Matrix3d> ldlt(c);
    if (ldlt.info() != Eigen::Success) return false;
    c_inv[j] = ldlt.solve(Eigen::Matrix3d::Identity());
    if (!c_inv[j].allFinite()) return false;
    s -= ne.w[j] * c_inv[j] * ne.w[j].transpose();
    rhs -= ne.w[j] * (c_inv[j] * ne.b_l[j]);
  }

  if (s.rows() > 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
    if (ldlt.info() != Eigen::Success) return false;
    *delta_pose = ldlt.solve(rhs);
    if (!delta_pose->allFinite()) return false;
  } else {
    delta_pose->resize(0);
  }

  delta_landmark->assign(nl, Eigen::Vector3d::Zero());
  for (int j = 0; j < nl; ++j) {
    Eigen::Vector3d rhs_l = ne.b_l[j];
    if (layout.pose_dim > 0) rhs_l -= ne.w[j].transpose() * *delta_pose;
    (*delta_landmark)[j] = c_inv[j] * rhs_l;
    if (!(*delta_landmark)[j].allFinite()) return false;
  }
  return true;
}

void apply_step(LeastSquaresProblem& problem, const TangentLayout& layout,
                const Eigen::VectorXd& delta_pose,
                const std::vector<Eigen::Vector3d>& delta_landmark) {
  for (int id = 0; id < problem.block_count(); ++id) {
    if (layout.offset[id] < 0) continue;
    if (layout.eliminated[id]) continue;
    problem.apply_delta(
        id, delta_pose.segment(layout.offset[id], problem.tangent_dim(id)));
  }
  for (size_t j = 0; j < layout.landmark_blocks.size(); ++j) {
    problem.apply_delta(layout.landmark_blocks[j], delta_landmark[j]);
  }
}

}  // namespace

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kConverged:
      return "converged";
    case Termination::kMaxIterations:
      return "max-iter";
    case Termination::kStalled:
      return "stalled";
    case Termination::kNumericalFailure:
      return "numerical-failure";
  }
  return "unknown";
}

double evaluate_cost(const LeastSquaresProblem& problem) {
  return evaluate_all(problem).cost;
}

SolveReport solve(LeastSquaresProblem& problem, const SolveOptions& opts) {
  SolveReport report;

  int n_eliminable = 0;
  for (int id = 0; id < problem.block_count(); ++id) {
    if (problem.is_block_eliminable(id) && !problem.is_block_fixed(id)) {
      ++n_eliminable;
    }
  }
  const bool use_schur = n_eliminable > opts.schur_landmark_threshold;
  const TangentLayout layout = make_layout(problem, use_schur);

  auto best = problem.snapshot();
  double lambda = opts.lambda_init;

  NormalEquations ne = assemble(problem, layout);
  if (!ne.ok) {
    problem.restore(best);
    report.termination = Termination::kNumericalFailure;
    report.initial_cost = report.final_cost =
        std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  report.initial_cost = ne.cost;
  report.cost_history.push_back(ne.cost);
  double cost = ne.cost;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    if (ne.gradient_inf_norm < opts.gradient_tol) {
      report.termination = Termination::kConverged;
      break;
    }

    bool accepted = false;
    while (true) {
      Eigen::VectorXd delta_pose;
      std::vector<Eigen::Vector3d> delta_landmark;
      const bool factorized = solve_normal_equations(ne, layout, lambda,
                                                     &delta_pose,
                                                     &delta_landmark);
      if (factorized) {
        auto before = problem.snapshot();
        apply_step(problem, layout, delta_pose, delta_landmark);
        const Evaluation cand =
            evaluate_all(problem, &ne.active, &ne.block_costs);
        if (cand.finite && cand.cost < cost) {
          accepted = true;
          ++report.iterations;
          cost = cand.cost;
          report.cost_history.push_back(cost);
          best = problem.snapshot();
          lambda = std::max(lambda * 0.5, opts.lambda_min);
          break;
        }
        problem.restore(before);
      }
      lambda *= 10.0;
      if (lambda > opts.lambda_max) {
        problem.restore(best);
        report.termination =
            factorized ? Termination::kStalled : Termination::kNumericalFailure;
        break;
      }
    }
    if (!accepted) break;

    const double prev = report.cost_history[report.cost_history.size() - 2];
    const double rel_decrease =
        (prev - cost) / std::max(prev, std::numeric_limits<double>::min());
    ne = assemble(problem, layout);
    if (!ne.ok) {
      problem.restore(best);
      report.termination = Termination::kNumericalFailure;
      break;
    }
    if (rel_decrease < opts.rel_cost_tol) {
      report.termination = Termination::kConverged;
      break;
    }
    if (iter + 1 == opts.max_iterations) {
      report.termination = Termination::kMaxIterations;
    }
  }

  report.final_cost = cost;
  report.dropped_residuals = ne.dropped;
  return report;
}

JacobianCheckResult validate_jacobians(LeastSquaresProblem& problem,
                                       double step) {
  JacobianCheckResult result;
  const auto snap = problem.snapshot();
  const auto& residuals = problem.residuals();

  Eigen::VectorXd r0;
  std::vector<Eigen::MatrixXd> jacs;
  for (size_t i = 0; i < residuals.size(); ++i) {
    const ResidualBlock& block = *residuals[i];
    jacs.clear();
    if (!block.evaluate(problem, &r0, &jacs)) continue;
    const auto& ids = block.parameter_blocks();
    for (size_t slot = 0; slot < ids.size(); ++slot) {
      const int id = ids[slot];
      const int tdim = problem.tangent_dim(id);
      Eigen::MatrixXd j_fd(block.dim(), tdim);
      bool valid = true;
      for (int c = 0; c < tdim && valid; ++c) {
        Eigen::VectorXd delta = Eigen::VectorXd::Zero(tdim);
        Eigen::VectorXd r_plus, r_minus;
        delta[c] = step;
        problem.apply_delta(id, delta);
        valid = block.evaluate(problem, &r_plus, nullptr);
        problem.set_value(id, snap[id]);
        delta[c] = -step;
        problem.apply_delta(id, delta);
        valid = valid && block.evaluate(problem, &r_minus, nullptr);
        problem.set_value(id, snap[id]);
        if (valid) j_fd.col(c) = (r_plus - r_minus) / (2.0 * step);
      }
      if (!valid) continue;
      const double scale = std::max(1.0, jacs[slot].cwiseAbs().maxCoeff());
      const double rel =
          (j_fd - jacs[slot]).cwiseAbs().maxCoeff() / scale;
      result.entries.push_back(
          {static_cast<int>(i), static_cast<int>(slot), rel});
      result.max_rel_error = std::max(result.max_rel_error, rel);
    }
  }
  problem.restore(snap);
  return result;
}

}  // namespace viinit
