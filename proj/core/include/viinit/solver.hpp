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
#ifndef VIINIT_SOLVER_HPP_
#define VIINIT_SOLVER_HPP_

#include <memory>
#include <string>
#include <vector>

#include "viinit/geometry.hpp"

namespace viinit {

/// IRLS weight of the Huber loss: 1 inside the inlier region, delta/|r|
/// outside. Throws a config error for delta <= 0.
double huber_weight(double residual_norm, double delta);

/// Robust cost of a squared residual norm s: s for s <= delta^2, else
/// 2 delta sqrt(s) - delta^2. Continuous with continuous derivative.
double huber_rho(double squared_norm, double delta);

/// Orthonormal 3x2 basis of the plane orthogonal to unit vector d; the
/// chart used for 2-dof unit-vector updates d <- exp(hat(B theta)) d.
Eigen::Matrix<double, 3, 2> unit_vector_tangent_basis(const Eigen::Vector3d& d);

enum class BlockKind { kEuclidean, kRotation, kUnitVector };

class LeastSquaresProblem;

/**
 * One residual term. Implementations return pre-whitened residuals and
 * Jacobians (information already applied); the solver adds the optional
 * Huber reweighting on top.
 *
 * evaluate() returns false when the residual is undefined at the current
 * parameters (e.g. a landmark behind the camera); the solver drops the
 * block for that iteration and counts it.
 */
class ResidualBlock {
 public:
  virtual ~ResidualBlock() = default;
  virtual int dim() const = 0;
  virtual const std::vector<int>& parameter_blocks() const = 0;
  virtual bool evaluate(const LeastSquaresProblem& problem,
                        Eigen::VectorXd* residual,
                        std::vector<Eigen::MatrixXd>* jacobians) const = 0;

  double robust_delta() const { return robust_delta_; }
  void set_robust_delta(double d) { robust_delta_ = d; }

 protected:
  double robust_delta_ = 0;  ///< 0 disables the robust loss
};

/**
 * Dense nonlinear least-squares problem over manifold-valued parameter
 * blocks. Rotation blocks store 9 coefficients (column-major 3x3) and are
 * updated right-multiplicatively; unit-vector blocks have a 2-dof tangent.
 *
 * Blocks may be fixed (excluded from the update, storage untouched) or
 * marked eliminable (3-dof Euclidean landmark blocks whose Hessian block
 * is diagonalizable out via the Schur complement).
 */
class LeastSquaresProblem {
 public:
  int add_euclidean_block(const Eigen::VectorXd& value);
  int add_rotation_block(const RotationSO3& value);
  int add_unit_vector_block(const Eigen::Vector3d& direction);

  void set_block_fixed(int id, bool fixed);
  bool is_block_fixed(int id) const;
  /// Marks a 3-dof Euclidean block for Schur elimination.
  void set_block_eliminable(int id);
  bool is_block_eliminable(int id) const;

  int block_count() const { return static_cast<int>(blocks_.size()); }
  int tangent_dim(int id) const;
  BlockKind kind(int id) const;

  const Eigen::VectorXd& value(int id) const;
  void set_value(int id, const Eigen::VectorXd& v);
  RotationSO3 rotation_value(int id) const;
  Eigen::Vector3d vec3_value(int id) const;

  /// On-manifold update of one block.
  void apply_delta(int id, const Eigen::VectorXd& delta);

  std::vector<Eigen::VectorXd> snapshot() const;
  void restore(const std::vector<Eigen::VectorXd>& snap);

  void add_residual(std::unique_ptr<ResidualBlock> block);
  const std::vector<std::unique_ptr<ResidualBlock>>& residuals() const {
    return residuals_;
  }

 private:
  struct Block {
    BlockKind kind;
    Eigen::VectorXd value;
    bool fixed = false;
    bool eliminable = false;
  };
  const Block& at(int id) const;
  Block& at(int id);
  std::vector<Block> blocks_;
  std::vector<std::unique_ptr<ResidualBlock>> residuals_;
};

struct SolveOptions {
  int max_iterations = 50;
  double lambda_init = 1e-4;
  double lambda_min = 1e-12;
  double lambda_max = 1e6;
  double gradient_tol = 1e-10;
  double rel_cost_tol = 1e-9;
  /// Schur elimination kicks in above this many eliminable blocks.
  int schur_landmark_threshold = 200;
};

enum class Termination { kConverged, kMaxIterations, kStalled, kNumericalFailure };

std::string to_string(Termination t);

struct SolveReport {
  double initial_cost = 0;
  double final_cost = 0;
  int iterations = 0;
  Termination termination = Termination::kConverged;
  /// Accepted cost after every iteration, starting with the initial cost.
  std::vector<double> cost_history;
  /// Residual blocks invalid (dropped) at the last evaluation.
  int dropped_residuals = 0;

  bool usable() const {
    return termination != Termination::kNumericalFailure;
  }
};

/// Levenberg-Marquardt with multiplicative-diagonal damping. Accepted
/// cost is monotone non-increasing; on numerical failure the parameters
/// are restored to the best accepted state.
SolveReport solve(LeastSquaresProblem& problem, const SolveOptions& opts = {});

/// Total robust cost at the current parameters (invalid blocks dropped).
double evaluate_cost(const LeastSquaresProblem& problem);

struct JacobianCheckEntry {
  int residual_index = 0;
  int parameter_slot = 0;
  double rel_error = 0;
};

struct JacobianCheckResult {
  double max_rel_error = 0;
  std::vector<JacobianCheckEntry> entries;  ///< one per (residual, slot)
  bool all_below(double tol) const { return max_rel_error <= tol; }
};

/// Central finite-difference validation of every residual block's
/// analytic Jacobians through the manifold plus operation. Parameters are
/// restored on exit.
JacobianCheckResult validate_jacobians(LeastSquaresProblem& problem,
                                       double step = 1e-7);

}  // namespace viinit

#endif  // VIINIT_SOLVER_HPP_
