// Copyright 2026 The CRAFT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Conflict-resolving projections on flat vectors.
//
// Every client contributes one row u_i (its normalized update) and one
// positive target rho_i. A direction g is conflict-free when U g = rho,
// i.e. <u_i, g> = rho_i > 0 for every row. The feasible set is affine, so
// the closest feasible point to a reference r is
//
//   g = r + U^T (U U^T)^+ (rho - U r)
//
// and the minimum-norm feasible point is the same formula with r = 0.
// The pseudoinverse is taken through the m x m Gram matrix, which keeps the
// cost at O(d m^2 + m^3) with m clients and d parameters.

#include <Eigen/Dense>

namespace craft {

inline constexpr double kDefaultEpsilon = 1e-8;
inline constexpr double kDefaultRankTol = 1e-10;

// Returns v / (||v|| + epsilon). The zero vector maps to itself.
// Throws InvalidInputError for non-finite components or epsilon <= 0.
Eigen::VectorXd Normalize(const Eigen::Ref<const Eigen::VectorXd>& v,
                          double epsilon = kDefaultEpsilon);

// Rows are normalized client directions: 0 < ||u_i|| <= 1.
class AlignmentMatrix {
 public:
  // Validates shape (m >= 1, d >= 1) and row norms.
  explicit AlignmentMatrix(Eigen::MatrixXd rows);

  // Builds the matrix by applying Normalize() to each raw direction.
  static AlignmentMatrix FromDirections(const Eigen::MatrixXd& directions,
                                        double epsilon = kDefaultEpsilon);

  const Eigen::MatrixXd& rows() const { return rows_; }
  Eigen::Index num_rows() const { return rows_.rows(); }
  Eigen::Index dim() const { return rows_.cols(); }

 private:
  Eigen::MatrixXd rows_;
};

struct GramSolution {
  Eigen::VectorXd y;
  int rank = 0;
};

// Minimum-norm least-squares solution of (U U^T) y = b. Eigenvalues below
// rank_tol * lambda_max are treated as zero.
GramSolution GramSolve(const AlignmentMatrix& u,
                       const Eigen::Ref<const Eigen::VectorXd>& b,
                       double rank_tol = kDefaultRankTol);

struct ProjectionResult {
  Eigen::VectorXd direction;   // reference + correction
  Eigen::VectorXd correction;  // always in the row space of U
  Eigen::VectorXd residual;    // U * direction - targets
  int gram_rank = 0;
};

// Closest point to `reference` on {g : U g = targets}. When the system is
// inconsistent (rank-deficient U), returns the least-squares projection and
// reports the constraint violation in `residual` instead of failing.
ProjectionResult CraftCorrect(const AlignmentMatrix& u,
                              const Eigen::Ref<const Eigen::VectorXd>& targets,
                              const Eigen::Ref<const Eigen::VectorXd>& reference,
                              double rank_tol = kDefaultRankTol);

// Minimum-norm direction satisfying U g = targets; CraftCorrect with a zero
// reference.
ProjectionResult ConfigDirection(const AlignmentMatrix& u,
                                 const Eigen::Ref<const Eigen::VectorXd>& targets,
                                 double rank_tol = kDefaultRankTol);

}  // namespace craft
