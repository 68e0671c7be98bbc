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

#include "craft/projection.h"

#include <cmath>
#include <string>

#include "craft/errors.h"

namespace craft {
namespace {

// Row norms may exceed 1 by a few ulps after normalization round-off.
constexpr double kUnitNormSlack = 1e-12;

void CheckFinite(const Eigen::Ref<const Eigen::VectorXd>& v, const char* what) {
  if (!v.allFinite()) {
    throw InvalidInputError(std::string(what) + " has non-finite components");
  }
}

}  // namespace

Eigen::VectorXd Normalize(const Eigen::Ref<const Eigen::VectorXd>& v,
                          double epsilon) {
  if (!(epsilon > 0.0)) {
    throw InvalidInputError("Normalize: epsilon must be positive");
  }
  CheckFinite(v, "Normalize: input");
  return v / (v.norm() + epsilon);
}

AlignmentMatrix::AlignmentMatrix(Eigen::MatrixXd rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1 || rows_.cols() < 1) {
    throw InvalidInputError("AlignmentMatrix: needs at least one row and column");
  }
  if (!rows_.allFinite()) {
    throw InvalidInputError("AlignmentMatrix: non-finite entries");
  }
  for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
    const double n = rows_.row(i).norm();
    if (!(n > 0.0) || n > 1.0 + kUnitNormSlack) {
      throw InvalidInputError("AlignmentMatrix: row " + std::to_string(i) +
                              " has norm " + std::to_string(n) +
                              ", expected (0, 1]");
    }
  }
}

AlignmentMatrix AlignmentMatrix::FromDirections(const Eigen::MatrixXd& directions,
                                                double epsilon) {
  Eigen::MatrixXd rows(directions.rows(), directions.cols());
  for (Eigen::Index i = 0; i < directions.rows(); ++i) {
    rows.row(i) = Normalize(directions.row(i).transpose(), epsilon).transpose();
  }
  return AlignmentMatrix(std::move(rows));
}

namespace {

// Spectral pseudoinverse of U U^T, factored once and applied many times.
class GramPseudoInverse {
 public:
  GramPseudoInverse(const Eigen::MatrixXd& rows, double rank_tol) {
    Eigen::MatrixXd gram(rows.rows(), rows.rows());
    gram.setZero();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(rows);
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) {
      throw NumericalError("GramSolve: eigendecomposition of the " +
                           std::to_string(rows.rows()) + "x" +
                           std::to_string(rows.rows()) +
                           " Gram matrix did not converge");
    }
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double cutoff = rank_tol * lambda.maxCoeff();
    inv_ = Eigen::VectorXd::Zero(lambda.size());
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
      if (lambda[k] > cutoff) {
        inv_[k] = 1.0 / lambda[k];
        ++rank_;
      }
    }
    v_ = eig.eigenvectors();
  }

  Eigen::VectorXd Apply(const Eigen::Ref<const Eigen::VectorXd>& b) const {
    return v_ * inv_.cwiseProduct(v_.transpose() * b);
  }
  int rank() const { return rank_; }

 private:
  Eigen::MatrixXd v_;
  Eigen::VectorXd inv_;
  int rank_ = 0;
};

// Forming U U^T squares the condition number of U, and for nearly parallel
// rows the Gram coefficients are large and cancel in U^T y. Refinement
// sweeps against U itself, accumulated directly on the correction, recover
// the lost digits; a sweep is kept only if it shrinks the constraint
// residual, so inconsistent systems are left alone.
constexpr int kRefinementSweeps = 2;

}  // namespace

GramSolution GramSolve(const AlignmentMatrix& u,
                       const Eigen::Ref<const Eigen::VectorXd>& b,
                       double rank_tol) {
  const Eigen::MatrixXd& rows = u.rows();
  if (b.size() != rows.rows()) {
    throw InvalidInputError("GramSolve: right-hand side has " +
                            std::to_string(b.size()) + " entries, expected " +
                            std::to_string(rows.rows()));
  }
  if (!(rank_tol > 0.0)) {
    throw InvalidInputError("GramSolve: rank_tol must be positive");
  }
  CheckFinite(b, "GramSolve: right-hand side");

  const GramPseudoInverse pinv(rows, rank_tol);
  GramSolution out;
  out.y = pinv.Apply(b);
  out.rank = pinv.rank();
  return out;
}

ProjectionResult CraftCorrect(const AlignmentMatrix& u,
                              const Eigen::Ref<const Eigen::VectorXd>& targets,
                              const Eigen::Ref<const Eigen::VectorXd>& reference,
                              double rank_tol) {
  const Eigen::MatrixXd& rows = u.rows();
  if (targets.size() != rows.rows()) {
    throw InvalidInputError("CraftCorrect: " + std::to_string(targets.size()) +
                            " targets for " + std::to_string(rows.rows()) +
                            " rows");
  }
  if (reference.size() != rows.cols()) {
    throw InvalidInputError("CraftCorrect: reference has dimension " +
                            std::to_string(reference.size()) + ", expected " +
                            std::to_string(rows.cols()));
  }
  if (!(rank_tol > 0.0)) {
    throw InvalidInputError("CraftCorrect: rank_tol must be positive");
  }
  CheckFinite(targets, "CraftCorrect: targets");
  CheckFinite(reference, "CraftCorrect: reference");

  const GramPseudoInverse pinv(rows, rank_tol);
  const Eigen::VectorXd gap = targets - rows * reference;
  Eigen::VectorXd correction = rows.transpose() * pinv.Apply(gap);
  Eigen::VectorXd miss = gap - rows * correction;
  double miss_norm = miss.norm();
  for (int sweep = 0; sweep < kRefinementSweeps && miss_norm > 0.0; ++sweep) {
    Eigen::VectorXd next = correction + rows.transpose() * pinv.Apply(miss);
    Eigen::VectorXd next_miss = gap - rows * next;
    const double next_norm = next_miss.norm();
    if (!(next_norm < miss_norm)) break;
    correction = std::move(next);
    miss = std::move(next_miss);
    miss_norm = next_norm;
  }

  ProjectionResult out;
  out.correction = std::move(correction);
  out.direction = reference + out.correction;
  out.residual = rows * out.direction - targets;
  out.gram_rank = pinv.rank();
  return out;
}

ProjectionResult ConfigDirection(const AlignmentMatrix& u,
                                 const Eigen::Ref<const Eigen::VectorXd>& targets,
                                 double rank_tol) {
  return CraftCorrect(u, targets, Eigen::VectorXd::Zero(u.dim()), rank_tol);
}

}  // namespace craft
