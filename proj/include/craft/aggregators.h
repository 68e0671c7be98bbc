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

// Server-side aggregation strategies. Every strategy consumes the same list of
// client updates and returns one direction g_t of dimension d; the server
// then steps theta_{t+1} = theta_t - eta_g * g_t.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "craft/layout.h"
#include "craft/projection.h"

namespace craft {

// One client's contribution to a round.
struct ClientUpdate {
  int client_id = 0;
  double weight = 1.0;    // local data size, renormalized over the round
  Eigen::VectorXd delta;  // theta_t - theta_final
};

enum class AggregatorKind {
  kFedAvg,
  kFedProx,   // client-side proximal term; averages on the server
  kFedNova,   // client-side step normalization; averages on the server
  kFedAvgM,
  kFedAdagrad,
  kFedAdam,
  kFedYogi,
  kConfig,    // layer-wise minimum-norm conflict-free direction
  kCraft,
};

std::string_view AggregatorName(AggregatorKind kind);
// Throws InvalidInputError for unknown names.
AggregatorKind ParseAggregatorKind(std::string_view name);

struct AggregatorState {
  AggregatorKind kind = AggregatorKind::kFedAvg;
  std::optional<Eigen::VectorXd> prev_update;  // CRAFT reference source
  std::optional<Eigen::VectorXd> momentum;
  std::optional<Eigen::VectorXd> second_moment;
  int round = 0;
};

struct CraftOptions {
  double epsilon = kDefaultEpsilon;
  double tau = 1e-6;  // per-layer active-set threshold on ||g_i^q||
  double rank_tol = kDefaultRankTol;
  // false yields the layer-wise ConFIG baseline (zero reference every round).
  bool use_reference = true;
};

struct LayerDiagnostics {
  int active_count = 0;  // 0 means the layer fell back to weighted averaging
  int gram_rank = 0;
  double residual_norm = 0.0;
};

struct AggregationDiagnostics {
  std::vector<LayerDiagnostics> layers;
  // Positions (into the update list) of clients active in at least one layer.
  std::vector<int> active_clients;

  // sqrt of the summed squared per-layer residual norms.
  double residual_norm() const;
  // True when every projected layer had a full-rank Gram matrix.
  bool full_rank() const;
  std::vector<int> gram_ranks() const;
};

// rho_i = weight_i / sum_j weight_j. Throws on an empty list or weight <= 0.
Eigen::VectorXd BuildTargets(std::span<const ClientUpdate> updates);

struct ActiveSet {
  std::vector<int> indices;
  Eigen::VectorXd targets;  // base targets renormalized over `indices`

  bool empty() const { return indices.empty(); }
};

// Keeps clients whose layer norm is at least tau. An empty result means the
// layer should fall back to plain weighted averaging.
ActiveSet SelectActive(const Eigen::Ref<const Eigen::VectorXd>& norms, double tau,
                       const Eigen::Ref<const Eigen::VectorXd>& base_targets);

// Layer-wise CRAFT. Projects the normalized previous global update (zero on
// the first round) onto each layer's conflict-free affine set. On return,
// state.prev_update holds the result and state.round is advanced.
Eigen::VectorXd CraftAggregate(std::span<const ClientUpdate> updates,
                               AggregatorState& state, const LayerLayout& layout,
                               const CraftOptions& options,
                               AggregationDiagnostics* diagnostics = nullptr);

// Weighted average with targets from BuildTargets().
Eigen::VectorXd FedAvgAggregate(std::span<const ClientUpdate> updates);

// Heavy-ball buffer v <- beta * v + avg; returns v.
Eigen::VectorXd ServerMomentumStep(AggregatorState& state,
                                   const Eigen::Ref<const Eigen::VectorXd>& avg,
                                   double beta);

enum class AdaptiveVariant { kAdagrad, kAdam, kYogi };

struct AdaptiveOptions {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 1e-3;
};

// FedOpt-style preconditioned direction m / (sqrt(v) + tau). Adagrad carries
// no first moment (m = avg) and accumulates v += avg^2.
Eigen::VectorXd AdaptiveServerStep(AggregatorState& state,
                                   const Eigen::Ref<const Eigen::VectorXd>& avg,
                                   AdaptiveVariant variant,
                                   const AdaptiveOptions& options);

// Number of clients whose raw update has a negative inner product with g.
int CountConflicts(std::span<const ClientUpdate> updates,
                   const Eigen::Ref<const Eigen::VectorXd>& g);
// Same, restricted to the given positions in `updates`.
int CountConflicts(std::span<const ClientUpdate> updates,
                   const Eigen::Ref<const Eigen::VectorXd>& g,
                   std::span<const int> positions);

struct AggregatorOptions {
  CraftOptions craft;
  double momentum = 0.9;
  AdaptiveOptions adaptive;
};

// Uniform round-level interface over all strategies.
class Aggregator {
 public:
  virtual ~Aggregator() = default;

  virtual Eigen::VectorXd Aggregate(std::span<const ClientUpdate> updates,
                                    const LayerLayout& layout,
                                    AggregationDiagnostics* diagnostics) = 0;

  const AggregatorState& state() const { return state_; }
  AggregatorKind kind() const { return state_.kind; }

 protected:
  explicit Aggregator(AggregatorKind kind) { state_.kind = kind; }
  AggregatorState state_;
};

std::unique_ptr<Aggregator> MakeAggregator(AggregatorKind kind,
                                           const AggregatorOptions& options);

}  // namespace craft
