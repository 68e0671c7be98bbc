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

#include "craft/aggregators.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "craft/errors.h"

namespace craft {
namespace {

struct KindName {
  AggregatorKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {AggregatorKind::kFedAvg, "fedavg"},     {AggregatorKind::kFedProx, "fedprox"},
    {AggregatorKind::kFedNova, "fednova"},   {AggregatorKind::kFedAvgM, "fedavgm"},
    {AggregatorKind::kFedAdagrad, "fedadagrad"},
    {AggregatorKind::kFedAdam, "fedadam"},   {AggregatorKind::kFedYogi, "fedyogi"},
    {AggregatorKind::kConfig, "config"},     {AggregatorKind::kCraft, "craft"},
};

void ValidateUpdates(std::span<const ClientUpdate> updates, Eigen::Index dim) {
  if (updates.empty()) {
    throw InvalidInputError("aggregation needs at least one client update");
  }
  for (const ClientUpdate& u : updates) {
    if (u.delta.size() != dim) {
      throw InvalidInputError("client " + std::to_string(u.client_id) +
                              ": update has dimension " +
                              std::to_string(u.delta.size()) + ", expected " +
                              std::to_string(dim));
    }
    if (!u.delta.allFinite()) {
      throw InvalidInputError("client " + std::to_string(u.client_id) +
                              ": update has non-finite components");
    }
  }
}

// out[j] = sum_i weights_i * delta_i[j] over [offset, offset + length), in
// client order. FedAvg and the CRAFT fallback share this loop so the two
// agree bitwise.
void WeightedAverageInto(std::span<const ClientUpdate> updates,
                         const Eigen::VectorXd& weights, const LayerSpan& span,
                         Eigen::VectorXd& out) {
  double* dst = out.data() + span.offset;
  std::fill(dst, dst + span.length, 0.0);
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const double w = weights[static_cast<Eigen::Index>(i)];
    const double* src = updates[i].delta.data() + span.offset;
    for (std::size_t j = 0; j < span.length; ++j) {
      dst[j] += w * src[j];
    }
  }
}

}  // namespace

std::string_view AggregatorName(AggregatorKind kind) {
  for (const KindName& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

AggregatorKind ParseAggregatorKind(std::string_view name) {
  for (const KindName& k : kKindNames) {
    if (k.name == name) return k.kind;
  }
  throw InvalidInputError("unknown aggregator '" + std::string(name) + "'");
}

double AggregationDiagnostics::residual_norm() const {
  double sq = 0.0;
  for (const LayerDiagnostics& l : layers) sq += l.residual_norm * l.residual_norm;
  return std::sqrt(sq);
}

bool AggregationDiagnostics::full_rank() const {
  return std::all_of(layers.begin(), layers.end(), [](const LayerDiagnostics& l) {
    return l.active_count == 0 || l.gram_rank == l.active_count;
  });
}

std::vector<int> AggregationDiagnostics::gram_ranks() const {
  std::vector<int> ranks;
  ranks.reserve(layers.size());
  for (const LayerDiagnostics& l : layers) ranks.push_back(l.gram_rank);
  return ranks;
}

Eigen::VectorXd BuildTargets(std::span<const ClientUpdate> updates) {
  if (updates.empty()) {
    throw InvalidInputError("BuildTargets: no client updates");
  }
  Eigen::VectorXd rho(static_cast<Eigen::Index>(updates.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const double w = updates[i].weight;
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw InvalidInputError("client " + std::to_string(updates[i].client_id) +
                              ": weight must be positive");
    }
    rho[static_cast<Eigen::Index>(i)] = w;
    total += w;
  }
  return rho / total;
}

ActiveSet SelectActive(const Eigen::Ref<const Eigen::VectorXd>& norms, double tau,
                       const Eigen::Ref<const Eigen::VectorXd>& base_targets) {
  if (norms.size() != base_targets.size()) {
    throw InvalidInputError("SelectActive: norms and targets differ in length");
  }
  ActiveSet out;
  double mass = 0.0;
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (norms[i] >= tau) {
      out.indices.push_back(static_cast<int>(i));
      mass += base_targets[i];
    }
  }
  out.targets.resize(static_cast<Eigen::Index>(out.indices.size()));
  for (std::size_t k = 0; k < out.indices.size(); ++k) {
    out.targets[static_cast<Eigen::Index>(k)] = base_targets[out.indices[k]] / mass;
  }
  return out;
}

Eigen::VectorXd CraftAggregate(std::span<const ClientUpdate> updates,
                               AggregatorState& state, const LayerLayout& layout,
                               const CraftOptions& options,
                               AggregationDiagnostics* diagnostics) {
  const auto dim = static_cast<Eigen::Index>(layout.dim());
  ValidateUpdates(updates, dim);
  const bool has_reference = options.use_reference && state.prev_update.has_value();
  if (has_reference && state.prev_update->size() != dim) {
    throw InvalidInputError("CraftAggregate: stored previous update has dimension " +
                            std::to_string(state.prev_update->size()) +
                            ", expected " + std::to_string(dim));
  }

  const Eigen::VectorXd rho = BuildTargets(updates);
  const auto m = static_cast<Eigen::Index>(updates.size());
  Eigen::VectorXd g(dim);
  std::vector<char> ever_active(updates.size(), 0);
  AggregationDiagnostics diag;
  diag.layers.reserve(layout.num_layers());

  for (const LayerSpan& span : layout.spans()) {
    const auto off = static_cast<Eigen::Index>(span.offset);
    const auto len = static_cast<Eigen::Index>(span.length);

    Eigen::VectorXd norms(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      norms[i] = updates[i].delta.segment(off, len).norm();
    }
    const ActiveSet active = SelectActive(norms, options.tau, rho);

    LayerDiagnostics ld;
    if (active.empty()) {
      WeightedAverageInto(updates, rho, span, g);
      diag.layers.push_back(ld);
      continue;
    }

    Eigen::MatrixXd rows(static_cast<Eigen::Index>(active.indices.size()), len);
    for (std::size_t k = 0; k < active.indices.size(); ++k) {
      const ClientUpdate& u = updates[active.indices[k]];
      rows.row(static_cast<Eigen::Index>(k)) =
          Normalize(u.delta.segment(off, len), options.epsilon).transpose();
      ever_active[active.indices[k]] = 1;
    }
    const AlignmentMatrix mat(std::move(rows));

    const Eigen::VectorXd reference =
        has_reference ? Normalize(state.prev_update->segment(off, len), options.epsilon)
                      : Eigen::VectorXd::Zero(len);
    ProjectionResult proj;
    try {
      proj = CraftCorrect(mat, active.targets, reference, options.rank_tol);
    } catch (const NumericalError& e) {
      throw NumericalError("round " + std::to_string(state.round) + ", layer at offset " +
                           std::to_string(span.offset) + ": " + e.what());
    }
    g.segment(off, len) = proj.direction;

    ld.active_count = static_cast<int>(active.indices.size());
    ld.gram_rank = proj.gram_rank;
    ld.residual_norm = proj.residual.norm();
    diag.layers.push_back(ld);
  }

  for (std::size_t i = 0; i < ever_active.size(); ++i) {
    if (ever_active[i]) diag.active_clients.push_back(static_cast<int>(i));
  }
  if (diagnostics != nullptr) *diagnostics = std::move(diag);

  if (options.use_reference) state.prev_update = g;
  ++state.round;
  return g;
}

Eigen::VectorXd FedAvgAggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) {
    throw InvalidInputError("FedAvgAggregate: no client updates");
  }
  const auto dim = updates.front().delta.size();
  ValidateUpdates(updates, dim);
  const Eigen::VectorXd rho = BuildTargets(updates);
  Eigen::VectorXd g(dim);
  WeightedAverageInto(updates, rho, LayerSpan{0, static_cast<std::size_t>(dim)}, g);
  return g;
}

Eigen::VectorXd ServerMomentumStep(AggregatorState& state,
                                   const Eigen::Ref<const Eigen::VectorXd>& avg,
                                   double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw InvalidInputError("ServerMomentumStep: beta must lie in [0, 1)");
  }
  if (!state.momentum || state.momentum->size() != avg.size()) {
    state.momentum = Eigen::VectorXd::Zero(avg.size());
  }
  *state.momentum = beta * *state.momentum + avg;
  ++state.round;
  return *state.momentum;
}

Eigen::VectorXd AdaptiveServerStep(AggregatorState& state,
                                   const Eigen::Ref<const Eigen::VectorXd>& avg,
                                   AdaptiveVariant variant,
                                   const AdaptiveOptions& options) {
  if (!(options.beta1 >= 0.0 && options.beta1 < 1.0) ||
      !(options.beta2 >= 0.0 && options.beta2 < 1.0) || !(options.tau > 0.0)) {
    throw InvalidInputError("AdaptiveServerStep: need beta1, beta2 in [0, 1), tau > 0");
  }
  const Eigen::Index d = avg.size();
  if (!state.momentum || state.momentum->size() != d) {
    state.momentum = Eigen::VectorXd::Zero(d);
  }
  if (!state.second_moment || state.second_moment->size() != d) {
    state.second_moment = Eigen::VectorXd::Zero(d);
  }
  Eigen::VectorXd& m = *state.momentum;
  Eigen::VectorXd& v = *state.second_moment;
  const Eigen::ArrayXd sq = avg.array().square();

  switch (variant) {
    case AdaptiveVariant::kAdagrad:
      m = avg;
      v.array() += sq;
      break;
    case AdaptiveVariant::kAdam:
      m = options.beta1 * m + (1.0 - options.beta1) * avg;
      v.array() = options.beta2 * v.array() + (1.0 - options.beta2) * sq;
      break;
    case AdaptiveVariant::kYogi:
      m = options.beta1 * m + (1.0 - options.beta1) * avg;
      v.array() -= (1.0 - options.beta2) * sq * (v.array() - sq).sign();
      break;
  }
  ++state.round;
  return (m.array() / (v.array().sqrt() + options.tau)).matrix();
}

int CountConflicts(std::span<const ClientUpdate> updates,
                   const Eigen::Ref<const Eigen::VectorXd>& g) {
  int conflicts = 0;
  for (const ClientUpdate& u : updates) {
    if (u.delta.size() != g.size()) {
      throw InvalidInputError("CountConflicts: dimension mismatch for client " +
                              std::to_string(u.client_id));
    }
    if (u.delta.dot(g) < 0.0) ++conflicts;
  }
  return conflicts;
}

int CountConflicts(std::span<const ClientUpdate> updates,
                   const Eigen::Ref<const Eigen::VectorXd>& g,
                   std::span<const int> positions) {
  int conflicts = 0;
  for (int p : positions) {
    if (p < 0 || static_cast<std::size_t>(p) >= updates.size()) {
      throw InvalidInputError("CountConflicts: position out of range");
    }
    const ClientUpdate& u = updates[p];
    if (u.delta.size() != g.size()) {
      throw InvalidInputError("CountConflicts: dimension mismatch for client " +
                              std::to_string(u.client_id));
    }
    if (u.delta.dot(g) < 0.0) ++conflicts;
  }
  return conflicts;
}

namespace {

std::vector<int> AllPositions(std::size_t n) {
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  return all;
}

class AveragingAggregator : public Aggregator {
 public:
  explicit AveragingAggregator(AggregatorKind kind) : Aggregator(kind) {}

  Eigen::VectorXd Aggregate(std::span<const ClientUpdate> updates,
                            const LayerLayout& layout,
                            AggregationDiagnostics* diagnostics) override {
    ValidateUpdates(updates, static_cast<Eigen::Index>(layout.dim()));
    if (diagnostics) *diagnostics = {{}, AllPositions(updates.size())};
    ++state_.round;
    return FedAvgAggregate(updates);
  }
};

class MomentumAggregator : public Aggregator {
 public:
  explicit MomentumAggregator(double beta)
      : Aggregator(AggregatorKind::kFedAvgM), beta_(beta) {}

  Eigen::VectorXd Aggregate(std::span<const ClientUpdate> updates,
                            const LayerLayout& layout,
                            AggregationDiagnostics* diagnostics) override {
    ValidateUpdates(updates, static_cast<Eigen::Index>(layout.dim()));
    if (diagnostics) *diagnostics = {{}, AllPositions(updates.size())};
    return ServerMomentumStep(state_, FedAvgAggregate(updates), beta_);
  }

 private:
  double beta_;
};

class AdaptiveAggregator : public Aggregator {
 public:
  AdaptiveAggregator(AggregatorKind kind, AdaptiveVariant variant,
                     const AdaptiveOptions& options)
      : Aggregator(kind), variant_(variant), options_(options) {}

  Eigen::VectorXd Aggregate(std::span<const ClientUpdate> updates,
                            const LayerLayout& layout,
                            AggregationDiagnostics* diagnostics) override {
    ValidateUpdates(updates, static_cast<Eigen::Index>(layout.dim()));
    if (diagnostics) *diagnostics = {{}, AllPositions(updates.size())};
    return AdaptiveServerStep(state_, FedAvgAggregate(updates), variant_, options_);
  }

 private:
  AdaptiveVariant variant_;
  AdaptiveOptions options_;
};

class ProjectionAggregator : public Aggregator {
 public:
  ProjectionAggregator(AggregatorKind kind, const CraftOptions& options)
      : Aggregator(kind), options_(options) {
    options_.use_reference = kind == AggregatorKind::kCraft;
  }

  Eigen::VectorXd Aggregate(std::span<const ClientUpdate> updates,
                            const LayerLayout& layout,
                            AggregationDiagnostics* diagnostics) override {
    return CraftAggregate(updates, state_, layout, options_, diagnostics);
  }

 private:
  CraftOptions options_;
};

}  // namespace

std::unique_ptr<Aggregator> MakeAggregator(AggregatorKind kind,
                                           const AggregatorOptions& options) {
  switch (kind) {
    case AggregatorKind::kFedAvg:
    case AggregatorKind::kFedProx:
    case AggregatorKind::kFedNova:
      return std::make_unique<AveragingAggregator>(kind);
    case AggregatorKind::kFedAvgM:
      return std::make_unique<MomentumAggregator>(options.momentum);
    case AggregatorKind::kFedAdagrad:
      return std::make_unique<AdaptiveAggregator>(kind, AdaptiveVariant::kAdagrad,
                                                  options.adaptive);
    case AggregatorKind::kFedAdam:
      return std::make_unique<AdaptiveAggregator>(kind, AdaptiveVariant::kAdam,
                                                  options.adaptive);
    case AggregatorKind::kFedYogi:
      return std::make_unique<AdaptiveAggregator>(kind, AdaptiveVariant::kYogi,
                                                  options.adaptive);
    case AggregatorKind::kConfig:
    case AggregatorKind::kCraft:
      return std::make_unique<ProjectionAggregator>(kind, options.craft);
  }
  throw InvalidInputError("MakeAggregator: unhandled aggregator kind");
}

}  // namespace craft
