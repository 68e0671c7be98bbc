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

#include "craft/simulation.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <thread>

#include "craft/errors.h"
#include "craft/rng.h"

namespace craft {
namespace {

void Require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

AggregatorOptions AggregatorSpec::options() const {
  AggregatorOptions o;
  o.craft.epsilon = epsilon;
  o.craft.tau = tau;
  o.craft.rank_tol = rank_tol;
  o.momentum = momentum;
  o.adaptive.beta1 = beta1;
  o.adaptive.beta2 = beta2;
  o.adaptive.tau = adapt_tau;
  return o;
}

void ExperimentConfig::Validate() const {
  const DatasetSpec& d = dataset;
  if (d.kind == DatasetSpec::Kind::kSynthetic) {
    Require(d.classes >= 2, "dataset.classes must be at least 2");
    Require(d.features >= 1, "dataset.features must be at least 1");
    Require(d.samples >= 1, "dataset.samples must be at least 1");
    Require(d.class_sep >= 0.0, "dataset.class_sep must be non-negative");
  } else {
    Require(!d.images.empty(), "dataset.images is required for idx datasets");
    Require(!d.labels.empty(), "dataset.labels is required for idx datasets");
  }
  for (int h : hidden_dims) Require(h >= 1, "model.hidden entries must be at least 1");

  const FederationSpec& f = federation;
  Require(f.num_clients >= 1, "federation.clients must be at least 1");
  Require(f.clients_per_round >= 1, "federation.clients_per_round must be at least 1");
  Require(f.clients_per_round <= f.num_clients,
          "federation.clients_per_round (" + std::to_string(f.clients_per_round) +
              ") exceeds federation.clients (" + std::to_string(f.num_clients) + ")");
  Require(f.rounds >= 1, "federation.rounds must be at least 1");
  Require(f.server_lr >= 0.0 && std::isfinite(f.server_lr),
          "federation.server_lr must be non-negative");
  Require(f.client_lr > 0.0 && std::isfinite(f.client_lr),
          "federation.client_lr must be positive");
  Require(f.lr_decay > 0.0 && f.lr_decay <= 1.0, "federation.lr_decay must lie in (0, 1]");
  Require(f.batch_size >= 1, "federation.batch_size must be at least 1");
  Require(f.local_steps >= 0, "federation.local_steps must be non-negative");
  Require(f.dirichlet_alpha > 0.0, "federation.dirichlet_alpha must be positive");
  Require(f.min_per_client >= 2, "federation.min_per_client must be at least 2");
  Require(f.train_fraction > 0.0 && f.train_fraction < 1.0,
          "federation.train_fraction must lie in (0, 1)");
  Require(f.prox_mu >= 0.0, "federation.prox_mu must be non-negative");
  Require(f.eval_every >= 1, "federation.eval_every must be at least 1");
  Require(f.threads >= 1, "federation.threads must be at least 1");

  const AggregatorSpec& a = aggregator;
  Require(a.epsilon > 0.0, "aggregator.epsilon must be positive");
  Require(a.tau > 0.0, "aggregator.tau must be positive");
  Require(a.rank_tol > 0.0, "aggregator.rank_tol must be positive");
  Require(a.momentum >= 0.0 && a.momentum < 1.0, "aggregator.momentum must lie in [0, 1)");
  Require(a.beta1 >= 0.0 && a.beta1 < 1.0, "aggregator.beta1 must lie in [0, 1)");
  Require(a.beta2 >= 0.0 && a.beta2 < 1.0, "aggregator.beta2 must lie in [0, 1)");
  Require(a.adapt_tau > 0.0, "aggregator.adapt_tau must be positive");
}

Summary Summarize(std::span<const double> accuracies) {
  if (accuracies.empty()) throw InvalidInputError("Summarize: no accuracies");
  std::vector<double> sorted(accuracies.begin(), accuracies.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const std::size_t k = std::max<std::size_t>(1, n / 10);

  Summary s;
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  s.worst10 = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k),
                              0.0) / static_cast<double>(k);
  s.best10 = std::accumulate(sorted.end() - static_cast<std::ptrdiff_t>(k), sorted.end(),
                             0.0) / static_cast<double>(k);
  double sq = 0.0;
  for (double a : sorted) sq += (a - s.mean) * (a - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(n));
  // Rounding in the partial means must not break best10 >= mean >= worst10.
  s.best10 = std::max(s.best10, s.mean);
  s.worst10 = std::min(s.worst10, s.mean);
  return s;
}

std::vector<int> SampleClients(int num_clients, int per_round, int round,
                               std::uint64_t seed) {
  if (per_round < 1 || per_round > num_clients) {
    throw InvalidInputError("SampleClients: cannot sample " + std::to_string(per_round) +
                            " of " + std::to_string(num_clients) + " clients");
  }
  std::vector<int> ids(num_clients);
  std::iota(ids.begin(), ids.end(), 0);
  if (per_round < num_clients) {
    Rng rng(DeriveSeed(seed, {static_cast<std::uint64_t>(round)}));
    for (int i = 0; i < per_round; ++i) {
      std::uniform_int_distribution<int> pick(i, num_clients - 1);
      std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(per_round);
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

std::vector<double> Evaluate(const MlpSpec& spec, const ParamVector& params,
                             const Dataset& data, const Partition& partition) {
  std::vector<double> acc(partition.num_clients());
  for (std::size_t k = 0; k < partition.num_clients(); ++k) {
    acc[k] = Accuracy(spec, params, data, partition.test[k]);
  }
  return acc;
}

Dataset LoadDataset(const DatasetSpec& spec, std::uint64_t seed,
                    const std::string& base_dir) {
  if (spec.kind == DatasetSpec::Kind::kSynthetic) {
    return SyntheticTask(spec.classes, spec.features, spec.samples, spec.class_sep, seed);
  }
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base_dir.empty()) path = std::filesystem::path(base_dir) / path;
    return path;
  };
  return LoadIdx(resolve(spec.images), resolve(spec.labels), spec.limit);
}

Simulation::Simulation(ExperimentConfig config, const std::string& base_dir)
    : config_(std::move(config)) {
  config_.Validate();
  data_ = LoadDataset(config_.dataset, config_.seeds.data, base_dir);
  Setup();
}

Simulation::Simulation(ExperimentConfig config, Dataset data)
    : config_(std::move(config)), data_(std::move(data)) {
  config_.Validate();
  Setup();
}

void Simulation::Setup() {
  data_.Validate();
  const FederationSpec& f = config_.federation;
  partition_ = DirichletPartition(data_.labels, data_.num_classes, f.num_clients,
                                  f.dirichlet_alpha, f.min_per_client,
                                  config_.seeds.partition);
  SplitClients(partition_, f.train_fraction, DeriveSeed(config_.seeds.partition, {1}));

  model_.input_dim = static_cast<int>(data_.num_features());
  model_.hidden_dims = config_.hidden_dims;
  model_.output_dim = data_.num_classes;
  model_.activation = config_.activation;
  params_ = InitParams(model_, config_.seeds.init);
  aggregator_ = MakeAggregator(config_.aggregator.kind, config_.aggregator.options());
}

void Simulation::set_params(ParamVector params) {
  if (!(params.layout == params_.layout)) {
    throw InvalidInputError("set_params: layout does not match the model");
  }
  params_ = std::move(params);
}

ClientUpdate Simulation::TrainClient(int client, int round, double lr) const {
  const FederationSpec& f = config_.federation;
  const std::vector<std::size_t>& train = partition_.train[client];
  LocalTrainOptions opt;
  opt.lr = lr;
  opt.batch_size = f.batch_size;
  opt.steps = f.local_steps > 0
                  ? f.local_steps
                  : static_cast<int>((train.size() + f.batch_size - 1) / f.batch_size);
  opt.seed = DeriveSeed(config_.seeds.training, {static_cast<std::uint64_t>(round),
                                                 static_cast<std::uint64_t>(client)});
  opt.prox_mu = config_.aggregator.kind == AggregatorKind::kFedProx ? f.prox_mu : 0.0;

  ClientUpdate u;
  u.client_id = client;
  u.weight = static_cast<double>(train.size());
  try {
    u.delta = ClientDelta(params_, LocalTrain(model_, params_, data_, train, opt));
  } catch (const std::exception& e) {
    throw InvalidInputError("round " + std::to_string(round) + ", client " +
                            std::to_string(client) + ": " + e.what());
  }
  if (config_.aggregator.kind == AggregatorKind::kFedNova) {
    u.delta /= static_cast<double>(opt.steps);  // rescaled by tau_eff below
  }
  return u;
}

RoundRecord Simulation::RunRound(int round) {
  if (round != next_round_) {
    throw InvalidInputError("RunRound: expected round " + std::to_string(next_round_) +
                            ", got " + std::to_string(round));
  }
  const auto start = std::chrono::steady_clock::now();
  const FederationSpec& f = config_.federation;
  const double lr = f.client_lr * std::pow(f.lr_decay, round);

  RoundRecord rec;
  rec.round = round;
  rec.sampled = SampleClients(f.num_clients, f.clients_per_round, round,
                              config_.seeds.sampling);

  // Slots are indexed by position in the sorted sample, so worker scheduling
  // cannot change the order seen by the aggregator.
  std::vector<ClientUpdate> updates(rec.sampled.size());
  const int workers =
      std::min<int>(f.threads, static_cast<int>(rec.sampled.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < rec.sampled.size(); ++i) {
      updates[i] = TrainClient(rec.sampled[i], round, lr);
    }
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < rec.sampled.size(); i += workers) {
              updates[i] = TrainClient(rec.sampled[i], round, lr);
            }
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  if (config_.aggregator.kind == AggregatorKind::kFedNova) {
    const Eigen::VectorXd rho = BuildTargets(updates);
    double tau_eff = 0.0;
    for (std::size_t i = 0; i < updates.size(); ++i) {
      const auto& train = partition_.train[updates[i].client_id];
      const double steps = f.local_steps > 0
                               ? f.local_steps
                               : std::ceil(static_cast<double>(train.size()) / f.batch_size);
      tau_eff += rho[static_cast<Eigen::Index>(i)] * steps;
    }
    for (ClientUpdate& u : updates) u.delta *= tau_eff;
  }

  AggregationDiagnostics diag;
  Eigen::VectorXd g;
  try {
    g = aggregator_->Aggregate(updates, params_.layout, &diag);
  } catch (const NumericalError& e) {
    throw NumericalError("round " + std::to_string(round) + ": " + e.what());
  }

  if (observer_) {
    observer_(RoundView{round, &params_, updates, &g, &diag});
  }

  params_.values -= f.server_lr * g;

  rec.conflicts = CountConflicts(updates, g);
  rec.active_conflicts = CountConflicts(updates, g, diag.active_clients);
  rec.residual_norm = diag.residual_norm();
  rec.full_rank = diag.full_rank();
  rec.gram_ranks = diag.gram_ranks();

  if ((round + 1) % f.eval_every == 0 || round + 1 == f.rounds) {
    rec.accuracies = Evaluate(model_, params_, data_, partition_);
    rec.summary = Summarize(rec.accuracies);
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  ++next_round_;
  return rec;
}

std::vector<RoundRecord> Simulation::Run() {
  std::vector<RoundRecord> out;
  out.reserve(config_.federation.rounds);
  for (int t = next_round_; t < config_.federation.rounds; ++t) {
    out.push_back(RunRound(t));
  }
  return out;
}

Eigen::VectorXd Simulation::GlobalGradient(const ParamVector& params) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.values.size());
  double total = 0.0;
  for (const auto& train : partition_.train) total += static_cast<double>(train.size());
  for (const auto& train : partition_.train) {
    const LossGrad lg = LossAndGrad(model_, params, GatherRows(data_, train),
                                    GatherLabels(data_, train));
    grad += (static_cast<double>(train.size()) / total) * lg.grad;
  }
  return grad;
}

std::vector<RoundRecord> RunExperiment(const ExperimentConfig& config,
                                       const std::string& base_dir) {
  return Simulation(config, base_dir).Run();
}

}  // namespace craft
