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

// Communication-round driver: sample clients, train locally, aggregate, step
// the server model, evaluate.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "craft/aggregators.h"
#include "craft/data.h"
#include "craft/models.h"

namespace craft {

struct DatasetSpec {
  enum class Kind { kSynthetic, kIdx };
  Kind kind = Kind::kSynthetic;
  // synthetic
  int classes = 10;
  int features = 20;
  int samples = 2000;
  double class_sep = 3.0;
  // idx
  std::string images;
  std::string labels;
  std::size_t limit = 0;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct FederationSpec {
  int num_clients = 10;
  int clients_per_round = 10;
  int rounds = 10;
  double server_lr = 1.0;
  double client_lr = 0.05;
  double lr_decay = 0.999;     // per-round factor on client_lr
  int batch_size = 50;
  int local_steps = 0;         // 0: one local epoch, ceil(|train_i| / batch)
  double dirichlet_alpha = 0.1;
  int min_per_client = 20;
  double train_fraction = 0.8;
  double prox_mu = 0.0;        // FedProx only
  int eval_every = 10;
  int threads = 1;             // client-training workers

  friend bool operator==(const FederationSpec&, const FederationSpec&) = default;
};

struct AggregatorSpec {
  AggregatorKind kind = AggregatorKind::kCraft;
  double epsilon = kDefaultEpsilon;
  double tau = 1e-6;
  double rank_tol = kDefaultRankTol;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adapt_tau = 1e-3;

  AggregatorOptions options() const;
  friend bool operator==(const AggregatorSpec&, const AggregatorSpec&) = default;
};

struct SeedSpec {
  std::uint64_t data = 1;       // synthetic task generation
  std::uint64_t partition = 2;  // Dirichlet split and local train/test split
  std::uint64_t init = 3;       // model initialization
  std::uint64_t sampling = 4;   // client sampling
  std::uint64_t training = 5;   // minibatch order

  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec dataset;
  std::vector<int> hidden_dims{200, 200};
  Activation activation = Activation::kRelu;
  FederationSpec federation;
  AggregatorSpec aggregator;
  SeedSpec seeds;

  // Throws ConfigError naming the offending key(s).
  void Validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct Summary {
  double mean = 0.0;
  double best10 = 0.0;
  double worst10 = 0.0;
  double std = 0.0;
};

// Mean, mean of the top/bottom k = max(1, floor(n / 10)) values, and the
// population standard deviation. Throws InvalidInputError when empty.
Summary Summarize(std::span<const double> accuracies);

struct RoundRecord {
  int round = 0;
  std::vector<int> sampled;             // client ids, ascending
  std::vector<double> accuracies;       // per client; empty when not evaluated
  std::optional<Summary> summary;       // set when evaluated
  int conflicts = 0;                    // sampled clients with <g_i, g> < 0
  int active_conflicts = 0;             // same, over clients in an active set
  double residual_norm = 0.0;
  bool full_rank = true;
  std::vector<int> gram_ranks;
  double wall_ms = 0.0;

  bool evaluated() const { return summary.has_value(); }
};

// Uniform sample of m of n clients without replacement, sorted; depends only
// on (seed, round).
std::vector<int> SampleClients(int num_clients, int per_round, int round,
                               std::uint64_t seed);

// Test accuracy of `params` on every client's local test split.
std::vector<double> Evaluate(const MlpSpec& spec, const ParamVector& params,
                             const Dataset& data, const Partition& partition);

// Loads or generates the configured dataset. Relative IDX paths resolve
// against `base_dir`.
Dataset LoadDataset(const DatasetSpec& spec, std::uint64_t seed,
                    const std::string& base_dir = "");

// Everything a round hands to an observer, before the server step.
struct RoundView {
  int round = 0;
  const ParamVector* params = nullptr;  // theta_t
  std::span<const ClientUpdate> updates;
  const Eigen::VectorXd* direction = nullptr;  // g_t
  const AggregationDiagnostics* diagnostics = nullptr;
};

using RoundObserver = std::function<void(const RoundView&)>;

class Simulation {
 public:
  // Builds dataset, partition, initial model, and aggregator from the config.
  explicit Simulation(ExperimentConfig config, const std::string& base_dir = "");
  // Uses a caller-provided dataset instead of config.dataset.
  Simulation(ExperimentConfig config, Dataset data);

  // One communication round. Rounds must run in order starting at 0.
  RoundRecord RunRound(int round);

  // All configured rounds; evaluates every eval_every rounds and at the end.
  std::vector<RoundRecord> Run();

  void set_observer(RoundObserver observer) { observer_ = std::move(observer); }

  const ExperimentConfig& config() const { return config_; }
  const Dataset& dataset() const { return data_; }
  const Partition& partition() const { return partition_; }
  const MlpSpec& model() const { return model_; }
  const ParamVector& params() const { return params_; }
  void set_params(ParamVector params);
  const Aggregator& aggregator() const { return *aggregator_; }

  // Data-size-weighted full-batch gradient over all clients' training splits.
  Eigen::VectorXd GlobalGradient(const ParamVector& params) const;

 private:
  void Setup();
  ClientUpdate TrainClient(int client, int round, double lr) const;

  ExperimentConfig config_;
  Dataset data_;
  Partition partition_;
  MlpSpec model_;
  ParamVector params_;
  std::unique_ptr<Aggregator> aggregator_;
  RoundObserver observer_;
  int next_round_ = 0;
};

// Convenience wrapper: Simulation(config).Run().
std::vector<RoundRecord> RunExperiment(const ExperimentConfig& config,
                                       const std::string& base_dir = "");

}  // namespace craft
