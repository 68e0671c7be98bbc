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

// YAML experiment configuration.
//
//   name: femnist-like           # optional
//   dataset:                     # required
//     kind: synthetic | idx
//     classes, features, samples, class_sep    (synthetic)
//     images, labels, limit                    (idx; paths relative to the file)
//   model:      { hidden: [200, 200], activation: relu | tanh }
//   federation: { clients, clients_per_round, rounds, server_lr, client_lr,
//                 lr_decay, batch_size, local_steps, dirichlet_alpha,
//                 min_per_client, train_fraction, prox_mu, eval_every, threads }
//   aggregator:                  # required
//     kind: craft | config | fedavg | fedprox | fednova | fedavgm |
//           fedadagrad | fedadam | fedyogi
//     epsilon, tau, rank_tol, momentum, beta1, beta2, adapt_tau
//   seeds:      { data, partition, init, sampling, training }
//
// Unknown keys are rejected. The full schema with defaults is in
// docs/config.md.

#include <filesystem>
#include <string>
#include <string_view>

#include "craft/simulation.h"

namespace craft {

// Throws IoError when the file cannot be read and ConfigError for syntax
// errors (with the line number), unknown keys, bad types, or semantic
// violations (naming the key).
ExperimentConfig ParseConfig(const std::filesystem::path& path);

// Same as ParseConfig on in-memory text; relative dataset paths resolve
// against `base_dir`.
ExperimentConfig ParseConfigText(std::string_view text,
                                 const std::filesystem::path& base_dir = {});

// Emits every field, so the output parses back to an equal config.
std::string SerializeConfig(const ExperimentConfig& config);

// Applies "name=value" to one of the seeds (data, partition, init,
// sampling, training). Throws ConfigError otherwise.
void ApplySeedOverride(ExperimentConfig& config, std::string_view assignment);

}  // namespace craft
