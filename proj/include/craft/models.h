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

// Fully connected classifiers with exact backpropagation over a flat
// parameter vector.
//
// Parameter order is W_1, b_1, W_2, b_2, ..., with W_l stored column-major
// as an (in_l x out_l) matrix, so the pre-activation of a batch X is
// X * W_l + 1 b_l^T. Each weight matrix and each bias is its own layer in the
// accompanying LayerLayout.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "craft/data.h"
#include "craft/layout.h"

namespace craft {

struct ParamVector {
  Eigen::VectorXd values;
  LayerLayout layout = LayerLayout::Single(1);
};

enum class Activation { kRelu, kTanh };

std::string_view ActivationName(Activation a);
Activation ParseActivation(std::string_view name);

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 1;
  Activation activation = Activation::kRelu;

  void Validate() const;
  std::size_t num_params() const;
  LayerLayout layout() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

// Glorot-uniform weights, zero biases; deterministic in `seed`.
ParamVector InitParams(const MlpSpec& spec, std::uint64_t seed);

// Logits for every row of `batch`.
Eigen::MatrixXd Forward(const MlpSpec& spec, const ParamVector& params,
                        const Eigen::Ref<const Eigen::MatrixXd>& batch);

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;  // same layout as the parameters
};

// Mean softmax cross-entropy and its gradient.
LossGrad LossAndGrad(const MlpSpec& spec, const ParamVector& params,
                     const Eigen::Ref<const Eigen::MatrixXd>& batch,
                     std::span<const int> labels);

// Adds (mu / 2) ||theta - anchor||^2 to LossAndGrad.
LossGrad ProximalLossAndGrad(const MlpSpec& spec, const ParamVector& params,
                             const Eigen::Ref<const Eigen::MatrixXd>& batch,
                             std::span<const int> labels,
                             const Eigen::Ref<const Eigen::VectorXd>& anchor, double mu);

// Gathers the selected rows of a dataset into a dense batch.
Eigen::MatrixXd GatherRows(const Dataset& data, std::span<const std::size_t> rows);
std::vector<int> GatherLabels(const Dataset& data, std::span<const std::size_t> rows);

struct LocalTrainOptions {
  double lr = 0.01;
  int steps = 1;          // K_i; batches continue across reshuffled epochs
  int batch_size = 50;    // >= slice size means full batch
  std::uint64_t seed = 0;
  double prox_mu = 0.0;   // FedProx term, anchored at the starting params
};

// K_i steps of minibatch SGD over `indices` of `data`.
ParamVector LocalTrain(const MlpSpec& spec, const ParamVector& params,
                       const Dataset& data, std::span<const std::size_t> indices,
                       const LocalTrainOptions& options);

// theta_t - theta_final. Throws InvalidInputError when layouts differ.
Eigen::VectorXd ClientDelta(const ParamVector& start, const ParamVector& final_params);

// Fraction of rows whose argmax logit matches the label.
double Accuracy(const MlpSpec& spec, const ParamVector& params, const Dataset& data,
                std::span<const std::size_t> indices);

}  // namespace craft
