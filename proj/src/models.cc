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

#include "craft/models.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "craft/errors.h"
#include "craft/rng.h"

namespace craft {
namespace {

using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using MatMap = Eigen::Map<Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

std::vector<int> Widths(const MlpSpec& spec) {
  std::vector<int> w;
  w.push_back(spec.input_dim);
  w.insert(w.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  w.push_back(spec.output_dim);
  return w;
}

void CheckParams(const MlpSpec& spec, const ParamVector& params) {
  if (static_cast<std::size_t>(params.values.size()) != spec.num_params()) {
    throw InvalidInputError("parameter vector has " +
                            std::to_string(params.values.size()) +
                            " entries, model expects " +
                            std::to_string(spec.num_params()));
  }
}

void CheckBatch(const MlpSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& batch) {
  if (batch.cols() != spec.input_dim) {
    throw InvalidInputError("batch has " + std::to_string(batch.cols()) +
                            " features, model expects " +
                            std::to_string(spec.input_dim));
  }
}

void Activate(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kTanh:
      z = z.array().tanh().matrix();
      break;
  }
}

// Multiplies `grad` in place by the activation derivative, expressed through
// the activation output.
void ActivationBackward(Activation a, const Eigen::MatrixXd& out, Eigen::MatrixXd& grad) {
  switch (a) {
    case Activation::kRelu:
      grad = (out.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::kTanh:
      grad.array() *= 1.0 - out.array().square();
      break;
  }
}

// Runs the forward pass, keeping every layer's input.
Eigen::MatrixXd ForwardCached(const MlpSpec& spec, const ParamVector& params,
                              const Eigen::Ref<const Eigen::MatrixXd>& batch,
                              std::vector<Eigen::MatrixXd>* inputs) {
  const std::vector<int> w = Widths(spec);
  const std::size_t n_layers = w.size() - 1;
  const double* p = params.values.data();
  Eigen::MatrixXd h = batch;
  for (std::size_t l = 0; l < n_layers; ++l) {
    ConstMatMap weight(p, w[l], w[l + 1]);
    p += static_cast<std::ptrdiff_t>(w[l]) * w[l + 1];
    ConstVecMap bias(p, w[l + 1]);
    p += w[l + 1];
    Eigen::MatrixXd z = h * weight;
    z.rowwise() += bias.transpose();
    if (l + 1 < n_layers) Activate(spec.activation, z);
    if (inputs) inputs->push_back(std::move(h));
    h = std::move(z);
  }
  return h;
}

}  // namespace

std::string_view ActivationName(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation ParseActivation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw InvalidInputError("unknown activation '" + std::string(name) + "'");
}

void MlpSpec::Validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw InvalidInputError("MLP input and output dimensions must be at least 1");
  }
  for (int h : hidden_dims) {
    if (h < 1) throw InvalidInputError("MLP hidden widths must be at least 1");
  }
}

std::size_t MlpSpec::num_params() const {
  const std::vector<int> w = Widths(*this);
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    n += static_cast<std::size_t>(w[l]) * w[l + 1] + w[l + 1];
  }
  return n;
}

LayerLayout MlpSpec::layout() const {
  const std::vector<int> w = Widths(*this);
  std::vector<std::size_t> lengths;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    lengths.push_back(static_cast<std::size_t>(w[l]) * w[l + 1]);
    lengths.push_back(static_cast<std::size_t>(w[l + 1]));
  }
  return LayerLayout::FromLengths(lengths);
}

ParamVector InitParams(const MlpSpec& spec, std::uint64_t seed) {
  spec.Validate();
  ParamVector params{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.num_params())),
                     spec.layout()};
  const std::vector<int> w = Widths(spec);
  Rng rng(seed);
  double* p = params.values.data();
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double a = std::sqrt(6.0 / (w[l] + w[l + 1]));
    std::uniform_real_distribution<double> dist(-a, a);
    const std::size_t n_weights = static_cast<std::size_t>(w[l]) * w[l + 1];
    for (std::size_t k = 0; k < n_weights; ++k) p[k] = dist(rng);
    p += n_weights + w[l + 1];
  }
  return params;
}

Eigen::MatrixXd Forward(const MlpSpec& spec, const ParamVector& params,
                        const Eigen::Ref<const Eigen::MatrixXd>& batch) {
  CheckParams(spec, params);
  CheckBatch(spec, batch);
  return ForwardCached(spec, params, batch, nullptr);
}

LossGrad LossAndGrad(const MlpSpec& spec, const ParamVector& params,
                     const Eigen::Ref<const Eigen::MatrixXd>& batch,
                     std::span<const int> labels) {
  CheckParams(spec, params);
  CheckBatch(spec, batch);
  const Eigen::Index n = batch.rows();
  if (n < 1 || static_cast<std::size_t>(n) != labels.size()) {
    throw InvalidInputError("batch has " + std::to_string(n) + " rows but " +
                            std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || y >= spec.output_dim) {
      throw InvalidInputError("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(spec.output_dim) + ")");
    }
  }

  std::vector<Eigen::MatrixXd> inputs;
  Eigen::MatrixXd logits = ForwardCached(spec, params, batch, &inputs);

  // Softmax cross-entropy; dz = (softmax - onehot) / n.
  double loss = 0.0;
  Eigen::MatrixXd dz(n, spec.output_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double top = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - top).exp().matrix();
    const double sum = e.sum();
    loss += std::log(sum) + top - logits(i, labels[i]);
    dz.row(i) = e / sum;
    dz(i, labels[i]) -= 1.0;
  }
  dz /= static_cast<double>(n);

  LossGrad out;
  out.loss = loss / static_cast<double>(n);
  out.grad = Eigen::VectorXd::Zero(params.values.size());

  const std::vector<int> w = Widths(spec);
  const std::size_t n_layers = w.size() - 1;
  std::vector<std::size_t> offsets(n_layers);
  std::size_t off = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    offsets[l] = off;
    off += static_cast<std::size_t>(w[l]) * w[l + 1] + w[l + 1];
  }

  for (std::size_t l = n_layers; l-- > 0;) {
    const std::size_t wsize = static_cast<std::size_t>(w[l]) * w[l + 1];
    MatMap d_weight(out.grad.data() + offsets[l], w[l], w[l + 1]);
    VecMap d_bias(out.grad.data() + offsets[l] + wsize, w[l + 1]);
    d_weight.noalias() = inputs[l].transpose() * dz;
    d_bias = dz.colwise().sum().transpose();
    if (l == 0) break;
    ConstMatMap weight(params.values.data() + offsets[l], w[l], w[l + 1]);
    Eigen::MatrixXd dh = dz * weight.transpose();
    ActivationBackward(spec.activation, inputs[l], dh);
    dz = std::move(dh);
  }
  return out;
}

LossGrad ProximalLossAndGrad(const MlpSpec& spec, const ParamVector& params,
                             const Eigen::Ref<const Eigen::MatrixXd>& batch,
                             std::span<const int> labels,
                             const Eigen::Ref<const Eigen::VectorXd>& anchor, double mu) {
  LossGrad out = LossAndGrad(spec, params, batch, labels);
  if (mu != 0.0) {
    if (anchor.size() != params.values.size()) {
      throw InvalidInputError("proximal anchor has the wrong dimension");
    }
    const Eigen::VectorXd diff = params.values - anchor;
    out.loss += 0.5 * mu * diff.squaredNorm();
    out.grad += mu * diff;
  }
  return out;
}

Eigen::MatrixXd GatherRows(const Dataset& data, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        data.features.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::vector<int> GatherLabels(const Dataset& data, std::span<const std::size_t> rows) {
  std::vector<int> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = data.labels[rows[i]];
  return out;
}

ParamVector LocalTrain(const MlpSpec& spec, const ParamVector& params,
                       const Dataset& data, std::span<const std::size_t> indices,
                       const LocalTrainOptions& options) {
  if (indices.empty()) {
    throw InvalidInputError("LocalTrain: client has no training samples");
  }
  if (options.steps < 1 || options.batch_size < 1) {
    throw InvalidInputError("LocalTrain: steps and batch_size must be at least 1");
  }
  if (!(options.lr >= 0.0)) {
    throw InvalidInputError("LocalTrain: learning rate must be non-negative");
  }

  ParamVector theta = params;
  Rng rng(options.seed);
  std::vector<std::size_t> order(indices.begin(), indices.end());
  const std::size_t batch = std::min<std::size_t>(options.batch_size, order.size());
  std::size_t cursor = order.size();

  for (int k = 0; k < options.steps; ++k) {
    if (cursor + batch > order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    std::span<const std::size_t> rows(order.data() + cursor, batch);
    cursor += batch;
    const Eigen::MatrixXd x = GatherRows(data, rows);
    const std::vector<int> y = GatherLabels(data, rows);
    const LossGrad lg =
        ProximalLossAndGrad(spec, theta, x, y, params.values, options.prox_mu);
    theta.values -= options.lr * lg.grad;
  }
  return theta;
}

Eigen::VectorXd ClientDelta(const ParamVector& start, const ParamVector& final_params) {
  if (!(start.layout == final_params.layout) ||
      start.values.size() != final_params.values.size()) {
    throw InvalidInputError("ClientDelta: parameter layouts differ");
  }
  return start.values - final_params.values;
}

double Accuracy(const MlpSpec& spec, const ParamVector& params, const Dataset& data,
                std::span<const std::size_t> indices) {
  if (indices.empty()) return 0.0;
  const Eigen::MatrixXd logits = Forward(spec, params, GatherRows(data, indices));
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    logits.row(i).maxCoeff(&best);
    if (static_cast<int>(best) == data.labels[indices[static_cast<std::size_t>(i)]]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

}  // namespace craft
