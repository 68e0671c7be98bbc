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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace craft {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Dataset {
  FeatureMatrix features;    // n x p, one sample per row
  std::vector<int> labels;   // n entries in [0, num_classes)
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t num_features() const { return static_cast<std::size_t>(features.cols()); }

  // Throws InvalidInputError if shapes disagree or a label is out of range.
  void Validate() const;
};

// Per-client index lists into a parent Dataset.
struct Partition {
  std::vector<std::vector<std::size_t>> clients;  // all samples of each client
  std::vector<std::vector<std::size_t>> train;
  std::vector<std::vector<std::size_t>> test;

  std::size_t num_clients() const { return clients.size(); }
};

// Label-skewed split: for every class, client shares are drawn from
// Dirichlet(alpha) and the class's (shuffled) samples are dealt out in those
// proportions. Clients below `min_per_client` are then topped up one sample
// at a time from the currently largest client, always taking that client's
// most frequent class. Only `clients` is filled in.
// Throws ConfigError when num_clients * min_per_client exceeds the data.
Partition DirichletPartition(std::span<const int> labels, int num_classes,
                             int num_clients, double alpha, int min_per_client,
                             std::uint64_t seed);

struct TrainTestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle, then the last max(1, floor((1 - train_fraction) * n))
// indices become the test split. Needs at least two indices.
TrainTestSplit LocalSplit(std::span<const std::size_t> indices,
                          double train_fraction, std::uint64_t seed);

// Fills `train`/`test` of every client with LocalSplit, one derived seed
// per client.
void SplitClients(Partition& partition, double train_fraction, std::uint64_t seed);

// Gaussian clusters with unit within-class variance whose means are pairwise
// `class_sep` apart on a random orthonormal frame (when classes <= dims).
// Features are standardized per dimension; labels cycle through the classes.
Dataset SyntheticTask(int num_classes, int num_features, int num_samples,
                      double class_sep, std::uint64_t seed);

class IdxParseError : public std::runtime_error {
 public:
  enum class Code { kOpenFailed, kBadMagic, kTruncated, kCountMismatch };

  IdxParseError(Code code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Pixels are scaled to [0, 1]. `limit` > 0 keeps only the first `limit`
// samples.
Dataset LoadIdx(const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path, std::size_t limit = 0);

// Mean Shannon entropy (nats) of per-client label distributions.
double MeanLabelEntropy(const Partition& partition, std::span<const int> labels,
                        int num_classes);

}  // namespace craft
