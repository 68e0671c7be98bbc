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

#include "craft/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "craft/errors.h"
#include "craft/rng.h"

namespace craft {

void Dataset::Validate() const {
  if (labels.empty()) throw InvalidInputError("dataset is empty");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw InvalidInputError("dataset has " + std::to_string(features.rows()) +
                            " feature rows but " + std::to_string(labels.size()) +
                            " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw InvalidInputError("label " + std::to_string(labels[i]) + " at sample " +
                              std::to_string(i) + " outside [0, " +
                              std::to_string(num_classes) + ")");
    }
  }
}

Partition DirichletPartition(std::span<const int> labels, int num_classes,
                             int num_clients, double alpha, int min_per_client,
                             std::uint64_t seed) {
  if (!(alpha > 0.0)) throw ConfigError("dirichlet_alpha must be positive");
  if (num_clients < 1) throw ConfigError("number of clients must be at least 1");
  if (num_classes < 1) throw ConfigError("number of classes must be at least 1");
  if (min_per_client < 0) throw ConfigError("min_per_client must be non-negative");
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(num_clients) * static_cast<std::size_t>(min_per_client) > n) {
    throw ConfigError("cannot give " + std::to_string(num_clients) + " clients " +
                      std::to_string(min_per_client) + " samples each from " +
                      std::to_string(n) + " samples");
  }

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw InvalidInputError("label out of range at sample " + std::to_string(i));
    }
    by_class[labels[i]].push_back(i);
  }

  // held[client][class] -> sample indices
  std::vector<std::vector<std::vector<std::size_t>>> held(
      num_clients, std::vector<std::vector<std::size_t>>(num_classes));
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> share(num_clients);

  for (int c = 0; c < num_classes; ++c) {
    std::vector<std::size_t>& pool = by_class[c];
    std::shuffle(pool.begin(), pool.end(), rng);
    double total = 0.0;
    for (double& s : share) {
      s = gamma(rng);
      total += s;
    }
    if (!(total > 0.0)) {
      // Every draw underflowed; hand the class to one client.
      std::fill(share.begin(), share.end(), 0.0);
      share[std::uniform_int_distribution<int>(0, num_clients - 1)(rng)] = 1.0;
      total = 1.0;
    }
    double cum = 0.0;
    std::size_t begin = 0;
    for (int k = 0; k < num_clients; ++k) {
      cum += share[k] / total;
      std::size_t end = k + 1 == num_clients
                            ? pool.size()
                            : std::min(pool.size(), static_cast<std::size_t>(
                                                        std::floor(cum * pool.size())));
      end = std::max(end, begin);
      held[k][c].assign(pool.begin() + begin, pool.begin() + end);
      begin = end;
    }
  }

  std::vector<std::size_t> sizes(num_clients, 0);
  for (int k = 0; k < num_clients; ++k) {
    for (const auto& v : held[k]) sizes[k] += v.size();
  }

  // Top up small clients from the largest one, taking its dominant class.
  for (;;) {
    const auto small = std::min_element(sizes.begin(), sizes.end());
    if (*small >= static_cast<std::size_t>(min_per_client)) break;
    const auto large = std::max_element(sizes.begin(), sizes.end());
    const auto to = static_cast<int>(small - sizes.begin());
    const auto from = static_cast<int>(large - sizes.begin());
    int cls = 0;
    for (int c = 1; c < num_classes; ++c) {
      if (held[from][c].size() > held[from][cls].size()) cls = c;
    }
    held[to][cls].push_back(held[from][cls].back());
    held[from][cls].pop_back();
    --sizes[from];
    ++sizes[to];
  }

  Partition out;
  out.clients.resize(num_clients);
  for (int k = 0; k < num_clients; ++k) {
    for (const auto& v : held[k]) {
      out.clients[k].insert(out.clients[k].end(), v.begin(), v.end());
    }
    std::sort(out.clients[k].begin(), out.clients[k].end());
  }
  return out;
}

TrainTestSplit LocalSplit(std::span<const std::size_t> indices, double train_fraction,
                          std::uint64_t seed) {
  const std::size_t n = indices.size();
  if (n < 2) {
    throw InvalidInputError("LocalSplit: need at least 2 samples, got " +
                            std::to_string(n));
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInputError("LocalSplit: train_fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(indices.begin(), indices.end());
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // The small slack keeps e.g. 0.2 * 20 from flooring to 3.
  auto n_test = static_cast<std::size_t>(
      std::floor((1.0 - train_fraction) * static_cast<double>(n) + 1e-9));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  TrainTestSplit out;
  out.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
  out.test.assign(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

void SplitClients(Partition& partition, double train_fraction, std::uint64_t seed) {
  const std::size_t n = partition.num_clients();
  partition.train.assign(n, {});
  partition.test.assign(n, {});
  for (std::size_t k = 0; k < n; ++k) {
    TrainTestSplit s = LocalSplit(partition.clients[k], train_fraction,
                                  DeriveSeed(seed, {k}));
    partition.train[k] = std::move(s.train);
    partition.test[k] = std::move(s.test);
  }
}

Dataset SyntheticTask(int num_classes, int num_features, int num_samples,
                      double class_sep, std::uint64_t seed) {
  if (num_classes < 1 || num_features < 1 || num_samples < 1) {
    throw InvalidInputError("SyntheticTask: sizes must be positive");
  }
  if (!(class_sep >= 0.0)) {
    throw InvalidInputError("SyntheticTask: class_sep must be non-negative");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd frame(num_features, num_classes);
  for (Eigen::Index j = 0; j < frame.cols(); ++j) {
    for (Eigen::Index i = 0; i < frame.rows(); ++i) frame(i, j) = normal(rng);
  }
  Eigen::MatrixXd means(num_features, num_classes);
  if (num_classes <= num_features) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(frame);
    means = qr.householderQ() * Eigen::MatrixXd::Identity(num_features, num_classes);
  } else {
    means = frame.colwise().normalized();
  }
  // Orthonormal means scaled by sep / sqrt(2) are exactly sep apart.
  means *= class_sep / std::sqrt(2.0);

  Dataset data;
  data.num_classes = num_classes;
  data.features.resize(num_samples, num_features);
  data.labels.resize(num_samples);
  for (int i = 0; i < num_samples; ++i) {
    const int c = i % num_classes;
    data.labels[i] = c;
    for (int j = 0; j < num_features; ++j) {
      data.features(i, j) = means(j, c) + normal(rng);
    }
  }

  const Eigen::RowVectorXd mu = data.features.colwise().mean();
  data.features.rowwise() -= mu;
  for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
    const double sd = std::sqrt(data.features.col(j).squaredNorm() /
                                static_cast<double>(num_samples));
    if (sd > 0.0) data.features.col(j) /= sd;
  }
  return data;
}

namespace {

std::vector<std::uint8_t> ReadAll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IdxParseError(IdxParseError::Code::kOpenFailed,
                        "cannot open IDX file " + path.string());
  }
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

std::uint32_t ReadBe32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string Hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
  return os.str();
}

void Require(const std::vector<std::uint8_t>& bytes, std::size_t needed,
             const std::filesystem::path& path) {
  if (bytes.size() < needed) {
    throw IdxParseError(IdxParseError::Code::kTruncated,
                        path.string() + ": truncated, need " + std::to_string(needed) +
                            " bytes but file has " + std::to_string(bytes.size()));
  }
}

void CheckMagic(const std::vector<std::uint8_t>& bytes, std::uint32_t expected,
                const std::filesystem::path& path) {
  Require(bytes, 4, path);
  const std::uint32_t magic = ReadBe32(bytes, 0);
  if (magic != expected) {
    throw IdxParseError(IdxParseError::Code::kBadMagic,
                        path.string() + ": bad magic " + Hex(magic) +
                            " at offset 0, expected " + Hex(expected));
  }
}

}  // namespace

Dataset LoadIdx(const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path, std::size_t limit) {
  const std::vector<std::uint8_t> img = ReadAll(images_path);
  CheckMagic(img, 0x00000803u, images_path);
  Require(img, 16, images_path);
  const std::size_t n_img = ReadBe32(img, 4);
  const std::size_t rows = ReadBe32(img, 8);
  const std::size_t cols = ReadBe32(img, 12);
  const std::size_t pixels = rows * cols;
  Require(img, 16 + n_img * pixels, images_path);

  const std::vector<std::uint8_t> lab = ReadAll(labels_path);
  CheckMagic(lab, 0x00000801u, labels_path);
  Require(lab, 8, labels_path);
  const std::size_t n_lab = ReadBe32(lab, 4);
  Require(lab, 8 + n_lab, labels_path);

  if (n_img != n_lab) {
    throw IdxParseError(IdxParseError::Code::kCountMismatch,
                        images_path.string() + " holds " + std::to_string(n_img) +
                            " images but " + labels_path.string() + " holds " +
                            std::to_string(n_lab) + " labels");
  }

  const std::size_t n = limit > 0 ? std::min(limit, n_img) : n_img;
  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
  data.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* src = img.data() + 16 + i * pixels;
    for (std::size_t j = 0; j < pixels; ++j) {
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          src[j] / 255.0;
    }
    data.labels[i] = lab[8 + i];
    max_label = std::max(max_label, data.labels[i]);
  }
  data.num_classes = max_label + 1;
  return data;
}

double MeanLabelEntropy(const Partition& partition, std::span<const int> labels,
                        int num_classes) {
  if (partition.clients.empty()) return 0.0;
  double sum = 0.0;
  std::vector<double> counts(num_classes);
  for (const auto& client : partition.clients) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t i : client) counts[labels[i]] += 1.0;
    double h = 0.0;
    for (double c : counts) {
      if (c > 0.0) {
        const double p = c / static_cast<double>(client.size());
        h -= p * std::log(p);
      }
    }
    sum += h;
  }
  return sum / static_cast<double>(partition.clients.size());
}

}  // namespace craft
