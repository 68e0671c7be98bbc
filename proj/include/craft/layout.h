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
#include <vector>

namespace craft {

struct LayerSpan {
  std::size_t offset = 0;
  std::size_t length = 0;

  friend bool operator==(const LayerSpan&, const LayerSpan&) = default;
};

// Partition of a flat parameter vector [0, d) into Q contiguous layers.
class LayerLayout {
 public:
  // Throws InvalidInputError unless spans are sorted, gap-free, and nonempty.
  explicit LayerLayout(std::vector<LayerSpan> spans);

  // Consecutive spans with the given lengths, starting at offset 0.
  static LayerLayout FromLengths(const std::vector<std::size_t>& lengths);

  // One layer covering [0, dim).
  static LayerLayout Single(std::size_t dim);

  const std::vector<LayerSpan>& spans() const { return spans_; }
  std::size_t num_layers() const { return spans_.size(); }
  std::size_t dim() const { return dim_; }
  const LayerSpan& operator[](std::size_t q) const { return spans_[q]; }

  friend bool operator==(const LayerLayout&, const LayerLayout&) = default;

 private:
  std::vector<LayerSpan> spans_;
  std::size_t dim_ = 0;
};

}  // namespace craft
