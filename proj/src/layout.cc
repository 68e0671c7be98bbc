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

#include "craft/layout.h"

#include <string>

#include "craft/errors.h"

namespace craft {

LayerLayout::LayerLayout(std::vector<LayerSpan> spans) : spans_(std::move(spans)) {
  if (spans_.empty()) {
    throw InvalidInputError("LayerLayout: needs at least one layer");
  }
  std::size_t next = 0;
  for (std::size_t q = 0; q < spans_.size(); ++q) {
    if (spans_[q].offset != next) {
      throw InvalidInputError("LayerLayout: layer " + std::to_string(q) +
                              " starts at " + std::to_string(spans_[q].offset) +
                              ", expected " + std::to_string(next));
    }
    if (spans_[q].length == 0) {
      throw InvalidInputError("LayerLayout: layer " + std::to_string(q) +
                              " is empty");
    }
    next += spans_[q].length;
  }
  dim_ = next;
}

LayerLayout LayerLayout::FromLengths(const std::vector<std::size_t>& lengths) {
  std::vector<LayerSpan> spans;
  spans.reserve(lengths.size());
  std::size_t offset = 0;
  for (std::size_t len : lengths) {
    spans.push_back({offset, len});
    offset += len;
  }
  return LayerLayout(std::move(spans));
}

LayerLayout LayerLayout::Single(std::size_t dim) { return FromLengths({dim}); }

}  // namespace craft
