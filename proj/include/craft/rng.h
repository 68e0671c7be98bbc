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

#include <cstdint>
#include <initializer_list>
#include <random>

namespace craft {

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for a named sub-stream, e.g. DeriveSeed(training_seed, {round, client}).
constexpr std::uint64_t DeriveSeed(std::uint64_t base,
                                   std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = Mix64(base);
  for (std::uint64_t k : keys) h = Mix64(h ^ Mix64(k));
  return h;
}

using Rng = std::mt19937_64;

}  // namespace craft
