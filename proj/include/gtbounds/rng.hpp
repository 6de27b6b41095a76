// Copyright 2026 The gtbounds Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace gtbounds {

/// SplitMix64 finalizer; bijective 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based seed split. Streams derived from the same master with
/// distinct counters are independent for practical purposes and
/// order-insensitive, so trials can run in any order (or in parallel) and
/// still reproduce bit-identically.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(master + 0x9e3779b97f4a7c15ULL * (stream + 1));
}

/// Deterministic random source. std::mt19937_64 output is fully specified by
/// the standard; the distributions below are implemented here because the
/// std:: distribution algorithms are implementation-defined and would break
/// bit-identical reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return unit() < p; }

  /// Uniform integer in [0, n); unbiased via rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform k-subset of {0, ..., n-1}, returned sorted (Floyd's algorithm).
  std::vector<int> sample_subset(int n, int k) {
    std::set<int> chosen;
    for (int t = n - k; t < n; ++t) {
      const int r = static_cast<int>(below(static_cast<std::uint64_t>(t) + 1));
      if (!chosen.insert(r).second) chosen.insert(t);
    }
    return {chosen.begin(), chosen.end()};
  }

  /// First k entries of a uniformly random permutation of `items`.
  std::vector<int> sample_without_replacement(std::vector<int> items, int k) {
    const auto n = items.size();
    for (int i = 0; i < k; ++i) {
      const auto j = i + below(n - static_cast<std::uint64_t>(i));
      std::swap(items[static_cast<std::size_t>(i)], items[j]);
    }
    items.resize(static_cast<std::size_t>(k));
    return items;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gtbounds
