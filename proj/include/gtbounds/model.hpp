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

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gtbounds/bitvec.hpp"
#include "gtbounds/errors.hpp"
#include "gtbounds/rng.hpp"

namespace gtbounds {

/// Instance dimensions: N items of which K are defective, L non-defective
/// items requested, M pooled tests.
struct ProblemConfig {
  int n_items = 0;      // N
  int n_defective = 0;  // K
  int n_requested = 0;  // L
  int n_tests = 0;      // M
};

/// Channel noise. u = 0 and q = 0 is the noiseless boolean-OR channel.
struct NoiseParams {
  double dilution_u = 0.0;  // per-item, per-test non-participation probability
  double additive_q = 0.0;  // per-test false-positive probability
};

/// Pooling design: each matrix entry is Bernoulli(p).
struct DesignParams {
  double pool_density_p = 0.0;
};

inline void validate(const ProblemConfig& c) {
  if (c.n_defective < 1 || c.n_defective >= c.n_items)
    throw InvalidConfigError("ProblemConfig: require 1 <= k < n");
  if (c.n_requested < 1 || c.n_requested > c.n_items - c.n_defective)
    throw InvalidConfigError("ProblemConfig: require 1 <= l <= n - k");
  if (c.n_tests < 0) throw InvalidConfigError("ProblemConfig: require m >= 0");
}

inline void validate(const NoiseParams& p) {
  if (!(p.dilution_u >= 0.0 && p.dilution_u < 1.0))
    throw InvalidConfigError("NoiseParams: require u in [0, 1)");
  if (!(p.additive_q >= 0.0 && p.additive_q < 1.0))
    throw InvalidConfigError("NoiseParams: require q in [0, 1)");
}

inline void validate(const DesignParams& d) {
  if (!(d.pool_density_p > 0.0 && d.pool_density_p < 1.0))
    throw InvalidConfigError("DesignParams: require p strictly inside (0, 1)");
}

inline bool is_noiseless(const NoiseParams& p) {
  return p.dilution_u == 0.0 && p.additive_q == 0.0;
}

/// A realized test design: M x N Bernoulli(p) matrix (stored column-wise)
/// plus the hidden defective set. Dilution masks and additive noise are
/// channel randomness and are never stored; outcomes are reproduced from
/// seeds alone.
struct Instance {
  ProblemConfig config;
  DesignParams design;
  std::vector<BitVec> columns;     // N columns of M bits each
  std::vector<int> defective_set;  // sorted, size K
  std::uint64_t seed = 0;

  bool matrix_at(int row, int item) const {
    return columns[static_cast<std::size_t>(item)].get(
        static_cast<std::size_t>(row));
  }
};

struct OutcomeVector {
  BitVec outcomes;  // length M
};

/// Pr(test reads 0 | m participating defectives) = (1-q) * u^m, with the
/// u^0 = 1 convention (including u = 0).
inline double row_null_probability(int ones_count, const NoiseParams& noise) {
  if (ones_count < 0)
    throw InvalidConfigError("row_null_probability: ones_count must be >= 0");
  if (ones_count == 0) return 1.0 - noise.additive_q;
  return (1.0 - noise.additive_q) *
         std::pow(noise.dilution_u, static_cast<double>(ones_count));
}

/// Draw a test matrix with i.i.d. Bernoulli(p) entries and a uniformly
/// random K-subset of defectives. Deterministic given the seed; the matrix
/// and the defective set come from independent derived streams.
inline Instance sample_instance(const ProblemConfig& config,
                                const DesignParams& design,
                                std::uint64_t seed) {
  validate(config);
  validate(design);
  Instance inst;
  inst.config = config;
  inst.design = design;
  inst.seed = seed;

  Rng matrix_rng(derive_seed(seed, 0));
  inst.columns.reserve(static_cast<std::size_t>(config.n_items));
  for (int j = 0; j < config.n_items; ++j) {
    BitVec col(static_cast<std::size_t>(config.n_tests));
    for (int r = 0; r < config.n_tests; ++r)
      if (matrix_rng.bernoulli(design.pool_density_p))
        col.set(static_cast<std::size_t>(r));
    inst.columns.push_back(std::move(col));
  }

  Rng set_rng(derive_seed(seed, 1));
  inst.defective_set = set_rng.sample_subset(config.n_items, config.n_defective);
  return inst;
}

/// Push the instance through the noisy boolean-OR channel: each test is the
/// OR over defectives of (membership AND Bernoulli(1-u) survival), OR'd with
/// Bernoulli(q) additive noise. One survival draw per (defective, test) and
/// one additive draw per test, always, so the draw layout is fixed.
inline OutcomeVector generate_outcomes(const Instance& instance,
                                       const NoiseParams& noise,
                                       std::uint64_t seed) {
  validate(noise);
  const int m = instance.config.n_tests;
  OutcomeVector out;
  out.outcomes = BitVec(static_cast<std::size_t>(m));

  Rng dilution_rng(derive_seed(seed, 0));
  for (int item : instance.defective_set) {
    const BitVec& col = instance.columns[static_cast<std::size_t>(item)];
    for (int r = 0; r < m; ++r) {
      const bool survives = dilution_rng.bernoulli(1.0 - noise.dilution_u);
      if (survives && col.get(static_cast<std::size_t>(r)))
        out.outcomes.set(static_cast<std::size_t>(r));
    }
  }

  Rng additive_rng(derive_seed(seed, 1));
  for (int r = 0; r < m; ++r)
    if (additive_rng.bernoulli(noise.additive_q))
      out.outcomes.set(static_cast<std::size_t>(r));
  return out;
}

/// Replay record: everything needed to re-run a trial, bit vectors packed as
/// hex (see BitVec for the packing).
inline nlohmann::json to_replay_json(const ProblemConfig& config,
                                     const DesignParams& design,
                                     const NoiseParams& noise,
                                     const Instance& instance,
                                     const OutcomeVector& outcomes) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < config.n_tests; ++r) {
    BitVec row(static_cast<std::size_t>(config.n_items));
    for (int j = 0; j < config.n_items; ++j)
      if (instance.matrix_at(r, j)) row.set(static_cast<std::size_t>(j));
    rows.push_back(row.to_hex());
  }
  return nlohmann::json{{"n", config.n_items},
                        {"k", config.n_defective},
                        {"l", config.n_requested},
                        {"m", config.n_tests},
                        {"p", design.pool_density_p},
                        {"u", noise.dilution_u},
                        {"q", noise.additive_q},
                        {"seed", instance.seed},
                        {"defective_set", instance.defective_set},
                        {"matrix_rows", rows},
                        {"outcomes", outcomes.outcomes.to_hex()}};
}

struct ReplayRecord {
  ProblemConfig config;
  DesignParams design;
  NoiseParams noise;
  Instance instance;
  OutcomeVector outcomes;
};

inline ReplayRecord from_replay_json(const nlohmann::json& j) {
  ReplayRecord rec;
  rec.config = ProblemConfig{j.at("n").get<int>(), j.at("k").get<int>(),
                             j.at("l").get<int>(), j.at("m").get<int>()};
  rec.design = DesignParams{j.at("p").get<double>()};
  rec.noise = NoiseParams{j.at("u").get<double>(), j.at("q").get<double>()};
  validate(rec.config);
  validate(rec.design);
  validate(rec.noise);

  rec.instance.config = rec.config;
  rec.instance.design = rec.design;
  rec.instance.seed = j.at("seed").get<std::uint64_t>();
  rec.instance.defective_set = j.at("defective_set").get<std::vector<int>>();

  const auto rows = j.at("matrix_rows").get<std::vector<std::string>>();
  if (static_cast<int>(rows.size()) != rec.config.n_tests)
    throw InvalidConfigError("replay record: matrix_rows count != m");
  rec.instance.columns.assign(
      static_cast<std::size_t>(rec.config.n_items),
      BitVec(static_cast<std::size_t>(rec.config.n_tests)));
  for (int r = 0; r < rec.config.n_tests; ++r) {
    const BitVec row = BitVec::from_hex(
        rows[static_cast<std::size_t>(r)],
        static_cast<std::size_t>(rec.config.n_items));
    row.for_each_set([&](std::size_t item) {
      rec.instance.columns[item].set(static_cast<std::size_t>(r));
    });
  }
  rec.outcomes.outcomes =
      BitVec::from_hex(j.at("outcomes").get<std::string>(),
                       static_cast<std::size_t>(rec.config.n_tests));
  return rec;
}

}  // namespace gtbounds
