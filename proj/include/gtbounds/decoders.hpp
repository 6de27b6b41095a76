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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gtbounds/errors.hpp"
#include "gtbounds/info.hpp"
#include "gtbounds/model.hpp"
#include "gtbounds/rng.hpp"

namespace gtbounds {

enum class Scheme { kScheme1, kK1Sort, kMultistage };

inline std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kScheme1:
      return "scheme1";
    case Scheme::kK1Sort:
      return "k1_sort";
    case Scheme::kMultistage:
      return "multistage";
  }
  return "unknown";
}

inline Scheme scheme_from_name(const std::string& name) {
  if (name == "scheme1") return Scheme::kScheme1;
  if (name == "k1_sort") return Scheme::kK1Sort;
  if (name == "multistage") return Scheme::kMultistage;
  throw InvalidConfigError("unknown scheme: " + name);
}

/// Exact maximum-likelihood subset search is combinatorial; refuse blind
/// enumerations beyond this many subsets unless the caller forces it.
constexpr double kEnumerationGuardrail = 1e7;

struct DecodeResult {
  std::vector<int> selected_inactive;                       // size L
  std::optional<std::vector<int>> estimated_active;         // scheme 1 only
  bool error_flag = false;
  std::optional<std::vector<std::vector<int>>> stage_trace;  // multi-stage only
};

namespace detail {

/// Subset likelihood in the vanishing-noise limit. Channels with hard zeros
/// (u = 0 or q = 0) assign probability zero to many candidate subsets at
/// once; comparing them all as -inf would leave the search to tie-breaking
/// alone, which destroys the decoders on noiseless data. Instead the zero
/// factors are graded by their order in a vanishing noise floor eps
/// (u -> eps gives a y=0 row with m participants order m, q -> eps gives an
/// uncovered y=1 row order 1): a subset's likelihood is eps^degree *
/// exp(finite), and comparisons take eps -> 0+. degree = 0 reproduces the
/// plain log-likelihood, so channels without hard zeros are unaffected.
struct ExtendedScore {
  long long degree = 0;  // total order of the zero factors
  double finite = 0.0;   // log-likelihood of the non-vanishing factors

  double as_log_likelihood() const { return degree > 0 ? kNegInf : finite; }
};

/// True when `a` is a strictly larger likelihood than `b` as eps -> 0+.
inline bool likelihood_greater(const ExtendedScore& a,
                               const ExtendedScore& b) {
  if (a.degree != b.degree) return a.degree < b.degree;
  return a.finite > b.finite;
}

/// Incremental subset scorer. Tracks, per row, how many of the currently
/// added columns participate, plus an integer histogram over (participation
/// count, outcome). The score is recomputed from the histogram in a fixed
/// order, so subsets with identical count profiles get bit-identical scores
/// no matter where enumeration visits them — ties resolve by index order,
/// never by accumulated rounding.
class SubsetScorer {
 public:
  SubsetScorer(const Instance& instance, const BitVec& outcomes,
               const NoiseParams& noise, int max_k)
      : instance_(&instance), outcomes_(&outcomes),
        u_is_zero_(noise.dilution_u == 0.0),
        q_is_zero_(noise.additive_q == 0.0),
        log_1mq_(std::log1p(-noise.additive_q)) {
    const RowChannel chan(noise);
    log_p_.resize(static_cast<std::size_t>(max_k) + 1);
    for (int m = 0; m <= max_k; ++m)
      log_p_[static_cast<std::size_t>(m)] = {chan.log_p0(m), chan.log_p1(m)};
    hist_.assign(static_cast<std::size_t>(max_k) + 1, {0, 0});
    const std::size_t rows = outcomes.size();
    count_.assign(rows, 0);
    for (std::size_t r = 0; r < rows; ++r)
      ++hist_[0][outcomes.get(r) ? 1 : 0];
  }

  void add(int item) { shift(item, +1); }
  void remove(int item) { shift(item, -1); }

  ExtendedScore score() const {
    ExtendedScore s;
    for (std::size_t m = 0; m < hist_.size(); ++m) {
      const long long c0 = hist_[m][0];
      if (c0 != 0) {
        if (m >= 1 && u_is_zero_) {
          // P(y=0 | m) = (1-q) u^m with u -> eps.
          s.degree += c0 * static_cast<long long>(m);
          s.finite += static_cast<double>(c0) * log_1mq_;
        } else {
          s.finite += static_cast<double>(c0) * log_p_[m][0];
        }
      }
      const long long c1 = hist_[m][1];
      if (c1 != 0) {
        if (m == 0 && q_is_zero_) {
          // P(y=1 | 0) = q with q -> eps; unit coefficient.
          s.degree += c1;
        } else {
          s.finite += static_cast<double>(c1) * log_p_[m][1];
        }
      }
    }
    return s;
  }

 private:
  void shift(int item, int delta) {
    const BitVec& col = instance_->columns[static_cast<std::size_t>(item)];
    col.for_each_set([&](std::size_t r) {
      const std::size_t y = outcomes_->get(r) ? 1 : 0;
      const std::size_t m = static_cast<std::size_t>(count_[r]);
      --hist_[m][y];
      count_[r] = static_cast<std::uint16_t>(static_cast<int>(count_[r]) +
                                             delta);
      ++hist_[static_cast<std::size_t>(count_[r])][y];
    });
  }

  const Instance* instance_;
  const BitVec* outcomes_;
  bool u_is_zero_, q_is_zero_;
  double log_1mq_;
  std::vector<std::array<double, 2>> log_p_;
  std::vector<std::array<long long, 2>> hist_;
  std::vector<std::uint16_t> count_;
};

inline void check_guardrail(std::size_t pool, int k, bool force,
                            const std::string& where) {
  const double count = binomial_count(static_cast<int>(pool), k);
  if (count > kEnumerationGuardrail && !force)
    throw EnumerationLimitError(
        where + ": C(" + std::to_string(pool) + ", " + std::to_string(k) +
        ") = " + std::to_string(count) + " subsets exceeds the " +
        std::to_string(kEnumerationGuardrail) +
        " enumeration guardrail (pass force to override)");
}

struct BestSubset {
  std::vector<int> items;
  ExtendedScore score;
};

/// Exhaustive scan over all k-subsets of `pool` (which must be sorted
/// ascending). Lexicographically first subset wins ties because enumeration
/// is depth-first in pool order and only strict improvements replace the
/// incumbent.
inline BestSubset best_subset(const Instance& instance, const BitVec& outcomes,
                              const NoiseParams& noise,
                              const std::vector<int>& pool, int k,
                              bool maximize) {
  SubsetScorer scorer(instance, outcomes, noise, k);
  BestSubset best;
  bool found = false;
  std::vector<int> current;
  current.reserve(static_cast<std::size_t>(k));

  auto recurse = [&](auto&& self, std::size_t start) -> void {
    if (current.size() == static_cast<std::size_t>(k)) {
      const ExtendedScore s = scorer.score();
      const bool better = maximize ? likelihood_greater(s, best.score)
                                   : likelihood_greater(best.score, s);
      if (!found || better) {
        best.items = current;
        best.score = s;
        found = true;
      }
      return;
    }
    const std::size_t remaining = static_cast<std::size_t>(k) - current.size();
    for (std::size_t i = start; i + remaining <= pool.size(); ++i) {
      scorer.add(pool[i]);
      current.push_back(pool[i]);
      self(self, i + 1);
      current.pop_back();
      scorer.remove(pool[i]);
    }
  };
  recurse(recurse, 0);
  return best;
}

inline bool intersects_sorted(const std::vector<int>& items,
                              const std::vector<int>& sorted_set) {
  for (int x : items)
    if (std::binary_search(sorted_set.begin(), sorted_set.end(), x))
      return true;
  return false;
}

}  // namespace detail

/// Scheme 1: maximum-likelihood search for the active set over all K-subsets
/// (ties to the lexicographically smallest index tuple), then a uniformly
/// random L-subset of its complement.
inline DecodeResult decode_scheme1(const Instance& instance,
                                   const OutcomeVector& outcomes,
                                   const NoiseParams& noise,
                                   std::uint64_t seed, bool force = false) {
  validate(noise);
  const int n = instance.config.n_items;
  const int k = instance.config.n_defective;
  const int l = instance.config.n_requested;
  detail::check_guardrail(static_cast<std::size_t>(n), k, force,
                          "decode_scheme1");

  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  const auto best =
      detail::best_subset(instance, outcomes.outcomes, noise, pool, k, true);

  std::vector<int> complement;
  complement.reserve(static_cast<std::size_t>(n - k));
  for (int i = 0; i < n; ++i)
    if (!std::binary_search(best.items.begin(), best.items.end(), i))
      complement.push_back(i);

  Rng pick_rng(derive_seed(seed, 0));
  DecodeResult result;
  result.selected_inactive =
      pick_rng.sample_without_replacement(std::move(complement), l);
  result.estimated_active = best.items;
  result.error_flag = detail::intersects_sorted(result.selected_inactive,
                                                instance.defective_set);
  return result;
}

/// Scheme 2 for K = 1: score every item by ln P(y | x_i) and keep the L
/// least likely, ascending by (log-likelihood, index). This is exactly the
/// multi-stage decoder's output for K = 1.
inline DecodeResult decode_scheme2_k1(const Instance& instance,
                                      const OutcomeVector& outcomes,
                                      const NoiseParams& noise) {
  validate(noise);
  if (instance.config.n_defective != 1)
    throw InvalidConfigError("decode_scheme2_k1: requires k = 1");
  const int n = instance.config.n_items;
  const int l = instance.config.n_requested;

  detail::SubsetScorer scorer(instance, outcomes.outcomes, noise, 1);
  std::vector<detail::ExtendedScore> value(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    scorer.add(i);
    value[static_cast<std::size_t>(i)] = scorer.score();
    scorer.remove(i);
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& va = value[static_cast<std::size_t>(a)];
    const auto& vb = value[static_cast<std::size_t>(b)];
    if (detail::likelihood_greater(vb, va)) return true;
    if (detail::likelihood_greater(va, vb)) return false;
    return a < b;
  });

  DecodeResult result;
  result.selected_inactive.assign(order.begin(), order.begin() + l);
  result.error_flag = detail::intersects_sorted(result.selected_inactive,
                                                instance.defective_set);
  return result;
}

/// Scheme 2, general K: greedy multi-stage search. Each of the ceil(L/K)
/// stages removes the K-subset of the remaining pool with the smallest
/// subset log-likelihood (ties lexicographic); the first L collected indices
/// are the answer.
inline DecodeResult decode_scheme2_multistage(const Instance& instance,
                                              const OutcomeVector& outcomes,
                                              const NoiseParams& noise,
                                              bool force = false) {
  validate(noise);
  const int n = instance.config.n_items;
  const int k = instance.config.n_defective;
  const int l = instance.config.n_requested;
  const int stages = (l + k - 1) / k;

  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);

  DecodeResult result;
  result.stage_trace.emplace();
  std::vector<int> collected;
  collected.reserve(static_cast<std::size_t>(stages) *
                    static_cast<std::size_t>(k));
  for (int stage = 0; stage < stages; ++stage) {
    detail::check_guardrail(pool.size(), k, force, "decode_scheme2_multistage");
    auto best =
        detail::best_subset(instance, outcomes.outcomes, noise, pool, k, false);
    for (int item : best.items) {
      collected.push_back(item);
      pool.erase(std::find(pool.begin(), pool.end(), item));
    }
    result.stage_trace->push_back(std::move(best.items));
  }

  result.selected_inactive.assign(collected.begin(), collected.begin() + l);
  result.error_flag = detail::intersects_sorted(result.selected_inactive,
                                                instance.defective_set);
  return result;
}

inline nlohmann::json to_json(const DecodeResult& result, Scheme scheme) {
  nlohmann::json j{{"scheme", scheme_name(scheme)},
                   {"selected_inactive", result.selected_inactive},
                   {"error_flag", result.error_flag}};
  if (result.estimated_active) j["estimated_active"] = *result.estimated_active;
  if (result.stage_trace) j["stages"] = *result.stage_trace;
  return j;
}

}  // namespace gtbounds
