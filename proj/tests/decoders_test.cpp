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

#include "gtbounds/decoders.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "gtest/gtest.h"

#include "gtbounds/combinatorics.hpp"

namespace gtbounds {
namespace {

std::set<int> as_set(const std::vector<int>& v) { return {v.begin(), v.end()}; }

TEST(SubsetScorerTest, AgreesWithDirectLogLikelihood) {
  const ProblemConfig config{14, 3, 4, 22};
  const Instance inst = sample_instance(config, DesignParams{0.3}, 17);
  const NoiseParams noise{0.25, 0.05};
  const OutcomeVector y = generate_outcomes(inst, noise, 18);

  detail::SubsetScorer scorer(inst, y.outcomes, noise, 3);
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::vector<int> items = rng.sample_subset(14, 3);
    for (int i : items) scorer.add(i);
    const auto s = scorer.score();
    EXPECT_EQ(s.degree, 0);  // channel has no hard zeros
    EXPECT_NEAR(s.finite, loglik_subset(inst, items, y, noise), 1e-9);
    for (int i : items) scorer.remove(i);
  }
}

TEST(SubsetScorerTest, GradesImpossibilityOnNoiselessChannels) {
  const ProblemConfig config{14, 3, 4, 22};
  const Instance inst = sample_instance(config, DesignParams{0.3}, 17);
  const OutcomeVector y = generate_outcomes(inst, NoiseParams{}, 18);

  detail::SubsetScorer scorer(inst, y.outcomes, NoiseParams{}, 3);
  Rng rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const std::vector<int> items = rng.sample_subset(14, 3);
    for (int i : items) scorer.add(i);
    const auto s = scorer.score();
    // degree > 0 exactly when the plain log-likelihood is -inf.
    const double direct = loglik_subset(inst, items, y, NoiseParams{});
    if (s.degree > 0)
      EXPECT_EQ(direct, -std::numeric_limits<double>::infinity());
    else
      EXPECT_NEAR(s.finite, direct, 1e-9);
    for (int i : items) scorer.remove(i);
  }
}

TEST(Scheme1Test, NoiselessUniqueConsistentSetIsAlwaysCorrect) {
  const ProblemConfig config{10, 2, 3, 40};
  const DesignParams design{0.5};
  for (int trial = 0; trial < 100; ++trial) {
    const Instance inst = sample_instance(config, design, 300 + trial);
    const OutcomeVector y = generate_outcomes(inst, NoiseParams{}, trial);
    const DecodeResult res = decode_scheme1(inst, y, NoiseParams{}, trial);
    EXPECT_FALSE(res.error_flag);
    EXPECT_EQ(*res.estimated_active, inst.defective_set);
  }
}

TEST(Scheme1Test, RecoversActiveSetWithModerateTests) {
  // At M = 20 an extra consistent pair survives ~5% of the time and the
  // lexicographic tie-break halves that into misses, so exact recovery sits
  // near 0.977; M = 30 pushes the ambiguity low enough for a 0.99 floor.
  const ProblemConfig config{10, 2, 3, 30};
  const DesignParams design{0.5};
  int hits = 0;
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    const Instance inst = sample_instance(config, design, 9000 + trial);
    const OutcomeVector y = generate_outcomes(inst, NoiseParams{}, trial);
    const DecodeResult res = decode_scheme1(inst, y, NoiseParams{}, trial);
    if (*res.estimated_active == inst.defective_set) ++hits;
  }
  EXPECT_GE(static_cast<double>(hits) / trials, 0.99);
}

TEST(MultistageTest, PrefersMostContradictedSubsetOnNoiselessData) {
  // Defectives {0, 1}; y = col0 OR col1 = (1,1,1). Pair {2,3} leaves two
  // positive tests uncovered (impossibility degree 2), every pair containing
  // a defective leaves at most one, and {0,3} is outright consistent. The
  // stage must remove {2,3}.
  Instance inst;
  inst.config = ProblemConfig{4, 2, 2, 3};
  inst.design = DesignParams{0.5};
  inst.defective_set = {0, 1};
  inst.columns.assign(4, BitVec(3));
  inst.columns[0].set(0);
  inst.columns[0].set(1);
  inst.columns[1].set(1);
  inst.columns[1].set(2);
  inst.columns[3].set(2);
  OutcomeVector y;
  y.outcomes = BitVec(3);
  for (int r = 0; r < 3; ++r) y.outcomes.set(r);

  const DecodeResult res = decode_scheme2_multistage(inst, y, NoiseParams{});
  EXPECT_EQ(res.selected_inactive, (std::vector<int>{2, 3}));
  EXPECT_FALSE(res.error_flag);
}

TEST(Scheme1Test, ZeroTestsMatchesHypergeometricOracle) {
  // With M = 0 every K-subset ties, the estimate is the lexicographically
  // first subset {0, 1}, and the random L-pick errs with a probability given
  // by enumerating defective overlap with {0, 1}.
  const int n = 12, k = 2, l = 3;
  const ProblemConfig config{n, k, l, 0};
  const DesignParams design{0.5};

  double expected = 0.0;
  for (int overlap = 0; overlap <= k; ++overlap) {
    const double p_overlap = binomial_count(k, overlap) *
                             binomial_count(n - k, k - overlap) /
                             binomial_count(n, k);
    const int defectives_in_pool = k - overlap;
    const double p_miss = binomial_count(n - k - defectives_in_pool, l) /
                          binomial_count(n - k, l);
    expected += p_overlap * (1.0 - p_miss);
  }

  const int trials = 10000;
  int errors = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const Instance inst = sample_instance(config, design, 5000 + trial);
    const OutcomeVector y = generate_outcomes(inst, NoiseParams{}, trial);
    const DecodeResult res = decode_scheme1(inst, y, NoiseParams{}, trial);
    EXPECT_EQ(*res.estimated_active, (std::vector<int>{0, 1}));
    if (res.error_flag) ++errors;
  }
  const double p_hat = static_cast<double>(errors) / trials;
  const double sigma = std::sqrt(expected * (1.0 - expected) / trials);
  EXPECT_NEAR(p_hat, expected, 3.0 * sigma);
}

TEST(Scheme1Test, GuardrailRejectsHugeEnumerations) {
  // C(60, 6) is about 5.0e7 subsets.
  const ProblemConfig config{60, 6, 5, 4};
  const Instance inst = sample_instance(config, DesignParams{0.2}, 1);
  const OutcomeVector y = generate_outcomes(inst, NoiseParams{}, 2);
  try {
    decode_scheme1(inst, y, NoiseParams{}, 3);
    FAIL() << "expected EnumerationLimitError";
  } catch (const EnumerationLimitError& e) {
    EXPECT_NE(std::string(e.what()).find("guardrail"), std::string::npos);
  }
}

TEST(Scheme1Test, ForceFlagKeepsResultOnSmallProblems) {
  const ProblemConfig config{12, 2, 3, 10};
  const Instance inst = sample_instance(config, DesignParams{0.4}, 21);
  const OutcomeVector y = generate_outcomes(inst, NoiseParams{}, 22);
  const DecodeResult a = decode_scheme1(inst, y, NoiseParams{}, 23, false);
  const DecodeResult b = decode_scheme1(inst, y, NoiseParams{}, 23, true);
  EXPECT_EQ(a.selected_inactive, b.selected_inactive);
  EXPECT_EQ(*a.estimated_active, *b.estimated_active);
}

TEST(SchemeK1Test, RequiresSingleDefective) {
  const ProblemConfig config{10, 2, 3, 5};
  const Instance inst = sample_instance(config, DesignParams{0.5}, 1);
  const OutcomeVector y = generate_outcomes(inst, NoiseParams{}, 2);
  EXPECT_THROW(decode_scheme2_k1(inst, y, NoiseParams{}), InvalidConfigError);
}

TEST(SchemeK1Test, AllInconsistentItemsSelectLexicographically) {
  // Noiseless, every column differs from y, so every score is -inf and the
  // tie rule picks the smallest indices.
  Instance inst;
  inst.config = ProblemConfig{6, 1, 3, 2};
  inst.design = DesignParams{0.5};
  inst.defective_set = {4};
  inst.columns.assign(6, BitVec(2));
  for (int i = 0; i < 6; ++i) inst.columns[i].set(0);  // all = (1, 0)
  OutcomeVector y;
  y.outcomes = BitVec(2);
  y.outcomes.set(1);  // y = (0, 1) matches no column
  const DecodeResult res = decode_scheme2_k1(inst, y, NoiseParams{});
  EXPECT_EQ(res.selected_inactive, (std::vector<int>{0, 1, 2}));
}

TEST(SchemeK1Test, ConsistentDefectiveNeverSelectedWhenOthersImpossible) {
  const ProblemConfig config{16, 1, 5, 25};
  const DesignParams design{0.5};
  for (int trial = 0; trial < 50; ++trial) {
    const Instance inst = sample_instance(config, design, 100 + trial);
    const OutcomeVector y = generate_outcomes(inst, NoiseParams{}, trial);
    int inconsistent = 0;
    for (int i = 0; i < 16; ++i)
      if (loglik_subset(inst, std::vector<int>{i}, y, NoiseParams{}) ==
          -std::numeric_limits<double>::infinity())
        ++inconsistent;
    const DecodeResult res = decode_scheme2_k1(inst, y, NoiseParams{});
    if (inconsistent >= 5) {
      EXPECT_FALSE(res.error_flag);
    }
  }
}

TEST(SchemeK1Test, FullRecoveryErrsIffDefectiveIsNotTopScoring) {
  // L = N-1: the one unselected item is the likelihood argmax, so the decode
  // errs exactly when the defective is not that argmax (tie-free inputs).
  const ProblemConfig config{12, 1, 11, 48};
  const DesignParams design{0.4};
  const NoiseParams noise{0.25, 0.1};
  int checked = 0;
  for (int trial = 0; trial < 120 && checked < 40; ++trial) {
    const Instance inst = sample_instance(config, design, 700 + trial);
    const OutcomeVector y = generate_outcomes(inst, noise, trial);
    std::vector<double> score(12);
    for (int i = 0; i < 12; ++i)
      score[i] = loglik_subset(inst, std::vector<int>{i}, y, noise);
    std::vector<double> sorted = score;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      continue;  // skip ties
    ++checked;
    const int argmax = static_cast<int>(
        std::max_element(score.begin(), score.end()) - score.begin());
    const DecodeResult res = decode_scheme2_k1(inst, y, noise);
    EXPECT_EQ(res.error_flag, argmax != inst.defective_set[0]);
  }
  EXPECT_GE(checked, 40);
}

TEST(SchemeK1Test, PermutationEquivariantOnTieFreeInputs) {
  const ProblemConfig config{10, 1, 3, 40};
  const DesignParams design{0.4};
  const NoiseParams noise{0.2, 0.05};

  int tested = 0;
  for (int seed = 0; seed < 60 && tested < 10; ++seed) {
    const Instance inst = sample_instance(config, design, 7000 + seed);
    const OutcomeVector y = generate_outcomes(inst, noise, seed);

    std::vector<double> score(10);
    for (int i = 0; i < 10; ++i)
      score[i] = loglik_subset(inst, std::vector<int>{i}, y, noise);
    std::vector<double> sorted = score;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      continue;  // need tie-free scores for exact equivariance
    ++tested;

    // Relabel item i as perm[i].
    const std::vector<int> perm{7, 3, 9, 0, 5, 1, 8, 2, 6, 4};
    Instance permuted = inst;
    for (int i = 0; i < 10; ++i) permuted.columns[perm[i]] = inst.columns[i];
    permuted.defective_set = {perm[inst.defective_set[0]]};
    std::sort(permuted.defective_set.begin(), permuted.defective_set.end());

    const DecodeResult base = decode_scheme2_k1(inst, y, noise);
    const DecodeResult mapped = decode_scheme2_k1(permuted, y, noise);
    std::set<int> expected;
    for (int i : base.selected_inactive) expected.insert(perm[i]);
    EXPECT_EQ(as_set(mapped.selected_inactive), expected);
  }
  EXPECT_GE(tested, 10);
}

TEST(Scheme1Test, ActiveEstimateIsPermutationEquivariant) {
  const ProblemConfig config{12, 2, 3, 30};
  const DesignParams design{0.4};
  const NoiseParams noise{0.2, 0.05};

  int tested = 0;
  for (int seed = 0; seed < 40 && tested < 5; ++seed) {
    const Instance inst = sample_instance(config, design, 8800 + seed);
    const OutcomeVector y = generate_outcomes(inst, noise, seed);

    // Require pairwise-distinct subset scores so the argmax is label-free.
    std::vector<double> scores;
    for (int a = 0; a < 12; ++a)
      for (int b = a + 1; b < 12; ++b)
        scores.push_back(loglik_subset(inst, std::vector<int>{a, b}, y, noise));
    std::sort(scores.begin(), scores.end());
    if (std::adjacent_find(scores.begin(), scores.end()) != scores.end())
      continue;
    ++tested;

    const std::vector<int> perm{5, 11, 2, 8, 0, 7, 1, 10, 4, 9, 3, 6};
    Instance permuted = inst;
    for (int i = 0; i < 12; ++i) permuted.columns[perm[i]] = inst.columns[i];
    permuted.defective_set.clear();
    for (int d : inst.defective_set) permuted.defective_set.push_back(perm[d]);
    std::sort(permuted.defective_set.begin(), permuted.defective_set.end());

    const DecodeResult base = decode_scheme1(inst, y, noise, 1);
    const DecodeResult mapped = decode_scheme1(permuted, y, noise, 1);
    std::set<int> expected;
    for (int i : *base.estimated_active) expected.insert(perm[i]);
    EXPECT_EQ(as_set(*mapped.estimated_active), expected);
  }
  EXPECT_GE(tested, 5);
}

TEST(MultistageTest, SingleStageMatchesExhaustiveArgmin) {
  // L = K: one stage, global argmin over all K-subsets.
  const ProblemConfig config{12, 3, 3, 25};
  const DesignParams design{0.3};
  const NoiseParams noise{0.15, 0.05};
  const Instance inst = sample_instance(config, design, 55);
  const OutcomeVector y = generate_outcomes(inst, noise, 56);

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_items;
  for (int a = 0; a < 12; ++a)
    for (int b = a + 1; b < 12; ++b)
      for (int c = b + 1; c < 12; ++c) {
        const double s =
            loglik_subset(inst, std::vector<int>{a, b, c}, y, noise);
        if (s < best) {
          best = s;
          best_items = {a, b, c};
        }
      }

  const DecodeResult res = decode_scheme2_multistage(inst, y, noise);
  ASSERT_TRUE(res.stage_trace.has_value());
  EXPECT_EQ(res.stage_trace->size(), 1u);
  EXPECT_EQ(res.selected_inactive, best_items);
}

TEST(MultistageTest, StagesAreDisjointAndSelectionHasNoDuplicates) {
  const ProblemConfig config{18, 3, 8, 20};
  const DesignParams design{0.25};
  const NoiseParams noise{0.2, 0.1};
  const Instance inst = sample_instance(config, design, 91);
  const OutcomeVector y = generate_outcomes(inst, noise, 92);
  const DecodeResult res = decode_scheme2_multistage(inst, y, noise);

  ASSERT_TRUE(res.stage_trace.has_value());
  EXPECT_EQ(res.stage_trace->size(), 3u);  // ceil(8/3)
  std::set<int> seen;
  for (const auto& stage : *res.stage_trace)
    for (int item : stage) EXPECT_TRUE(seen.insert(item).second);
  EXPECT_EQ(res.selected_inactive.size(), 8u);
  EXPECT_EQ(as_set(res.selected_inactive).size(), 8u);
  // Truncation keeps collection order: first two full stages plus the first
  // two items of the last.
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < 3; ++i)
      EXPECT_EQ(res.selected_inactive[3 * s + i], (*res.stage_trace)[s][i]);
  EXPECT_EQ(res.selected_inactive[6], (*res.stage_trace)[2][0]);
  EXPECT_EQ(res.selected_inactive[7], (*res.stage_trace)[2][1]);
}

TEST(MultistageTest, MatchesSortDecoderForSingleDefective) {
  const DesignParams design{0.4};
  const std::vector<NoiseParams> cases{{0.0, 0.0}, {0.2, 0.0}, {0.0, 0.1}};
  for (int l : {1, 5, 11}) {
    const ProblemConfig config{12, 1, l, 14};
    for (const auto& noise : cases) {
      for (int trial = 0; trial < 100; ++trial) {
        const Instance inst = sample_instance(config, design, 40000 + trial);
        const OutcomeVector y = generate_outcomes(inst, noise, trial);
        const DecodeResult sorted = decode_scheme2_k1(inst, y, noise);
        const DecodeResult staged = decode_scheme2_multistage(inst, y, noise);
        EXPECT_EQ(sorted.selected_inactive, staged.selected_inactive)
            << "l=" << l << " u=" << noise.dilution_u
            << " q=" << noise.additive_q << " trial=" << trial;
      }
    }
  }
}

TEST(ReplayIntegrationTest, ReplayedInstanceDecodesIdentically) {
  const ProblemConfig config{18, 2, 5, 24};
  const DesignParams design{0.3};
  const NoiseParams noise{0.15, 0.05};
  const Instance inst = sample_instance(config, design, 2718);
  const OutcomeVector y = generate_outcomes(inst, noise, 2719);

  const auto j = to_replay_json(config, design, noise, inst, y);
  const ReplayRecord rec = from_replay_json(j);

  const DecodeResult a = decode_scheme2_multistage(inst, y, noise);
  const DecodeResult b =
      decode_scheme2_multistage(rec.instance, rec.outcomes, rec.noise);
  EXPECT_EQ(a.selected_inactive, b.selected_inactive);
  EXPECT_EQ(a.error_flag, b.error_flag);

  const DecodeResult c = decode_scheme1(inst, y, noise, 99);
  const DecodeResult d = decode_scheme1(rec.instance, rec.outcomes, rec.noise, 99);
  EXPECT_EQ(c.selected_inactive, d.selected_inactive);
  EXPECT_EQ(*c.estimated_active, *d.estimated_active);
}

TEST(DecodeResultTest, JsonShape) {
  const ProblemConfig config{10, 2, 3, 12};
  const Instance inst = sample_instance(config, DesignParams{0.5}, 3);
  const OutcomeVector y = generate_outcomes(inst, NoiseParams{}, 4);
  const DecodeResult res = decode_scheme2_multistage(inst, y, NoiseParams{});
  const auto j = to_json(res, Scheme::kMultistage);
  EXPECT_EQ(j.at("scheme"), "multistage");
  EXPECT_EQ(j.at("selected_inactive").size(), 3u);
  EXPECT_TRUE(j.contains("stages"));
  EXPECT_FALSE(j.contains("estimated_active"));
  EXPECT_EQ(j.at("error_flag").is_boolean(), true);
}

}  // namespace
}  // namespace gtbounds
