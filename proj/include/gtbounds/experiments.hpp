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

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "gtbounds/bounds.hpp"
#include "gtbounds/decoders.hpp"
#include "gtbounds/model.hpp"

namespace gtbounds {

struct WilsonInterval {
  double low = 0.0;
  double high = 1.0;
};

/// 95% Wilson score interval by default. Behaves sensibly at zero observed
/// errors, unlike the Wald interval.
inline WilsonInterval wilson_interval(int errors, int trials,
                                      double z = 1.959963984540054) {
  if (trials <= 0 || errors < 0 || errors > trials)
    throw InvalidConfigError("wilson_interval: require 0 <= errors <= trials");
  const double n = trials;
  const double phat = errors / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (phat + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

/// One Monte Carlo batch: n_trials independent (instance, outcomes, decode)
/// runs at fixed parameters.
struct TrialBatch {
  ProblemConfig config;
  DesignParams design;
  NoiseParams noise;
  Scheme scheme = Scheme::kMultistage;
  int m_tests = 0;
  int n_trials = 0;
  int errors_observed = 0;
  double p_hat = 0.0;
  double wilson_low = 0.0;
  double wilson_high = 0.0;
  std::uint64_t master_seed = 0;
  // Wall-clock only; deliberately left out of CSV/JSON so identical inputs
  // produce identical output bytes.
  std::int64_t wall_time_ms = 0;
};

namespace detail {

inline bool run_one_trial(const ProblemConfig& config,
                          const DesignParams& design, const NoiseParams& noise,
                          Scheme scheme, std::uint64_t trial_seed, bool force) {
  const Instance inst = sample_instance(config, design, derive_seed(trial_seed, 0));
  const OutcomeVector y = generate_outcomes(inst, noise, derive_seed(trial_seed, 1));
  switch (scheme) {
    case Scheme::kScheme1:
      return decode_scheme1(inst, y, noise, derive_seed(trial_seed, 2), force)
          .error_flag;
    case Scheme::kK1Sort:
      return decode_scheme2_k1(inst, y, noise).error_flag;
    case Scheme::kMultistage:
      return decode_scheme2_multistage(inst, y, noise, force).error_flag;
  }
  throw InvalidConfigError("unknown scheme");
}

}  // namespace detail

/// Estimate the average error probability. Trials draw their seeds from the
/// master seed by counter split, so the result does not depend on thread
/// count or execution order.
inline TrialBatch estimate_pe(const ProblemConfig& config,
                              const DesignParams& design,
                              const NoiseParams& noise, Scheme scheme,
                              int m_tests, int n_trials,
                              std::uint64_t master_seed, bool force = false,
                              int n_threads = 0) {
  ProblemConfig cfg = config;
  cfg.n_tests = m_tests;
  validate(cfg);
  validate(design);
  validate(noise);
  if (n_trials < 1) throw InvalidConfigError("estimate_pe: require trials >= 1");
  if (scheme == Scheme::kK1Sort && cfg.n_defective != 1)
    throw InvalidConfigError("estimate_pe: k1_sort scheme requires k = 1");
  // Surface guardrail violations before spawning workers.
  detail::check_guardrail(static_cast<std::size_t>(cfg.n_items),
                          cfg.n_defective, force, scheme_name(scheme));

  const auto t0 = std::chrono::steady_clock::now();
  if (n_threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    n_threads = static_cast<int>(hw == 0 ? 1 : std::min(hw, 16u));
  }
  n_threads = std::min(n_threads, n_trials);

  std::atomic<int> errors{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        int local = 0;
        for (int trial = t; trial < n_trials; trial += n_threads) {
          const std::uint64_t trial_seed =
              derive_seed(master_seed, static_cast<std::uint64_t>(trial));
          if (detail::run_one_trial(cfg, design, noise, scheme, trial_seed,
                                    force))
            ++local;
        }
        errors += local;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);

  TrialBatch batch;
  batch.config = cfg;
  batch.design = design;
  batch.noise = noise;
  batch.scheme = scheme;
  batch.m_tests = m_tests;
  batch.n_trials = n_trials;
  batch.errors_observed = errors.load();
  batch.p_hat = static_cast<double>(batch.errors_observed) / n_trials;
  const auto ci = wilson_interval(batch.errors_observed, n_trials);
  batch.wilson_low = ci.low;
  batch.wilson_high = ci.high;
  batch.master_seed = master_seed;
  batch.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
  return batch;
}

/// One estimate_pe per M, rows in m_list order.
inline std::vector<TrialBatch> sweep_m(const ProblemConfig& config,
                                       const DesignParams& design,
                                       const NoiseParams& noise, Scheme scheme,
                                       const std::vector<int>& m_list,
                                       int n_trials, std::uint64_t master_seed,
                                       bool force = false) {
  std::vector<TrialBatch> rows;
  rows.reserve(m_list.size());
  for (std::size_t i = 0; i < m_list.size(); ++i)
    rows.push_back(estimate_pe(config, design, noise, scheme, m_list[i],
                               n_trials, derive_seed(master_seed, i), force));
  return rows;
}

inline std::string trial_batch_csv_header() {
  return "scheme,n,k,l,m,p,u,q,trials,errors,p_hat,wilson_low,wilson_high,"
         "seed";
}

inline std::string to_csv_row(const TrialBatch& b) {
  using detail::fmt_double;
  std::string row;
  row += scheme_name(b.scheme) + ',';
  row += std::to_string(b.config.n_items) + ',';
  row += std::to_string(b.config.n_defective) + ',';
  row += std::to_string(b.config.n_requested) + ',';
  row += std::to_string(b.m_tests) + ',';
  row += fmt_double(b.design.pool_density_p) + ',';
  row += fmt_double(b.noise.dilution_u) + ',';
  row += fmt_double(b.noise.additive_q) + ',';
  row += std::to_string(b.n_trials) + ',';
  row += std::to_string(b.errors_observed) + ',';
  row += fmt_double(b.p_hat) + ',';
  row += fmt_double(b.wilson_low) + ',';
  row += fmt_double(b.wilson_high) + ',';
  row += std::to_string(b.master_seed);
  return row;
}

inline nlohmann::json to_json(const TrialBatch& b) {
  return {{"scheme", scheme_name(b.scheme)},
          {"n", b.config.n_items},
          {"k", b.config.n_defective},
          {"l", b.config.n_requested},
          {"m", b.m_tests},
          {"p", b.design.pool_density_p},
          {"u", b.noise.dilution_u},
          {"q", b.noise.additive_q},
          {"trials", b.n_trials},
          {"errors", b.errors_observed},
          {"p_hat", b.p_hat},
          {"wilson_low", b.wilson_low},
          {"wilson_high", b.wilson_high},
          {"seed", b.master_seed}};
}

/// One row of the M*I(1)-scale factor comparison: the three sufficiency
/// factors plus the j = 1 necessity factor, as functions of L. The mutual
/// information term is common to all of them, so these are directly the
/// M*I(1) values a threshold plot shows.
struct FactorRow {
  int l = 0;
  double gamma_u2 = 0.0;
  double gamma_u1 = 0.0;
  double gamma_ud = 0.0;
  double gamma_l1 = 0.0;
};

inline std::vector<FactorRow> compare_factors(int n, int k,
                                              const std::vector<int>& l_list) {
  std::vector<FactorRow> rows;
  rows.reserve(l_list.size());
  for (int l : l_list) {
    const ProblemConfig config{n, k, l, 0};
    const auto g = gamma_factors(config);
    rows.push_back({l, g.gamma_u2, g.gamma_u1, g.gamma_ud,
                    gamma_l(config, 1)});
  }
  return rows;
}

inline std::string factor_row_csv_header() {
  return "n,k,l,gamma_u2,gamma_u1,gamma_ud,gamma_l1";
}

inline std::string to_csv_row(int n, int k, const FactorRow& r) {
  using detail::fmt_double;
  return std::to_string(n) + ',' + std::to_string(k) + ',' +
         std::to_string(r.l) + ',' + fmt_double(r.gamma_u2) + ',' +
         fmt_double(r.gamma_u1) + ',' + fmt_double(r.gamma_ud) + ',' +
         fmt_double(r.gamma_l1);
}

/// A named channel for the order tables.
struct NoiseCase {
  std::string label;  // "noiseless", "dilution", "additive"
  NoiseParams noise;
};

/// Order-scaling check row. Computed thresholds use exact I(1..K); the
/// predictions are the first-order scalings
///   sufficiency: (K/ln K) H_b(a)/(1-a)      [noiseless]
///                x 1/(1-u)                  [dilution]
///                (K/ln(1/q)) H_b(a)/(1-a)   [additive]
/// and the same with ln(1/(1-a)) in place of H_b(a)/(1-a) for necessity.
struct OrderRow {
  std::string noise_case;
  int k = 0;
  int n = 0;
  int l = 0;
  double alpha = 0.0;  // requested (nominal) alpha
  double u = 0.0;
  double q = 0.0;
  double i1 = 0.0;
  double suff_m = 0.0;
  double necessity_m = 0.0;
  double suff_predicted = 0.0;
  double necessity_predicted = 0.0;
  double suff_ratio = 0.0;
  double necessity_ratio = 0.0;
};

/// For each (K, alpha, case): N = 64 K, L = the positive multiple of K
/// nearest alpha (N-K) + 1, p = 1/K. Emits computed thresholds next to their
/// order predictions.
inline std::vector<OrderRow> order_tables(const std::vector<int>& k_list,
                                          const std::vector<double>& alpha_list,
                                          const std::vector<NoiseCase>& cases) {
  std::vector<OrderRow> rows;
  for (int k : k_list) {
    const int n = 64 * k;
    const DesignParams design{1.0 / k};
    for (double alpha : alpha_list) {
      const double l_raw = alpha * (n - k) + 1.0;
      const int l =
          k * std::max(1, static_cast<int>(std::llround(l_raw / k)));
      const ProblemConfig config{n, k, l, 0};
      for (const auto& nc : cases) {
        OrderRow row;
        row.noise_case = nc.label;
        row.k = k;
        row.n = n;
        row.l = l;
        row.alpha = alpha;
        row.u = nc.noise.dilution_u;
        row.q = nc.noise.additive_q;
        const ChannelSpec channel{k, design, nc.noise};
        row.i1 = mutual_info_exact(channel, 1);
        row.suff_m = sufficiency(config, design, nc.noise).multistage_m;
        row.necessity_m = necessity(config, design, nc.noise).value;

        const double suff_scale = binary_entropy(alpha) / (1.0 - alpha);
        const double nec_scale = std::log(1.0 / (1.0 - alpha));
        double denom = std::log(static_cast<double>(k));  // noiseless
        double dilution_boost = 1.0;
        if (nc.noise.additive_q > 0.0)
          denom = std::log(1.0 / nc.noise.additive_q);
        else if (nc.noise.dilution_u > 0.0)
          dilution_boost = 1.0 / (1.0 - nc.noise.dilution_u);
        row.suff_predicted = dilution_boost * k * suff_scale / denom;
        row.necessity_predicted = dilution_boost * k * nec_scale / denom;
        row.suff_ratio = row.suff_m / row.suff_predicted;
        row.necessity_ratio = row.necessity_m / row.necessity_predicted;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

inline std::string order_row_csv_header() {
  return "case,k,n,l,alpha,u,q,i1,suff_m,necessity_m,suff_predicted,"
         "necessity_predicted,suff_ratio,necessity_ratio";
}

inline std::string to_csv_row(const OrderRow& r) {
  using detail::fmt_double;
  return r.noise_case + ',' + std::to_string(r.k) + ',' + std::to_string(r.n) +
         ',' + std::to_string(r.l) + ',' + fmt_double(r.alpha) + ',' +
         fmt_double(r.u) + ',' + fmt_double(r.q) + ',' + fmt_double(r.i1) +
         ',' + fmt_double(r.suff_m) + ',' + fmt_double(r.necessity_m) + ',' +
         fmt_double(r.suff_predicted) + ',' +
         fmt_double(r.necessity_predicted) + ',' + fmt_double(r.suff_ratio) +
         ',' + fmt_double(r.necessity_ratio);
}

}  // namespace gtbounds
