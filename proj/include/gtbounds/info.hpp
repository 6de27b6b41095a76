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
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gtbounds/combinatorics.hpp"
#include "gtbounds/errors.hpp"
#include "gtbounds/model.hpp"

namespace gtbounds {

/// The pooled-test channel P(Y | X_S): K active inputs, Bernoulli(p) input
/// distribution, dilution/additive noise. Output probabilities depend on the
/// inputs only through their Hamming weight, which is what keeps every
/// computation here polynomial in K.
struct ChannelSpec {
  int k_defective = 0;
  DesignParams design;
  NoiseParams noise;
};

inline void validate(const ChannelSpec& c) {
  if (c.k_defective < 1)
    throw InvalidConfigError("ChannelSpec: require k >= 1");
  validate(c.design);
  validate(c.noise);
}

/// One evaluation of the error exponent E0(rho, j, n).
struct ExponentEval {
  double rho = 0.0;
  int j_split = 0;
  int n_power = 0;
  double value = 0.0;  // nats
};

/// Binary entropy in nats, with 0 ln 0 := 0.
inline double binary_entropy(double prob) {
  if (!(prob >= 0.0 && prob <= 1.0))
    throw InvalidConfigError("binary_entropy: argument outside [0, 1]");
  if (prob == 0.0 || prob == 1.0) return 0.0;
  return -prob * std::log(prob) - (1.0 - prob) * std::log1p(-prob);
}

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Per-test output law as a function of the number m of participating
/// defectives.
struct RowChannel {
  double log_u;    // ln u (-inf when u = 0)
  double log_1mq;  // ln(1-q)
  NoiseParams noise;

  explicit RowChannel(const NoiseParams& n)
      : log_u(n.dilution_u > 0.0 ? std::log(n.dilution_u) : kNegInf),
        log_1mq(std::log1p(-n.additive_q)),
        noise(n) {}

  double p0(int m) const { return row_null_probability(m, noise); }

  double log_p0(int m) const {
    if (m == 0) return log_1mq;
    return log_1mq + static_cast<double>(m) * log_u;
  }

  double log_p1(int m) const {
    const double z = p0(m);
    return z < 1.0 ? std::log1p(-z) : kNegInf;
  }

  double log_p(bool y, int m) const { return y ? log_p1(m) : log_p0(m); }
};

inline double logsumexp(const std::vector<double>& v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline double loglik_columns(const BitVec& outcomes,
                             const std::vector<const BitVec*>& columns,
                             const NoiseParams& noise) {
  if (columns.empty())
    throw InvalidConfigError("loglik_subset: need at least one column");
  const std::size_t m_rows = outcomes.size();
  for (const BitVec* c : columns)
    if (c->size() != m_rows)
      throw InvalidConfigError("loglik_subset: column/outcome length mismatch");

  const RowChannel chan(noise);
  const int k = static_cast<int>(columns.size());
  std::vector<double> lp0(static_cast<std::size_t>(k) + 1);
  std::vector<double> lp1(static_cast<std::size_t>(k) + 1);
  for (int m = 0; m <= k; ++m) {
    lp0[static_cast<std::size_t>(m)] = chan.log_p0(m);
    lp1[static_cast<std::size_t>(m)] = chan.log_p1(m);
  }

  double sum = 0.0;
  for (std::size_t r = 0; r < m_rows; ++r) {
    int m = 0;
    for (const BitVec* c : columns) m += c->get(r) ? 1 : 0;
    const double term = outcomes.get(r) ? lp1[static_cast<std::size_t>(m)]
                                        : lp0[static_cast<std::size_t>(m)];
    if (term == kNegInf) return kNegInf;
    sum += term;
  }
  return sum;
}

}  // namespace detail

/// Sum over tests of ln P(y_row | row restriction of the candidate columns).
/// Returns -inf when the observed outcome is impossible under the candidate
/// (e.g. a noiseless positive test none of the candidates attended).
inline double loglik_subset(const OutcomeVector& outcomes,
                            std::span<const BitVec> columns,
                            const NoiseParams& noise) {
  std::vector<const BitVec*> ptrs;
  ptrs.reserve(columns.size());
  for (const BitVec& c : columns) ptrs.push_back(&c);
  return detail::loglik_columns(outcomes.outcomes, ptrs, noise);
}

inline double loglik_subset(const Instance& instance,
                            std::span<const int> items,
                            const OutcomeVector& outcomes,
                            const NoiseParams& noise) {
  std::vector<const BitVec*> ptrs;
  ptrs.reserve(items.size());
  for (int i : items)
    ptrs.push_back(&instance.columns[static_cast<std::size_t>(i)]);
  return detail::loglik_columns(outcomes.outcomes, ptrs, noise);
}

/// Exact pair (H(Y | X over the K-j untargeted actives), H(Y | all K
/// actives)), each a binomial-weighted sum of binary entropies:
///
///   H(Y|X_{K-j part}) = sum_l C(K-j,l) p^l (1-p)^{K-j-l}
///                       H_b((1-q) u^l (1 - p(1-u))^j)
///   H(Y|X_all)        = sum_i C(K,i)  p^i (1-p)^{K-i}  H_b((1-q) u^i)
inline std::pair<double, double> cond_entropy_given_partial(
    const ChannelSpec& channel, int j_split) {
  validate(channel);
  const int k = channel.k_defective;
  if (j_split < 1 || j_split > k)
    throw InvalidConfigError("cond_entropy_given_partial: require 1 <= j <= k");
  const double p = channel.design.pool_density_p;
  const double u = channel.noise.dilution_u;
  const double q = channel.noise.additive_q;
  const double log_p = std::log(p);
  const double log_1mp = std::log1p(-p);
  // Chance a targeted active contributes nothing to a test: absent, or
  // present but diluted.
  const double idle = 1.0 - p * (1.0 - u);

  double h_partial = 0.0;
  for (int l = 0; l <= k - j_split; ++l) {
    const double w =
        std::exp(log_binomial_pmf(k - j_split, l, log_p, log_1mp));
    const double null_prob = (1.0 - q) * std::pow(u, static_cast<double>(l)) *
                             std::pow(idle, static_cast<double>(j_split));
    h_partial += w * binary_entropy(null_prob);
  }

  double h_full = 0.0;
  for (int i = 0; i <= k; ++i) {
    const double w = std::exp(log_binomial_pmf(k, i, log_p, log_1mp));
    h_full += w * binary_entropy(row_null_probability(i, channel.noise));
  }
  return {h_partial, h_full};
}

/// I(j) = I(Y, X_{K-j part}; X_{j part}) = H(Y|X_{K-j part}) - H(Y|X_all),
/// in nats. Weight-collapsed, so the cost is O(K) rather than O(2^K).
inline double mutual_info_exact(const ChannelSpec& channel, int j_split) {
  const auto [h_partial, h_full] = cond_entropy_given_partial(channel, j_split);
  return std::max(0.0, h_partial - h_full);
}

/// Gallager-style exponent for the pooled-test channel,
///
///   E0(rho,j,n) = -ln sum_Y sum_{X_rest} { sum_{X_j} Q(X_j)
///                 P(Y, X_rest | X_j)^{1/(1+rho n)} }^{1+rho n},
///
/// collapsed onto Hamming weights and evaluated in the log domain with
/// max-subtraction, so large (1 + rho n) powers cannot underflow. The domain
/// admits slightly negative rho (any rho with 1 + rho n > 0) so that central
/// finite differences at rho = 0 are well-defined; E0(0) = 0 is returned
/// exactly.
inline ExponentEval e0_general(const ChannelSpec& channel, double rho,
                               int j_split, int n_power) {
  validate(channel);
  const int k = channel.k_defective;
  if (j_split < 1 || j_split > k)
    throw InvalidConfigError("e0_general: require 1 <= j <= k");
  if (n_power < 1) throw InvalidConfigError("e0_general: require n >= 1");
  if (!(rho <= 1.0) || !(1.0 + rho * n_power > 0.0))
    throw InvalidConfigError("e0_general: rho outside (-1/n, 1]");
  if (rho == 0.0) return {rho, j_split, n_power, 0.0};

  const double p = channel.design.pool_density_p;
  const double log_p = std::log(p);
  const double log_1mp = std::log1p(-p);
  const double power = 1.0 + rho * n_power;
  const double s = 1.0 / power;
  const detail::RowChannel chan(channel.noise);

  std::vector<double> terms;
  terms.reserve(2 * static_cast<std::size_t>(k - j_split + 1));
  std::vector<double> inner(static_cast<std::size_t>(j_split) + 1);
  for (int y = 0; y <= 1; ++y) {
    for (int l = 0; l <= k - j_split; ++l) {
      const double log_w = log_binomial_pmf(k - j_split, l, log_p, log_1mp);
      for (int i = 0; i <= j_split; ++i)
        inner[static_cast<std::size_t>(i)] =
            log_binomial_pmf(j_split, i, log_p, log_1mp) +
            s * chan.log_p(y == 1, l + i);
      const double log_inner = detail::logsumexp(inner);
      terms.push_back(log_inner == detail::kNegInf
                          ? detail::kNegInf
                          : log_w + power * log_inner);
    }
  }
  return {rho, j_split, n_power, -detail::logsumexp(terms)};
}

/// Closed form of E0(rho, 1, n) for the noiseless channel:
///   -ln[(1-p)^{K-1}((1-p)^{1+rho n} + p^{1+rho n}) + 1 - (1-p)^{K-1}].
inline double e0_noiseless_closed(int k_defective, double p, double rho,
                                  int n_power) {
  if (k_defective < 1)
    throw InvalidConfigError("e0_noiseless_closed: require k >= 1");
  validate(DesignParams{p});
  if (n_power < 1)
    throw InvalidConfigError("e0_noiseless_closed: require n >= 1");
  if (!(rho <= 1.0) || !(1.0 + rho * n_power > 0.0))
    throw InvalidConfigError("e0_noiseless_closed: rho outside (-1/n, 1]");
  if (rho == 0.0) return 0.0;
  const double power = 1.0 + rho * n_power;
  const double idle = std::pow(1.0 - p, static_cast<double>(k_defective - 1));
  return -std::log(idle * (std::pow(1.0 - p, power) + std::pow(p, power)) +
                   1.0 - idle);
}

/// Approximation interval for I(j) with delta := p K.
struct ApproxInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Large-K surrogate for I(j), valid for the two pure noise models. For an
/// additive-only channel the lower and upper ends coincide; for a
/// dilution-only channel (u <= 0.5) they sandwich the exact value up to the
/// dropped O(1/K^2) remainder, whose constant is not pinned down here —
/// dominance tests should allow an explicit slack (5/K^2 by convention).
inline ApproxInterval mutual_info_approx(const ChannelSpec& channel,
                                         int j_split) {
  validate(channel);
  const int k = channel.k_defective;
  if (j_split < 1 || j_split > k)
    throw InvalidConfigError("mutual_info_approx: require 1 <= j <= k");
  const double u = channel.noise.dilution_u;
  const double q = channel.noise.additive_q;
  if (u > 0.0 && q > 0.0)
    throw UnsupportedChannelError(
        "mutual_info_approx: mixed dilution+additive channel not supported");

  const double delta = channel.design.pool_density_p * k;
  const double jk = static_cast<double>(j_split) / k;

  if (q > 0.0) {
    // Additive-only: I1 + I2 with the O(1/K^2) terms dropped.
    const double i1 = delta * std::exp(-delta) * (1.0 - q) * jk;
    const double i2 =
        delta * std::exp(-delta) * (std::log(1.0 / q) - (1.0 - q)) * jk;
    return {i1 + i2, i1 + i2};
  }

  // Dilution-only (u = 0 included). The surrogate is only stated for
  // u <= 0.5.
  if (u > 0.5)
    throw UnsupportedChannelError(
        "mutual_info_approx: dilution approximation requires u <= 0.5");
  const double u_ln_u = u > 0.0 ? u * std::log(u) : 0.0;
  const double i1 =
      delta * std::exp(-delta * (1.0 - u)) * (u_ln_u + 1.0 - u) * jk;
  const double core = (1.0 - u) * std::log(k / (j_split * delta * (1.0 - u)));
  const double i2_lo = delta * std::exp(-delta) * (core - u) * jk;
  const double i2_hi =
      delta * std::exp(-delta * (1.0 - u * u)) * (core - u + u * u) * jk;
  return {i1 + i2_lo, i1 + i2_hi};
}

}  // namespace gtbounds
