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
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gtbounds/combinatorics.hpp"
#include "gtbounds/errors.hpp"
#include "gtbounds/info.hpp"
#include "gtbounds/model.hpp"

namespace gtbounds {

// All Gamma factors and test-count thresholds below are in nats and reported
// as reals; callers apply ceil() only when they need an integer test count.

/// I(1) below this is indistinguishable from zero: the conditional-entropy
/// difference sits under double-precision cancellation noise, and every
/// legitimate desk-scale channel is many orders of magnitude above it.
constexpr double kDegenerateInfoTolerance = 1e-15;

namespace detail {

struct StageShape {
  int n_stages;             // ceil(L / K)
  std::vector<int> l_of_j;  // l_of_j[j-1] = (N-K) - (n_stages*K - j)
};

inline StageShape stage_shape(const ProblemConfig& c) {
  StageShape s;
  s.n_stages = (c.n_requested + c.n_defective - 1) / c.n_defective;
  s.l_of_j.resize(static_cast<std::size_t>(c.n_defective));
  for (int j = 1; j <= c.n_defective; ++j)
    s.l_of_j[static_cast<std::size_t>(j - 1)] =
        (c.n_items - c.n_defective) - (s.n_stages * c.n_defective - j);
  return s;
}

/// ln C2(L,N,K,j) = ln[C(N-K,L_j) C(K*Nstg-j,K-j) C(K,1) C(K-1,j-1)].
inline double log_c2(const ProblemConfig& c, const StageShape& s, int j) {
  const int n = c.n_items, k = c.n_defective;
  const int lj = s.l_of_j[static_cast<std::size_t>(j - 1)];
  return log_binomial(n - k, lj) + log_binomial(k * s.n_stages - j, k - j) +
         log_binomial(k, 1) + log_binomial(k - 1, j - 1);
}

inline void require_stage_reach(const StageShape& s, const std::string& where) {
  if (s.l_of_j[0] <= 0)
    throw InvalidConfigError(
        where + ": L_1 = " + std::to_string(s.l_of_j[0]) +
        " <= 0; configuration is outside the multi-stage scheme's reach");
}

}  // namespace detail

/// C0(L,N,K,j) = sum_{i=1..j} C(N-K-j, L-i) C(j,i) / C(N-K, L), the chance
/// that a uniform L-pick from an (N-K)-set hits a planted j-subset. Always in
/// (0, 1]; terms with L-i out of range contribute zero.
inline double c0_factor(const ProblemConfig& config, int j) {
  validate(config);
  if (j < 1 || j > config.n_defective)
    throw InvalidConfigError("c0_factor: require 1 <= j <= k");
  const int n = config.n_items, k = config.n_defective, l = config.n_requested;
  const double log_denom = log_binomial(n - k, l);
  double total = 0.0;
  for (int i = 1; i <= j; ++i) {
    if (l - i < 0 || l - i > n - k - j) continue;
    total += std::exp(log_binomial(n - k - j, l - i) + log_binomial(j, i) -
                      log_denom);
  }
  return total;
}

struct GammaFactors {
  double gamma_ud = 0.0;   // ln[(N-K) K]
  double gamma_u1 = 0.0;   // gamma_ud + ln[C(N-K-1,L-1)/C(N-K,L)]
  double gamma_u2 = 0.0;   // max_j ln C2 / L_j
  int gamma_u2_j = 0;      // attaining j
  std::vector<double> per_j;  // per-j values of ln C2 / L_j
};

inline GammaFactors gamma_factors(const ProblemConfig& config) {
  validate(config);
  const int n = config.n_items, k = config.n_defective, l = config.n_requested;
  const auto shape = detail::stage_shape(config);
  detail::require_stage_reach(shape, "gamma_factors");

  GammaFactors g;
  g.gamma_ud = std::log(static_cast<double>(n - k) * k);
  g.gamma_u1 =
      g.gamma_ud + log_binomial(n - k - 1, l - 1) - log_binomial(n - k, l);
  g.per_j.resize(static_cast<std::size_t>(k));
  g.gamma_u2 = -std::numeric_limits<double>::infinity();
  for (int j = 1; j <= k; ++j) {
    const double v = detail::log_c2(config, shape, j) /
                     shape.l_of_j[static_cast<std::size_t>(j - 1)];
    g.per_j[static_cast<std::size_t>(j - 1)] = v;
    if (v > g.gamma_u2) {
      g.gamma_u2 = v;
      g.gamma_u2_j = j;
    }
  }
  return g;
}

/// Fano-converse factor Gamma_l = ln[C(N-K+j,j) / C(N-K+j-L,j)]. Returns
/// +inf when the denominator count is zero (only reachable for L > N-K,
/// which valid configurations exclude).
inline double gamma_l(const ProblemConfig& config, int j) {
  validate(config);
  if (j < 1 || j > config.n_defective)
    throw InvalidConfigError("gamma_l: require 1 <= j <= k");
  const int nk = config.n_items - config.n_defective;
  const int rem = nk + j - config.n_requested;
  if (rem < j) return std::numeric_limits<double>::infinity();
  return log_binomial(nk + j, j) - log_binomial(rem, j);
}

/// gamma(alpha) = (alpha/(1-alpha)) ln(1/alpha); the necessity/sufficiency
/// gap scale, < 1 on all of (0, 1).
inline double gap_function(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidConfigError("gap_function: alpha must lie strictly in (0, 1)");
  return alpha / (1.0 - alpha) * std::log(1.0 / alpha);
}

struct SufficiencyThresholds {
  double scheme1_m = 0.0;  // max_j ln[C(N-K,j)C(K,j)C0]/I(j)
  int scheme1_j = 0;
  std::optional<double> k1_m;  // ln C(N-K,L-1)/((N-L) I(1)); K = 1 only
  double multistage_m = 0.0;   // max_j ln C2/(L_j I(1))
  int multistage_j = 0;
  double alt_j_m = 0.0;  // max_j ln[C(N-K,L_j)C(KNstg-j,K-j)C(K,j)]
  int alt_j_j = 0;       //        / (floor(L_j/j) I(j)); comparison only
};

inline SufficiencyThresholds sufficiency(const ProblemConfig& config,
                                         const DesignParams& design,
                                         const NoiseParams& noise) {
  validate(config);
  const ChannelSpec channel{config.n_defective, design, noise};
  const int n = config.n_items, k = config.n_defective;
  const auto shape = detail::stage_shape(config);
  detail::require_stage_reach(shape, "sufficiency");

  std::vector<double> info(static_cast<std::size_t>(k));
  for (int j = 1; j <= k; ++j)
    info[static_cast<std::size_t>(j - 1)] = mutual_info_exact(channel, j);
  const double i1 = info[0];
  if (!(i1 > kDegenerateInfoTolerance))
    throw DegenerateChannelError(
        "sufficiency: I(1) = 0, thresholds diverge (degenerate channel)");

  SufficiencyThresholds out;
  double best = -std::numeric_limits<double>::infinity();
  for (int j = 1; j <= k; ++j) {
    const double v = (log_binomial(n - k, j) + log_binomial(k, j) +
                      std::log(c0_factor(config, j))) /
                     info[static_cast<std::size_t>(j - 1)];
    if (v > best) {
      best = v;
      out.scheme1_j = j;
    }
  }
  out.scheme1_m = best;

  best = -std::numeric_limits<double>::infinity();
  for (int j = 1; j <= k; ++j) {
    const double v = detail::log_c2(config, shape, j) /
                     (shape.l_of_j[static_cast<std::size_t>(j - 1)] * i1);
    if (v > best) {
      best = v;
      out.multistage_j = j;
    }
  }
  out.multistage_m = best;

  if (k == 1)
    out.k1_m = log_binomial(n - k, config.n_requested - 1) /
               ((n - config.n_requested) * i1);

  best = -std::numeric_limits<double>::infinity();
  for (int j = 1; j <= k; ++j) {
    const int lj = shape.l_of_j[static_cast<std::size_t>(j - 1)];
    const double num = log_binomial(n - k, lj) +
                       log_binomial(k * shape.n_stages - j, k - j) +
                       log_binomial(k, j);
    const double v =
        num / ((lj / j) * info[static_cast<std::size_t>(j - 1)]);
    if (v > best) {
      best = v;
      out.alt_j_j = j;
    }
  }
  out.alt_j_m = best;
  return out;
}

struct NecessityBound {
  double value = 0.0;
  int argmax_j = 0;
};

/// Fano lower bound on the number of tests: max_j Gamma_l(j) / I(j).
inline NecessityBound necessity(const ProblemConfig& config,
                                const DesignParams& design,
                                const NoiseParams& noise) {
  validate(config);
  const ChannelSpec channel{config.n_defective, design, noise};
  if (!(mutual_info_exact(channel, 1) > kDegenerateInfoTolerance))
    throw DegenerateChannelError(
        "necessity: I(1) = 0, bound diverges (degenerate channel)");
  NecessityBound out;
  out.value = -std::numeric_limits<double>::infinity();
  for (int j = 1; j <= config.n_defective; ++j) {
    const double v = gamma_l(config, j) / mutual_info_exact(channel, j);
    if (v > out.value) {
      out.value = v;
      out.argmax_j = j;
    }
  }
  return out;
}

namespace detail {

/// Maximum of a concave function on [0, 1]: golden-section to 1e-9 in rho,
/// cross-checked against a 101-point grid so flat regions cannot mislead the
/// bracket.
template <typename F>
inline std::pair<double, double> maximize_on_unit(const F& f) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = 0.0, b = 1.0;
  double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > 1e-9) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    }
  }
  double best_x = (f1 > f2) ? x1 : x2;
  double best_f = std::max(f1, f2);
  for (int i = 0; i <= 100; ++i) {
    const double x = i / 100.0;
    const double v = f(x);
    if (v > best_f) {
      best_f = v;
      best_x = x;
    }
  }
  return {best_x, best_f};
}

}  // namespace detail

struct PeTerm {
  int j = 0;
  double rho_star = 0.0;
  double exponent = 0.0;    // max_rho F_j(rho), clamped at 0
  double term_bound = 0.0;  // exp(-M * exponent)
};

struct PeUpperBound {
  double bound = 0.0;  // min(1, sum of terms)
  std::vector<PeTerm> terms;
};

/// Optimized error-probability upper bound for the multi-stage decoder:
///   P_e <= sum_j exp(-M (E0(rho,1,L_j) - rho ln C2 / M)),
/// with rho tuned per term. For K = 1 this is the single-term sort-decoder
/// bound with C2 = C(N-1, L-1) and L_1 = N-L.
inline PeUpperBound pe_upper(const ProblemConfig& config,
                             const DesignParams& design,
                             const NoiseParams& noise, int m_tests) {
  validate(config);
  if (m_tests < 1) throw InvalidConfigError("pe_upper: require m >= 1");
  const auto shape = detail::stage_shape(config);
  detail::require_stage_reach(shape, "pe_upper");
  const ChannelSpec channel{config.n_defective, design, noise};

  PeUpperBound out;
  double total = 0.0;
  for (int j = 1; j <= config.n_defective; ++j) {
    const int lj = shape.l_of_j[static_cast<std::size_t>(j - 1)];
    const double penalty = detail::log_c2(config, shape, j) / m_tests;
    const auto objective = [&](double rho) {
      return e0_general(channel, rho, 1, lj).value - rho * penalty;
    };
    const auto [rho_star, f_star] = detail::maximize_on_unit(objective);
    PeTerm term;
    term.j = j;
    term.rho_star = rho_star;
    term.exponent = std::max(0.0, f_star);  // F(0) = 0 is always feasible
    term.term_bound = std::exp(-static_cast<double>(m_tests) * term.exponent);
    total += term.term_bound;
    out.terms.push_back(term);
  }
  out.bound = std::min(1.0, total);
  return out;
}

/// Closed-form dominating surrogate for Gamma_u2 (valid when L is a multiple
/// of K, N-K > 4, L >= K, and 2 <= L-1 <= N-K-2):
///   H_b(a)/(1-a) + [ln(e a N_b)/N_b + ln(K e^K)/(N-K)] / (1-a),
/// a = (L-1)/(N-K), N_b = (N-K)/(K-1) (the N_b term vanishes for K = 1).
inline double gamma_mu(const ProblemConfig& config) {
  validate(config);
  const int n = config.n_items, k = config.n_defective, l = config.n_requested;
  if (l % k != 0)
    throw PreconditionError("gamma_mu: L must be an integer multiple of K");
  if (!(n - k > 4)) throw PreconditionError("gamma_mu: requires N - K > 4");
  if (l < k) throw PreconditionError("gamma_mu: requires L >= K");
  if (!(2 <= l - 1 && l - 1 <= (n - k) - 2))
    throw PreconditionError("gamma_mu: requires 2 <= L-1 <= (N-K)-2");

  const double alpha = static_cast<double>(l - 1) / (n - k);
  double bracket = (std::log(static_cast<double>(k)) + k) / (n - k);
  if (k > 1) {
    const double n_b = static_cast<double>(n - k) / (k - 1);
    bracket += std::log(std::exp(1.0) * alpha * n_b) / n_b;
  }
  return binary_entropy(alpha) / (1.0 - alpha) + bracket / (1.0 - alpha);
}

/// Linear-in-N defective count regime, K = beta N, L = gamma (N-K).
struct AsymptoticParams {
  double beta = 0.0;        // K / N
  double gamma_frac = 0.0;  // L / (N-K)
  int k0 = 0;               // smallest K for which C3 is used
};

struct LinearKBound {
  double c3 = 0.0;           // -ln[1 - (1-1/K0)^K0 + e^-2]
  double threshold_m = 0.0;  // (K/C3) max_j ln C2 / L_1 + ln K / C3
  double asymptotic_mu = 0.0;
};

/// Sufficient tests for the noiseless channel (p = 1/K) when K grows
/// linearly with N. Stronger than the fixed-K condition because the number
/// of error terms itself grows.
inline LinearKBound suff_linear_k(const ProblemConfig& config,
                                  const AsymptoticParams& asym) {
  validate(config);
  const int n = config.n_items, k = config.n_defective, l = config.n_requested;
  if (asym.k0 < 2)
    throw PreconditionError("suff_linear_k: requires K0 >= 2 so that C3 > 0");
  if (k < asym.k0) throw PreconditionError("suff_linear_k: requires K >= K0");
  if (!(l < n - 2 * k))
    throw PreconditionError("suff_linear_k: requires L < N - 2K");
  if (!(asym.beta > 0.0 && asym.beta < 1.0))
    throw PreconditionError("suff_linear_k: requires beta in (0, 1)");
  if (!(asym.gamma_frac > 0.0 && asym.gamma_frac < 1.0))
    throw PreconditionError("suff_linear_k: requires gamma in (0, 1)");

  LinearKBound out;
  out.c3 = -std::log(1.0 - std::pow(1.0 - 1.0 / asym.k0, asym.k0) +
                     std::exp(-2.0));

  const auto shape = detail::stage_shape(config);
  detail::require_stage_reach(shape, "suff_linear_k");
  double max_log_c2 = 0.0;
  for (int j = 1; j <= k; ++j)
    max_log_c2 = std::max(max_log_c2, detail::log_c2(config, shape, j));
  out.threshold_m = (k / out.c3) * max_log_c2 / shape.l_of_j[0] +
                    std::log(static_cast<double>(k)) / out.c3;

  const double beta = asym.beta, gf = asym.gamma_frac;
  const double c3p = (1.0 / out.c3) * (1.0 + beta / ((1.0 - beta) * (1.0 - gf)));
  out.asymptotic_mu =
      (k / out.c3) * binary_entropy(gf) / (1.0 - gf) +
      (k / (out.c3 * (1.0 - gf))) *
          (beta / (1.0 - beta)) * (std::log(gf * (1.0 - beta) / beta) + 2.0) +
      c3p * std::log(static_cast<double>(k));
  return out;
}

/// Default smallest-K anchor for the linear-growth bound in reports.
constexpr int kDefaultLinearKAnchor = 10;

/// Every analytical quantity for one configuration.
struct BoundReport {
  ProblemConfig config;
  DesignParams design;
  NoiseParams noise;
  std::vector<double> mutual_info;  // I(1..K), nats
  GammaFactors gammas;
  std::optional<double> gamma_mu_value;  // absent outside gamma_mu's domain
  SufficiencyThresholds suff;
  // Linear-K regime threshold with beta = K/N, gamma = L/(N-K), K0 = 10;
  // absent when that regime's hypotheses fail or the channel is noisy.
  std::optional<double> suff_linear_k_m;
  NecessityBound necessity_bound;
  std::optional<PeUpperBound> pe_bound_at_m;  // present when M >= 1 supplied
  double alpha = 0.0;                         // (L-1)/(N-K)
};

inline BoundReport compute_bound_report(const ProblemConfig& config,
                                        const DesignParams& design,
                                        const NoiseParams& noise,
                                        std::optional<int> m_tests = {}) {
  BoundReport r;
  r.config = config;
  r.design = design;
  r.noise = noise;
  const ChannelSpec channel{config.n_defective, design, noise};
  for (int j = 1; j <= config.n_defective; ++j)
    r.mutual_info.push_back(mutual_info_exact(channel, j));
  r.gammas = gamma_factors(config);
  try {
    r.gamma_mu_value = gamma_mu(config);
  } catch (const PreconditionError&) {
    r.gamma_mu_value.reset();
  }
  r.suff = sufficiency(config, design, noise);
  if (is_noiseless(noise)) {
    try {
      const AsymptoticParams asym{
          static_cast<double>(config.n_defective) / config.n_items,
          static_cast<double>(config.n_requested) /
              (config.n_items - config.n_defective),
          kDefaultLinearKAnchor};
      r.suff_linear_k_m = suff_linear_k(config, asym).threshold_m;
    } catch (const PreconditionError&) {
      r.suff_linear_k_m.reset();
    }
  }
  r.necessity_bound = necessity(config, design, noise);
  if (m_tests && *m_tests >= 1)
    r.pe_bound_at_m = pe_upper(config, design, noise, *m_tests);
  r.alpha = static_cast<double>(config.n_requested - 1) /
            (config.n_items - config.n_defective);
  return r;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string bound_report_csv_header() {
  return "n,k,l,p,u,q,i1,gamma_ud,gamma_u1,gamma_u2,gamma_mu,suff_scheme1,"
         "suff_k1,suff_multistage,suff_alt_j,necessity,alpha";
}

inline std::string to_csv_row(const BoundReport& r) {
  using detail::fmt_double;
  std::string row;
  row += std::to_string(r.config.n_items) + ',';
  row += std::to_string(r.config.n_defective) + ',';
  row += std::to_string(r.config.n_requested) + ',';
  row += fmt_double(r.design.pool_density_p) + ',';
  row += fmt_double(r.noise.dilution_u) + ',';
  row += fmt_double(r.noise.additive_q) + ',';
  row += fmt_double(r.mutual_info[0]) + ',';
  row += fmt_double(r.gammas.gamma_ud) + ',';
  row += fmt_double(r.gammas.gamma_u1) + ',';
  row += fmt_double(r.gammas.gamma_u2) + ',';
  row += (r.gamma_mu_value ? fmt_double(*r.gamma_mu_value) : "") + ',';
  row += fmt_double(r.suff.scheme1_m) + ',';
  row += (r.suff.k1_m ? fmt_double(*r.suff.k1_m) : "") + ',';
  row += fmt_double(r.suff.multistage_m) + ',';
  row += fmt_double(r.suff.alt_j_m) + ',';
  row += fmt_double(r.necessity_bound.value) + ',';
  row += fmt_double(r.alpha);
  return row;
}

inline nlohmann::json to_json(const PeUpperBound& b) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : b.terms)
    terms.push_back({{"j", t.j},
                     {"rho_star", t.rho_star},
                     {"exponent", t.exponent},
                     {"term_bound", t.term_bound}});
  return {{"bound", b.bound}, {"terms", terms}};
}

inline nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j{
      {"n", r.config.n_items},
      {"k", r.config.n_defective},
      {"l", r.config.n_requested},
      {"p", r.design.pool_density_p},
      {"u", r.noise.dilution_u},
      {"q", r.noise.additive_q},
      {"mutual_info", r.mutual_info},
      {"gamma_ud", r.gammas.gamma_ud},
      {"gamma_u1", r.gammas.gamma_u1},
      {"gamma_u2", r.gammas.gamma_u2},
      {"gamma_u2_j", r.gammas.gamma_u2_j},
      {"suff_scheme1", r.suff.scheme1_m},
      {"suff_scheme1_j", r.suff.scheme1_j},
      {"suff_multistage", r.suff.multistage_m},
      {"suff_multistage_j", r.suff.multistage_j},
      {"suff_alt_j", r.suff.alt_j_m},
      {"suff_alt_j_j", r.suff.alt_j_j},
      {"necessity", r.necessity_bound.value},
      {"necessity_j", r.necessity_bound.argmax_j},
      {"alpha", r.alpha}};
  j["gamma_mu"] = r.gamma_mu_value ? nlohmann::json(*r.gamma_mu_value)
                                   : nlohmann::json(nullptr);
  j["suff_k1"] =
      r.suff.k1_m ? nlohmann::json(*r.suff.k1_m) : nlohmann::json(nullptr);
  j["suff_linear_k"] = r.suff_linear_k_m ? nlohmann::json(*r.suff_linear_k_m)
                                         : nlohmann::json(nullptr);
  if (r.pe_bound_at_m) j["pe_bound"] = to_json(*r.pe_bound_at_m);
  return j;
}

}  // namespace gtbounds
