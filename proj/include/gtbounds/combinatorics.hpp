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
#include <limits>
#include <string>

#include "gtbounds/errors.hpp"

namespace gtbounds {

/// ln C(n, k) in nats via log-gamma. k is canonicalized to min(k, n-k) and
/// the k in {0, 1} cases are returned exactly, so symmetric call sites
/// produce bit-identical values.
inline double log_binomial(int n, int k) {
  if (k < 0 || k > n)
    throw InvalidConfigError("log_binomial: require 0 <= k <= n, got n=" +
                             std::to_string(n) + " k=" + std::to_string(k));
  if (k > n - k) k = n - k;
  if (k == 0) return 0.0;
  if (k == 1) return std::log(static_cast<double>(n));
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// C(n, k) as a double; +inf once past the representable range. Used for
/// enumeration guardrails, where only order of magnitude matters.
inline double binomial_count(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  if (k > n - k) k = n - k;
  double c = 1.0;
  for (int i = 1; i <= k; ++i) {
    c *= static_cast<double>(n - k + i) / static_cast<double>(i);
    if (std::isinf(c)) return c;
  }
  return c;
}

/// ln of the Binomial(n, p) pmf at k, taking ln p and ln(1-p) precomputed.
/// The m * (-inf) corner (k or n-k zero with a degenerate p) is pinned to
/// the correct limit instead of NaN.
inline double log_binomial_pmf(int n, int k, double log_p, double log_1mp) {
  double v = log_binomial(n, k);
  if (k > 0) v += k * log_p;
  if (n - k > 0) v += (n - k) * log_1mp;
  return v;
}

}  // namespace gtbounds
