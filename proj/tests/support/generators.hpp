// SPDX-License-Identifier: Apache-2.0
//
// Random inputs for property tests.

#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "exdec/layer_stack.hpp"

namespace testgen {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Random distribution; with `zeros` some entries are exactly 0 (never all).
inline std::vector<double> distribution(Rng& rng, std::size_t v, bool zeros = false) {
  std::vector<double> p(v);
  double total = 0;
  for (auto& x : p) {
    x = zeros && uniform(rng, 0, 1) < 0.3 ? 0.0 : std::exp(uniform(rng, -4, 4));
    total += x;
  }
  if (total == 0) {
    p[0] = 1;
    total = 1;
  }
  for (auto& x : p) x /= total;
  return p;
}

/// Logits drifting linearly with depth plus noise, so that some tokens rise or
/// fall monotonically near the top of the stack.
inline exdec::LayerLogitsStack drifting_stack(Rng& rng, std::size_t layers, std::size_t vocab, double noise = 0.3) {
  std::vector<double> base(vocab), drift(vocab);
  for (std::size_t i = 0; i < vocab; ++i) {
    base[i] = uniform(rng, -2, 2);
    drift[i] = uniform(rng, -0.6, 0.6);
  }
  std::vector<float> data;
  data.reserve((layers + 1) * vocab);
  for (std::size_t j = 0; j <= layers; ++j) {
    for (std::size_t i = 0; i < vocab; ++i) {
      data.push_back(static_cast<float>(base[i] + drift[i] * static_cast<double>(j) + uniform(rng, -noise, noise)));
    }
  }
  return exdec::LayerLogitsStack(layers, vocab, std::move(data));
}

/// Stack whose rows are ln of the given distributions (one per layer).
inline exdec::LayerLogitsStack stack_from_dists(const std::vector<std::vector<double>>& rows) {
  std::vector<float> data;
  for (const auto& r : rows) {
    for (double p : r) data.push_back(static_cast<float>(std::log(p)));
  }
  return exdec::LayerLogitsStack(rows.size() - 1, rows.front().size(), std::move(data));
}

}  // namespace testgen
