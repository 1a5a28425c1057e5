// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "exdec/numkit.hpp"

namespace exdec {

/// Contrast probabilities are floored here before taking logs.
inline constexpr double kContrastFloor = 1e-12;

enum class NegInfMode { negative_infinity, minus_1000 };

std::string_view to_string(NegInfMode m);
/// Accepts "inf" and "minus1000". Throws InvalidConfig otherwise.
NegInfMode parse_neg_inf(std::string_view name);

/// Score assigned to tokens outside the plausible set.
double sentinel_score(NegInfMode m);

struct ContrastConfig {
  double beta = 0.1;
  NegInfMode neg_inf = NegInfMode::negative_infinity;
  double repetition_penalty = 1.0;
  /// Classic layer contrast: no extrapolation and JSD layer selection.
  bool dola_baseline = false;

  /// Throws InvalidConfig unless 0 <= beta <= 1 and repetition_penalty >= 1.
  void validate() const;
};

struct ContrastResult {
  std::vector<double> scores;
  std::size_t contrast_layer = 0;
  bool extrapolation_triggered = false;
  std::size_t plausible_set_size = 0;
};

/// {x : p(x) >= beta * max p, p(x) > 0}, ascending.
std::vector<TokenId> plausible_set(const ProbDist& mature, double beta);

/**
 * Multiplicative penalty on already-generated tokens: positive scores are
 * divided by `penalty`, negative ones multiplied. Each token is penalized once
 * however often it repeats.
 */
void apply_repetition_penalty(std::span<double> scores, std::span<const TokenId> history, double penalty);

/**
 * ln mature(x) - ln max(contrast(x), kContrastFloor) on the plausible set,
 * the sentinel elsewhere. The repetition penalty is applied before masking.
 * contrast_layer / extrapolation_triggered are left for the caller to fill.
 * Throws InvalidInput on a vocabulary mismatch.
 */
ContrastResult contrast_scores(const ProbDist& mature, const ProbDist& contrast, const ContrastConfig& cfg,
                               std::span<const TokenId> history = {});

}  // namespace exdec
