// SPDX-License-Identifier: Apache-2.0

#include "exdec/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "exdec/errors.hpp"

namespace exdec {

std::string_view to_string(NegInfMode m) { return m == NegInfMode::minus_1000 ? "minus1000" : "inf"; }

NegInfMode parse_neg_inf(std::string_view name) {
  if (name == "inf") return NegInfMode::negative_infinity;
  if (name == "minus1000") return NegInfMode::minus_1000;
  throw InvalidConfig("unknown neg-inf mode '" + std::string(name) + "'");
}

double sentinel_score(NegInfMode m) {
  return m == NegInfMode::minus_1000 ? -1000.0 : -std::numeric_limits<double>::infinity();
}

void ContrastConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidConfig("contrast: beta must lie in [0, 1]");
  if (!(repetition_penalty >= 1.0)) throw InvalidConfig("contrast: repetition penalty must be >= 1");
}

std::vector<TokenId> plausible_set(const ProbDist& mature, double beta) {
  const double threshold = beta * mature.max_prob();
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < mature.size(); ++i) {
    if (mature[i] > 0.0 && mature[i] >= threshold) out.push_back(static_cast<TokenId>(i));
  }
  return out;
}

void apply_repetition_penalty(std::span<double> scores, std::span<const TokenId> history, double penalty) {
  if (penalty == 1.0 || history.empty()) return;
  std::vector<bool> seen(scores.size(), false);
  for (TokenId t : history) {
    if (t >= scores.size() || seen[t]) continue;
    seen[t] = true;
    double& s = scores[t];
    if (s > 0.0) {
      s /= penalty;
    } else if (s < 0.0) {
      s *= penalty;
    }
  }
}

ContrastResult contrast_scores(const ProbDist& mature, const ProbDist& contrast, const ContrastConfig& cfg,
                               std::span<const TokenId> history) {
  if (mature.size() != contrast.size()) throw InvalidInput("contrast_scores: vocabulary size mismatch");
  cfg.validate();
  const std::vector<TokenId> keep = plausible_set(mature, cfg.beta);

  ContrastResult out;
  out.scores.resize(mature.size());
  for (std::size_t i = 0; i < mature.size(); ++i) {
    out.scores[i] = mature[i] > 0.0 ? std::log(mature[i]) - std::log(std::max(contrast[i], kContrastFloor))
                                    : -std::numeric_limits<double>::infinity();
  }
  apply_repetition_penalty(out.scores, history, cfg.repetition_penalty);

  std::vector<bool> masked(mature.size(), true);
  for (TokenId t : keep) masked[t] = false;
  const double sentinel = sentinel_score(cfg.neg_inf);
  for (std::size_t i = 0; i < mature.size(); ++i) {
    if (masked[i]) out.scores[i] = sentinel;
  }
  out.plausible_set_size = keep.size();
  return out;
}

}  // namespace exdec
