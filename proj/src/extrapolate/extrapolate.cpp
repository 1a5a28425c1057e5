// SPDX-License-Identifier: Apache-2.0

#include "exdec/extrapolate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "exdec/errors.hpp"

namespace exdec {

void ExtrapolationConfig::validate(std::size_t layer_count) const {
  if (!(alpha >= 0.0)) throw InvalidConfig("extrapolation: alpha must be >= 0");
  if (top_k < 1) throw InvalidConfig("extrapolation: top_k must be >= 1");
  if (e_start >= e_end) throw InvalidConfig("extrapolation: e_start must be below e_end");
  if (e_end > layer_count) {
    throw InvalidConfig("extrapolation: e_end " + std::to_string(e_end) + " beyond final layer " +
                        std::to_string(layer_count));
  }
  if (e_infer <= e_end) throw InvalidConfig("extrapolation: e_infer must lie beyond e_end");
  if (window < 3 || window > layer_count + 1) throw InvalidConfig("extrapolation: window must be in [3, N+1]");
}

bool trigger_fires(double jsd_last, double jsd_prev, double alpha) {
  if (jsd_prev < kTriggerZeroJsd) return jsd_last >= kTriggerZeroJsd;
  return std::abs(jsd_last - jsd_prev) / jsd_prev > alpha;
}

TriggerDetail trigger_detail(const LayerLogitsStack& stack, const ExtrapolationConfig& cfg) {
  const std::size_t n = stack.layer_count();
  if (n < 2) throw InvalidInput("trigger: need at least three layers");
  const ProbDist last = stack.layer_dist(n);
  const ProbDist prev = stack.layer_dist(n - 1);
  const ProbDist prev2 = stack.layer_dist(n - 2);
  TriggerDetail t;
  t.jsd_last = jsd_truncated(last, prev, cfg.jsd_support_k);
  t.jsd_prev = jsd_truncated(prev, prev2, cfg.jsd_support_k);
  if (t.jsd_prev >= kTriggerZeroJsd) t.relative_change = std::abs(t.jsd_last - t.jsd_prev) / t.jsd_prev;
  t.fired = cfg.force_trigger || trigger_fires(t.jsd_last, t.jsd_prev, cfg.alpha);
  return t;
}

bool trigger(const LayerLogitsStack& stack, const ExtrapolationConfig& cfg) {
  return trigger_detail(stack, cfg).fired;
}

ExtrapolationOutcome run_extrapolation(const LayerLogitsStack& stack, const ExtrapolationConfig& cfg) {
  ProbDist mature = stack.layer_dist(stack.layer_count());
  if (!cfg.enabled) return {false, {}, {}, {}, {}, std::move(mature)};
  cfg.validate(stack.layer_count());
  if (cfg.top_k > stack.vocab_size()) throw InvalidConfig("extrapolation: top_k exceeds vocabulary");
  if (!trigger(stack, cfg)) return {false, {}, {}, {}, {}, std::move(mature)};

  ExtrapolationOutcome out{true, {}, {}, {}, {}, mature};
  const std::vector<TokenId> top = top_k_indices(mature, cfg.top_k);

  // Largest probability outside the top-k set; its index settles ties.
  std::vector<bool> in_top(stack.vocab_size(), false);
  for (TokenId t : top) in_top[t] = true;
  double outside_max = -1.0;
  std::size_t outside_arg = stack.vocab_size();
  for (std::size_t i = 0; i < stack.vocab_size(); ++i) {
    if (!in_top[i] && mature[i] > outside_max) {
      outside_max = mature[i];
      outside_arg = i;
    }
  }

  std::vector<double> layers;
  std::vector<ProbDist> window;
  for (std::size_t j = cfg.e_start; j <= cfg.e_end; ++j) {
    layers.push_back(static_cast<double>(j));
    window.push_back(stack.layer_dist(j));
  }

  std::vector<double> merged(mature.probs().begin(), mature.probs().end());
  bool changed = false;
  std::vector<double> series(window.size());
  for (TokenId token : top) {
    for (std::size_t j = 0; j < window.size(); ++j) series[j] = window[j][token];
    if (!cfg.extrapolate_all_tokens && !is_monotonic(series)) continue;
    LinearFit fit;
    try {
      fit = ols_fit(layers, series);
    } catch (const DegenerateFit&) {
      continue;
    }
    const double predicted =
        std::clamp(ols_predict(fit, static_cast<double>(cfg.e_infer)), kMinExtrapolatedProb, 1.0);
    // The value must still rank above every token outside the top-k.
    const bool keeps_rank = predicted > outside_max || (predicted == outside_max && token < outside_arg);
    out.kept_tokens.push_back(token);
    out.fits.push_back(fit);
    out.predicted.push_back(predicted);
    out.accepted.push_back(keeps_rank);
    if (keeps_rank && merged[token] != predicted) {
      merged[token] = predicted;
      changed = true;
    }
  }

  if (changed) {
    double total = 0.0;
    for (double p : merged) total += p;
    for (double& p : merged) p /= total;
    out.merged = ProbDist::from_probs(std::move(merged));
  }
  return out;
}

}  // namespace exdec
