// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "exdec/config.hpp"
#include "exdec/pipeline.hpp"
#include "json.hpp"

namespace exdec {

/// A multiple-choice question; several options may be true.
struct McItem {
  std::vector<TokenId> prompt;
  std::vector<std::vector<TokenId>> options;
  std::vector<bool> labels;

  /// Throws DataError unless there are >= 2 options, one label per option,
  /// at least one true label and a non-empty prompt.
  void validate() const;
};

struct ScoredMcItem {
  std::vector<double> scores;
  std::vector<bool> labels;
};

struct McMetrics {
  double mc1 = 0.0;
  double mc2 = 0.0;
  double mc3 = 0.0;
  /// Fraction of items whose best true option strictly beats every false option.
  double accuracy = 0.0;
};

/**
 * Sum (or mean, with length_normalize) of the contrast score of each option
 * token, teacher-forcing the option after the prompt. Each option gets its own
 * session. Requires the minus-1000 sentinel in contrast mode; throws
 * InvalidConfig otherwise and InvalidInput for an empty option.
 */
std::vector<double> score_mc_item(LogitsProvider& provider, const RunConfig& cfg, const McItem& item,
                                  DecodeStats& stats, TraceWriter* recorder = nullptr);

/**
 * MC1: top-scoring option (lowest index on ties) is true.
 * MC2: sum exp(true scores) / sum exp(all scores).
 * MC3: fraction of true options scoring strictly above the best false option.
 * Each averaged over items; an empty input gives all zeros.
 */
McMetrics compute_mc_metrics(std::span<const ScoredMcItem> items);

struct EvalReport {
  std::vector<ScoredMcItem> items;
  McMetrics metrics;
  DecodeStats stats;
};

/// Scores every item in input order.
EvalReport run_mc_eval(LogitsProvider& provider, const RunConfig& cfg, std::span<const McItem> items,
                       TraceWriter* recorder = nullptr);

/// Metrics, per-item scores, trigger fraction and layer histogram; wall-clock
/// fields only when `with_timing` is set, so the default output is reproducible.
nlohmann::json to_json(const EvalReport& report, bool with_timing = false);

}  // namespace exdec
