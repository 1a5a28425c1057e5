// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "exdec/config.hpp"
#include "exdec/contrast.hpp"
#include "exdec/layer_stack.hpp"
#include "exdec/session.hpp"
#include "exdec/trace.hpp"

namespace exdec {

/**
 * Scores every vocabulary entry for one step.
 *
 * Contrast mode runs extrapolation (skipped under dola_baseline), picks the
 * contrast layer (or uses `forced_layer`) and applies the contrast objective.
 * Vanilla mode returns log_softmax(final row) with only the repetition penalty
 * applied; its contrast_layer is N and plausible_set_size is V.
 */
ContrastResult decode_step(const LayerLogitsStack& stack, const RunConfig& cfg, std::span<const TokenId> history = {},
                           std::optional<std::size_t> forced_layer = std::nullopt);

/// Highest score, lowest index on ties.
TokenId argmax_token(std::span<const double> scores);

/// Per-run accounting shared by every harness entry point.
struct DecodeStats {
  std::size_t steps = 0;
  std::size_t triggered = 0;
  std::map<std::size_t, std::size_t> layer_histogram;
  double provider_seconds = 0.0;
  double decode_seconds = 0.0;
  /// Plain greedy over the same stacks; filled only when measuring overhead.
  double passthrough_seconds = 0.0;

  double trigger_fraction() const { return steps ? static_cast<double>(triggered) / static_cast<double>(steps) : 0.0; }
  double seconds_per_token() const {
    return steps ? (provider_seconds + decode_seconds) / static_cast<double>(steps) : 0.0;
  }
  /// (provider + pipeline) / (provider + greedy); 0 when not measured.
  double overhead_ratio() const;
  void merge(const DecodeStats& other);
};

struct StepLog {
  std::size_t step = 0;
  TokenId token = 0;
  double score = 0.0;
  std::size_t contrast_layer = 0;
  bool extrapolation_triggered = false;
  std::size_t plausible_set_size = 0;
};

struct GenerationResult {
  std::vector<TokenId> tokens;
  std::vector<StepLog> log;
  DecodeStats stats;
};

struct StepOutcome {
  LayerLogitsStack stack;
  ContrastResult result;
};

/// Fetches one stack from `session`, runs decode_step on it and updates `stats`.
StepOutcome run_step(ModelSession& session, std::optional<TokenId> feed, const RunConfig& cfg,
                     std::span<const TokenId> history, std::optional<std::size_t> forced_layer, DecodeStats& stats);

/**
 * Greedy decoding from `prompt`. Stops after max_new_tokens or once the end
 * token is emitted (the end token is included). Provider errors are rethrown
 * with the step index prepended, keeping their type.
 */
GenerationResult greedy_generate(LogitsProvider& provider, const RunConfig& cfg, const std::vector<TokenId>& prompt,
                                 TraceWriter* recorder = nullptr);

}  // namespace exdec
