// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file extrapolate.hpp
 * @brief Linear extrapolation of top-token probabilities past the final layer.
 *
 * When the final layer's distribution moves sharply relative to the two layers
 * below it, each top-k token of the final distribution that changes
 * monotonically over layers [e_start, e_end] gets a least-squares line through
 * its per-layer probabilities. The line is read off at the virtual layer
 * e_infer, and the resulting values are merged back into the final
 * distribution without letting any top-k token drop below a token outside
 * the top-k.
 */

#include <cstddef>
#include <optional>
#include <vector>

#include "exdec/layer_stack.hpp"
#include "exdec/numkit.hpp"

namespace exdec {

/// Extrapolated probabilities are clamped into [kMinExtrapolatedProb, 1].
inline constexpr double kMinExtrapolatedProb = 1e-9;
/// JSDs below this count as zero in the trigger ratio.
inline constexpr double kTriggerZeroJsd = 1e-12;

struct ExtrapolationConfig {
  bool enabled = true;
  double alpha = 0.3;
  std::size_t top_k = 10;
  std::size_t e_start = 6;
  std::size_t e_end = 8;
  std::size_t e_infer = 11;
  /// Trailing layers considered by the trigger; only the last three enter the ratio.
  std::size_t window = 3;
  /// Fire on every step regardless of alpha (overhead measurements).
  bool force_trigger = false;
  /// Test-only ablation: skip the monotonicity filter and fit every top-k token.
  bool extrapolate_all_tokens = false;
  /// Restrict trigger JSDs to the union of each side's top-k support; 0 = full vocabulary.
  std::size_t jsd_support_k = 0;

  /// Throws InvalidConfig unless e_start < e_end <= layer_count, e_infer > e_end,
  /// alpha >= 0, top_k >= 1 and 3 <= window <= layer_count + 1.
  void validate(std::size_t layer_count) const;
};

struct TriggerDetail {
  double jsd_last = 0.0;  ///< JSD(p_N, p_{N-1})
  double jsd_prev = 0.0;  ///< JSD(p_{N-1}, p_{N-2})
  std::optional<double> relative_change;  ///< none when jsd_prev is treated as zero
  bool fired = false;
};

/// The trigger decision from the two JSDs alone.
bool trigger_fires(double jsd_last, double jsd_prev, double alpha);

/// Trigger evaluated on the last three rows of `stack`. Requires N >= 2.
TriggerDetail trigger_detail(const LayerLogitsStack& stack, const ExtrapolationConfig& cfg);
bool trigger(const LayerLogitsStack& stack, const ExtrapolationConfig& cfg);

struct ExtrapolationOutcome {
  bool triggered = false;
  /// Top-k tokens of the final layer that passed the monotonicity filter, in top-k order.
  std::vector<TokenId> kept_tokens;
  /// One fit per kept token.
  std::vector<LinearFit> fits;
  /// Clamped prediction at e_infer per kept token.
  std::vector<double> predicted;
  /// Whether the prediction survived the top-k preservation rule.
  std::vector<bool> accepted;
  /// Final distribution after the merge; softmax(final row) unchanged when nothing applied.
  ProbDist merged;
};

/**
 * Runs the full extrapolation step. When not triggered (or disabled) the
 * merged distribution is softmax(final row) bit-for-bit. Throws InvalidConfig
 * when `cfg` does not fit the stack.
 */
ExtrapolationOutcome run_extrapolation(const LayerLogitsStack& stack, const ExtrapolationConfig& cfg);

}  // namespace exdec
