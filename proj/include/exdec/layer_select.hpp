// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "exdec/layer_stack.hpp"
#include "exdec/numkit.hpp"

namespace exdec {

/// Half-open range [lo, hi) of candidate contrasting layers.
struct LayerRange {
  std::size_t lo = 0;
  std::size_t hi = 0;

  bool contains(std::size_t layer) const { return layer >= lo && layer < hi; }
  bool empty() const { return hi <= lo; }
  friend bool operator==(const LayerRange&, const LayerRange&) = default;
};

struct BucketConfig {
  std::vector<LayerRange> buckets;
  std::size_t active_bucket = 0;

  const LayerRange& active() const { return buckets.at(active_bucket); }

  /// Throws InvalidConfig unless the buckets are non-empty, ascending, disjoint,
  /// end at or before `layer_count`, and active_bucket indexes one of them.
  void validate(std::size_t layer_count) const;

  /// `count` equal-width buckets over [0, layer_count); the last absorbs the remainder.
  static BucketConfig even(std::size_t layer_count, std::size_t count, std::size_t active);
};

enum class SelectionStrategy { min_entropy, max_entropy, jsd_baseline };

/// Open-ended prompts contrast against the lowest-entropy layer, factual ones
/// against the highest.
enum class PromptKind { open_ended, factual };

struct SelectionPolicy {
  SelectionStrategy strategy = SelectionStrategy::min_entropy;
  PromptKind prompt_kind = PromptKind::open_ended;

  static SelectionPolicy for_prompt_kind(PromptKind kind);
  static SelectionPolicy jsd();

  /// Throws InvalidConfig when an entropy strategy disagrees with the prompt kind.
  void validate() const;
};

std::string_view to_string(SelectionStrategy s);
std::string_view to_string(PromptKind k);
/// Throws InvalidConfig on an unknown name.
SelectionStrategy parse_strategy(std::string_view name);
PromptKind parse_prompt_kind(std::string_view name);

/**
 * Picks the contrasting layer from the active bucket.
 *
 * Entropy strategies take argmin/argmax of entropy(softmax(row i)); the JSD
 * baseline takes argmax of jsd(mature, softmax(row i)) where `mature` defaults
 * to softmax(final row). Ties go to the lowest layer. Throws InvalidConfig on
 * an empty or out-of-range bucket.
 */
std::size_t select_contrast_layer(const LayerLogitsStack& stack, const BucketConfig& cfg,
                                  const SelectionPolicy& policy, const ProbDist* mature = nullptr);

struct LayerDiagnostics {
  std::vector<double> entropy;
  /// (H_i - H_{i-1}) / H_{i-1}; none at layer 0 and where H_{i-1} == 0.
  std::vector<std::optional<double>> entropy_change_rate;
  std::vector<double> jsd_with_last;
};

/// Per-layer entropy, entropy change rate and JSD against the final layer.
LayerDiagnostics layer_diagnostics(const LayerLogitsStack& stack);

}  // namespace exdec
