// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "exdec/numkit.hpp"

namespace exdec {

/**
 * Early-exit logits for one decode step.
 *
 * Row j holds the vocabulary-head scores of layer j for the final context
 * position; row 0 is the embedding layer and row N (the last one) is the
 * model's ordinary next-token logits. Storage is layer-major float32, the
 * same layout the trace file uses.
 */
class LayerLogitsStack {
 public:
  LayerLogitsStack() = default;

  /// Throws InvalidInput unless `logits.size() == (layer_count + 1) * vocab_size`
  /// and every entry is finite.
  LayerLogitsStack(std::size_t layer_count, std::size_t vocab_size, std::vector<float> logits,
                   std::uint64_t step = 0);

  /// N, the index of the final layer.
  std::size_t layer_count() const { return layer_count_; }
  std::size_t row_count() const { return layer_count_ + 1; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t step) { step_ = step; }

  std::span<const float> row(std::size_t layer) const;
  std::span<const float> final_row() const { return row(layer_count_); }
  std::span<const float> data() const { return logits_; }

  /// softmax(row(layer)).
  ProbDist layer_dist(std::size_t layer) const { return softmax(row(layer)); }

  friend bool operator==(const LayerLogitsStack&, const LayerLogitsStack&) = default;

 private:
  std::size_t layer_count_ = 0;
  std::size_t vocab_size_ = 0;
  std::uint64_t step_ = 0;
  std::vector<float> logits_;
};

}  // namespace exdec
