// SPDX-License-Identifier: Apache-2.0

#include "exdec/layer_stack.hpp"

#include <cmath>
#include <string>

#include "exdec/errors.hpp"

namespace exdec {

LayerLogitsStack::LayerLogitsStack(std::size_t layer_count, std::size_t vocab_size, std::vector<float> logits,
                                   std::uint64_t step)
    : layer_count_(layer_count), vocab_size_(vocab_size), step_(step), logits_(std::move(logits)) {
  if (vocab_size_ == 0) throw InvalidInput("LayerLogitsStack: empty vocabulary");
  if (logits_.size() != (layer_count_ + 1) * vocab_size_) {
    throw InvalidInput("LayerLogitsStack: expected " + std::to_string((layer_count_ + 1) * vocab_size_) +
                       " logits, got " + std::to_string(logits_.size()));
  }
  for (float z : logits_) {
    if (!std::isfinite(z)) throw InvalidInput("LayerLogitsStack: non-finite logit");
  }
}

std::span<const float> LayerLogitsStack::row(std::size_t layer) const {
  if (layer > layer_count_) {
    throw InvalidInput("LayerLogitsStack: layer " + std::to_string(layer) + " beyond N=" + std::to_string(layer_count_));
  }
  return std::span<const float>(logits_).subspan(layer * vocab_size_, vocab_size_);
}

}  // namespace exdec
