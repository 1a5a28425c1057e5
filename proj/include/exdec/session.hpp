// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "exdec/layer_stack.hpp"
#include "exdec/tiny_model.hpp"
#include "exdec/trace.hpp"

namespace exdec {

enum class ProviderKind { tiny_model, trace_replay };

/**
 * One decoding context. Each next_layer_logits() call optionally appends a
 * token and returns the early-exit stack for the following position; the
 * returned stack's step() counts calls on this session from zero.
 *
 * Sessions are single-owner and not thread-safe.
 */
class ModelSession {
 public:
  virtual ~ModelSession() = default;

  virtual LayerLogitsStack next_layer_logits(std::optional<TokenId> next_token) = 0;
  virtual ProviderKind kind() const = 0;
  virtual std::size_t layer_count() const = 0;
  virtual std::size_t vocab_size() const = 0;

  std::span<const TokenId> context() const { return context_; }
  std::uint64_t steps_taken() const { return steps_; }

 protected:
  std::vector<TokenId> context_;
  std::uint64_t steps_ = 0;
};

/// Opens sessions over a shared source of early-exit logits.
class LogitsProvider {
 public:
  virtual ~LogitsProvider() = default;

  virtual std::unique_ptr<ModelSession> open(std::vector<TokenId> context) = 0;
  virtual ProviderKind kind() const = 0;
  virtual std::size_t layer_count() const = 0;
  virtual std::size_t vocab_size() const = 0;
};

class TinyModelProvider final : public LogitsProvider {
 public:
  explicit TinyModelProvider(std::shared_ptr<const TinyTransformer> model);

  /// Throws InvalidInput if a context token is outside the vocabulary.
  std::unique_ptr<ModelSession> open(std::vector<TokenId> context) override;
  ProviderKind kind() const override { return ProviderKind::tiny_model; }
  std::size_t layer_count() const override { return model_->config().layers; }
  std::size_t vocab_size() const override { return model_->config().vocab_size; }

  const TinyTransformer& model() const { return *model_; }

 private:
  std::shared_ptr<const TinyTransformer> model_;
};

/**
 * Serves recorded stacks in file order. All sessions opened from one provider
 * draw from a single cursor, so a replay must open sessions and request steps
 * in the order of the recording run. A session that is handed a token
 * different from the one recorded for its previous step throws TraceError;
 * running past the last step throws EndOfTrace.
 */
class TraceReplayProvider final : public LogitsProvider {
 public:
  explicit TraceReplayProvider(Trace trace);

  std::unique_ptr<ModelSession> open(std::vector<TokenId> context) override;
  ProviderKind kind() const override { return ProviderKind::trace_replay; }
  std::size_t layer_count() const override { return trace_->layer_count; }
  std::size_t vocab_size() const override { return trace_->vocab_size; }

  std::size_t steps_remaining() const { return trace_->steps.size() - *cursor_; }

 private:
  std::shared_ptr<const Trace> trace_;
  std::shared_ptr<std::size_t> cursor_;
};

}  // namespace exdec
