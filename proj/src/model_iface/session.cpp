// SPDX-License-Identifier: Apache-2.0

#include "exdec/session.hpp"

#include <string>

#include "exdec/errors.hpp"

namespace exdec {

namespace {

class TinyModelSession final : public ModelSession {
 public:
  TinyModelSession(std::shared_ptr<const TinyTransformer> model, std::vector<TokenId> context)
      : model_(std::move(model)) {
    context_ = std::move(context);
  }

  LayerLogitsStack next_layer_logits(std::optional<TokenId> next_token) override {
    if (next_token) {
      if (*next_token >= vocab_size()) {
        throw InvalidInput("next_layer_logits: token " + std::to_string(*next_token) + " outside vocabulary");
      }
      context_.push_back(*next_token);
    }
    LayerLogitsStack stack = model_->early_exit(context_);
    stack.set_step(steps_++);
    return stack;
  }

  ProviderKind kind() const override { return ProviderKind::tiny_model; }
  std::size_t layer_count() const override { return model_->config().layers; }
  std::size_t vocab_size() const override { return model_->config().vocab_size; }

 private:
  std::shared_ptr<const TinyTransformer> model_;
};

class ReplaySession final : public ModelSession {
 public:
  ReplaySession(std::shared_ptr<const Trace> trace, std::shared_ptr<std::size_t> cursor, std::vector<TokenId> context)
      : trace_(std::move(trace)), cursor_(std::move(cursor)) {
    context_ = std::move(context);
  }

  LayerLogitsStack next_layer_logits(std::optional<TokenId> next_token) override {
    if (next_token) {
      if (*next_token >= vocab_size()) {
        throw InvalidInput("next_layer_logits: token " + std::to_string(*next_token) + " outside vocabulary");
      }
      if (last_recorded_ && *last_recorded_ != *next_token) {
        throw TraceError("trace divergence at trace step " + std::to_string(*cursor_) + ": recorded token " +
                         std::to_string(*last_recorded_) + ", caller fed " + std::to_string(*next_token));
      }
      context_.push_back(*next_token);
    }
    if (*cursor_ >= trace_->steps.size()) {
      throw EndOfTrace("trace exhausted after " + std::to_string(trace_->steps.size()) + " steps");
    }
    const TraceStep& rec = trace_->steps[(*cursor_)++];
    last_recorded_ = rec.chosen_token;
    LayerLogitsStack stack = rec.stack;
    stack.set_step(steps_++);
    return stack;
  }

  ProviderKind kind() const override { return ProviderKind::trace_replay; }
  std::size_t layer_count() const override { return trace_->layer_count; }
  std::size_t vocab_size() const override { return trace_->vocab_size; }

 private:
  std::shared_ptr<const Trace> trace_;
  std::shared_ptr<std::size_t> cursor_;
  std::optional<TokenId> last_recorded_;
};

void check_context(std::span<const TokenId> context, std::size_t vocab) {
  for (TokenId t : context) {
    if (t >= vocab) throw InvalidInput("session context token " + std::to_string(t) + " outside vocabulary");
  }
}

}  // namespace

TinyModelProvider::TinyModelProvider(std::shared_ptr<const TinyTransformer> model) : model_(std::move(model)) {
  if (!model_) throw InvalidInput("TinyModelProvider: null model");
}

std::unique_ptr<ModelSession> TinyModelProvider::open(std::vector<TokenId> context) {
  check_context(context, vocab_size());
  return std::make_unique<TinyModelSession>(model_, std::move(context));
}

TraceReplayProvider::TraceReplayProvider(Trace trace)
    : trace_(std::make_shared<const Trace>(std::move(trace))), cursor_(std::make_shared<std::size_t>(0)) {}

std::unique_ptr<ModelSession> TraceReplayProvider::open(std::vector<TokenId> context) {
  check_context(context, vocab_size());
  return std::make_unique<ReplaySession>(trace_, cursor_, std::move(context));
}

}  // namespace exdec
