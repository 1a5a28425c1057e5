// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file tiny_model.hpp
 * @brief Seeded pre-norm decoder-only transformer with early-exit heads.
 *
 * Architecture: token + learned position embeddings, `layers` blocks of
 * [RMSNorm -> causal multi-head attention -> residual, RMSNorm -> GELU MLP ->
 * residual], a final RMSNorm and an untied vocabulary head with a fixed bias.
 *
 * Weights are drawn from xoshiro256** (splitmix64-seeded) in parameter-layout
 * order: token embedding, position embedding, then per layer
 * [attn norm gain, qkv, attn out, mlp norm gain, mlp up, mlp down], then the
 * final norm gain and the head. Norm gains are set to 1 without consuming
 * random draws; every other tensor is filled row-major with
 * uniform(-s, s) where s = 1/sqrt(fan_in), scaled by 1/sqrt(2 * layers) for
 * the two residual output projections. Arithmetic is double precision;
 * early-exit logits are rounded to float32.
 */

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "exdec/layer_stack.hpp"
#include "exdec/numkit.hpp"
#include "exdec/rng.hpp"

namespace exdec {

struct TinyModelConfig {
  std::uint64_t seed = 42;
  std::size_t layers = 8;
  std::size_t model_dim = 32;
  std::size_t heads = 2;
  std::size_t vocab_size = 64;
  std::size_t max_seq = 64;
  std::size_t ffn_mult = 4;
  /// Apply the final RMSNorm before the head at every early-exit layer.
  bool early_exit_norm = true;

  /// Throws InvalidConfig on a zero dimension or heads not dividing model_dim.
  void validate() const;
};

/// Offsets of every tensor inside the flat parameter vector.
struct ParamLayout {
  struct Block {
    std::size_t attn_norm, qkv, attn_out, mlp_norm, mlp_up, mlp_down;
  };
  std::size_t tok_emb = 0;
  std::size_t pos_emb = 0;
  std::vector<Block> blocks;
  std::size_t final_norm = 0;
  std::size_t head = 0;
  std::size_t total = 0;

  explicit ParamLayout(const TinyModelConfig& cfg);
};

/// Weighted first-order Markov source used as a synthetic training corpus.
class BigramCorpus {
 public:
  /// Each token gets `successor_weights.size()` distinct successors drawn from
  /// `seed`; weights are normalized.
  BigramCorpus(std::size_t vocab_size, std::uint64_t seed, std::vector<double> successor_weights = {0.6, 0.25, 0.15});

  std::size_t vocab_size() const { return successors_.size(); }
  std::span<const TokenId> successors(TokenId token) const { return successors_[token]; }
  std::span<const double> weights() const { return weights_; }
  /// Most probable successor of `token`.
  TokenId most_likely_next(TokenId token) const { return successors_[token].front(); }
  /// P(next | token) under the source.
  double transition(TokenId token, TokenId next) const;

  std::vector<TokenId> sample(Xoshiro256& rng, std::size_t length) const;

 private:
  std::vector<std::vector<TokenId>> successors_;
  std::vector<double> weights_;
};

struct TrainConfig {
  std::size_t steps = 0;
  std::size_t batch = 8;
  std::size_t seq_len = 16;
  double learning_rate = 3e-3;
  std::uint64_t seed = 7;
};

class TinyTransformer {
 public:
  explicit TinyTransformer(const TinyModelConfig& cfg);

  const TinyModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }

  /// Fixed additive bias on the vocabulary head, shared by every layer's exit.
  std::span<const double> head_bias() const { return head_bias_; }
  void set_head_bias(TokenId token, double bias);

  /**
   * Early-exit logits for the position after `context`.
   * Throws InvalidInput on an empty context, a context longer than max_seq, or
   * a token outside the vocabulary.
   */
  LayerLogitsStack early_exit(std::span<const TokenId> context) const;

  /// Ordinary next-token logits for the position after `context`, rounded to float32.
  std::vector<float> next_token_logits(std::span<const TokenId> context) const;

  /**
   * Mean next-token cross-entropy over `sequences` (each predicts tokens
   * 1..T-1 from 0..T-2) and its gradient with respect to params(), accumulated
   * into `grad` (resized and zeroed first).
   */
  double loss_and_gradient(std::span<const std::vector<TokenId>> sequences, std::vector<double>& grad) const;

  /// Loss only; used by gradient checks.
  double loss(std::span<const std::vector<TokenId>> sequences) const;

  /// Adam on sequences sampled from `corpus`. Returns per-step mean loss.
  std::vector<double> train(const BigramCorpus& corpus, const TrainConfig& train_cfg);

 private:
  struct Activations;

  void forward(std::span<const TokenId> tokens, Activations& act) const;
  double backward(std::span<const TokenId> tokens, const Activations& act, double scale,
                  std::vector<double>& grad) const;
  std::vector<float> exit_logits(std::span<const double> hidden, bool normalize) const;
  void check_context(std::span<const TokenId> context) const;

  TinyModelConfig cfg_;
  ParamLayout layout_;
  std::vector<double> params_;
  std::vector<double> head_bias_;
};

}  // namespace exdec
