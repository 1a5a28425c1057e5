// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file trace.hpp
 * @brief Binary record of per-step early-exit logits.
 *
 * Layout, all integers u32 little-endian:
 *
 *   "EXDT" | version=1 | N | V | step_count
 *   step_count x ( chosen_token | (N+1)*V float32 LE logits, layer-major )
 *
 * `chosen_token` is the token the decoder committed after seeing that step's
 * stack: the emitted token when generating, the forced token when scoring.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <vector>

#include "exdec/layer_stack.hpp"

namespace exdec {

class ModelSession;

inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::size_t kTraceHeaderBytes = 20;

struct TraceStep {
  TokenId chosen_token = 0;
  LayerLogitsStack stack;

  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct Trace {
  std::uint32_t layer_count = 0;
  std::uint32_t vocab_size = 0;
  std::vector<TraceStep> steps;

  friend bool operator==(const Trace&, const Trace&) = default;
};

std::vector<std::uint8_t> encode_trace(const Trace& trace);
/// Throws TraceError on a bad magic, unknown version, or truncated payload.
Trace decode_trace(std::span<const std::uint8_t> bytes);

/// Throws TraceError if the file cannot be opened or decoded.
Trace read_trace(const std::filesystem::path& path);

/**
 * Streams steps to disk. The header's step count is patched in finish(); a
 * writer destroyed without finish() still patches it, swallowing I/O errors.
 */
class TraceWriter {
 public:
  /// Throws TraceError if the file cannot be created.
  TraceWriter(const std::filesystem::path& path, std::uint32_t layer_count, std::uint32_t vocab_size);
  ~TraceWriter();

  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;

  /// Throws InvalidInput on a shape mismatch, TraceError on I/O failure.
  void append(const LayerLogitsStack& stack, TokenId chosen_token);
  void finish();

  std::uint32_t steps_written() const { return steps_; }

 private:
  std::ofstream out_;
  std::uint32_t layer_count_;
  std::uint32_t vocab_size_;
  std::uint32_t steps_ = 0;
  bool finished_ = false;
};

/// Picks the committed token from a step's stack.
using TokenChooser = std::function<TokenId(const LayerLogitsStack&)>;

/// Greedy argmax of the final row (lowest index on ties).
TokenId greedy_final_layer(const LayerLogitsStack& stack);

/**
 * Runs `steps` decode steps on `session`, feeding back the chooser's token,
 * and appends each (stack, token) pair to `sink`. Throws InvalidInput unless
 * the session is backed by the tiny model.
 */
void record_trace(ModelSession& session, std::size_t steps, TraceWriter& sink,
                  const TokenChooser& choose = greedy_final_layer);

}  // namespace exdec
