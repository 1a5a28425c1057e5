// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "exdec/contrast.hpp"
#include "exdec/extrapolate.hpp"
#include "exdec/layer_select.hpp"
#include "exdec/session.hpp"
#include "exdec/tiny_model.hpp"
#include "json.hpp"

namespace exdec {

/// Where early-exit stacks come from.
struct ModelSettings {
  ProviderKind provider = ProviderKind::tiny_model;
  std::filesystem::path trace_path;
  TinyModelConfig tiny;
  /// Adam steps on the synthetic bigram corpus before serving; 0 keeps the seeded init.
  TrainConfig train;
  std::uint64_t corpus_seed = 11;
  /// Head bias injected after training, shared by every exit layer.
  std::optional<TokenId> distractor_token;
  double distractor_bias = 0.0;
};

enum class DecodeMode {
  /// Plain log-softmax of the final layer.
  vanilla,
  /// Extrapolation, layer selection and contrast.
  contrast,
};

struct RunConfig {
  ModelSettings model;
  DecodeMode mode = DecodeMode::contrast;
  BucketConfig buckets = BucketConfig{{{0, 4}, {4, 8}}, 1};
  SelectionPolicy policy;
  ExtrapolationConfig extrapolation;
  ContrastConfig contrast;
  /// JSD selection measures distance to the extrapolated distribution instead of the raw final layer.
  bool jsd_against_extrapolated = false;
  /// Pick the contrast layer on the first step of each prompt and reuse it.
  bool freeze_layer_per_prompt = false;
  std::size_t max_new_tokens = 16;
  std::optional<TokenId> end_token;
  /// Divide multiple-choice option scores by option length.
  bool length_normalize = false;
  /// Time the pipeline against a plain greedy pass over the same stacks.
  bool measure_overhead = false;

  /// Cross-field checks against the provider's layer count. Throws InvalidConfig.
  void validate(std::size_t layer_count) const;
};

/// Defaults scaled to a model with `layer_count` layers: two buckets with the
/// upper one active, and a fitting window over the top quarter of the stack
/// read off three layers past the end.
RunConfig default_run_config(std::size_t layer_count = 8);

nlohmann::json to_json(const RunConfig& cfg);
/// Overlays the keys present in `j` on `base`. Throws InvalidConfig on
/// unknown keys or wrongly typed values.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = default_run_config());
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = default_run_config());

/// Builds (and if configured, trains) the tiny model.
std::shared_ptr<TinyTransformer> build_tiny_model(const ModelSettings& settings);

/// Tiny model or trace replay, per settings. Throws TraceError for unreadable traces.
std::unique_ptr<LogitsProvider> make_provider(const ModelSettings& settings);

}  // namespace exdec
