// SPDX-License-Identifier: Apache-2.0

#include "exdec/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <string>

#include "exdec/errors.hpp"

namespace exdec {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::string_view where, std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw InvalidConfig(std::string(where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InvalidConfig(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("config key '") + key + "': " + e.what());
  }
}

void read_token(const json& j, const char* key, std::optional<TokenId>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  TokenId t = 0;
  read(j, key, t);
  out = t;
}

}  // namespace

void RunConfig::validate(std::size_t layer_count) const {
  buckets.validate(layer_count);
  policy.validate();
  contrast.validate();
  if (mode == DecodeMode::contrast && extrapolation.enabled && !contrast.dola_baseline) {
    extrapolation.validate(layer_count);
  }
  if (layer_count < 2 && mode == DecodeMode::contrast && extrapolation.enabled) {
    throw InvalidConfig("extrapolation trigger needs at least two layers");
  }
}

RunConfig default_run_config(std::size_t layer_count) {
  if (layer_count < 2) throw InvalidConfig("default config needs at least two layers");
  RunConfig cfg;
  cfg.model.tiny.layers = layer_count;
  cfg.buckets = BucketConfig::even(layer_count, 2, 1);
  cfg.policy = SelectionPolicy::for_prompt_kind(PromptKind::open_ended);
  cfg.extrapolation.e_end = layer_count;
  cfg.extrapolation.e_start = std::min(layer_count - 1, (layer_count * 23 + 16) / 32);
  cfg.extrapolation.e_infer = layer_count + 3;
  return cfg;
}

json to_json(const RunConfig& cfg) {
  const auto& m = cfg.model;
  json buckets = json::array();
  for (const auto& b : cfg.buckets.buckets) buckets.push_back({b.lo, b.hi});
  return json{
      {"mode", cfg.mode == DecodeMode::vanilla ? "vanilla" : "contrast"},
      {"model",
       {{"provider", m.provider == ProviderKind::trace_replay ? "trace" : "tiny"},
        {"trace", m.trace_path.string()},
        {"seed", m.tiny.seed},
        {"layers", m.tiny.layers},
        {"model_dim", m.tiny.model_dim},
        {"heads", m.tiny.heads},
        {"vocab_size", m.tiny.vocab_size},
        {"max_seq", m.tiny.max_seq},
        {"ffn_mult", m.tiny.ffn_mult},
        {"early_exit_norm", m.tiny.early_exit_norm},
        {"train_steps", m.train.steps},
        {"train_batch", m.train.batch},
        {"train_seq_len", m.train.seq_len},
        {"learning_rate", m.train.learning_rate},
        {"train_seed", m.train.seed},
        {"corpus_seed", m.corpus_seed},
        {"distractor_token", m.distractor_token ? json(*m.distractor_token) : json(nullptr)},
        {"distractor_bias", m.distractor_bias}}},
      {"buckets", buckets},
      {"bucket", cfg.buckets.active_bucket},
      {"strategy", to_string(cfg.policy.strategy)},
      {"prompt_kind", to_string(cfg.policy.prompt_kind)},
      {"extrapolation",
       {{"enabled", cfg.extrapolation.enabled},
        {"alpha", cfg.extrapolation.alpha},
        {"top_k", cfg.extrapolation.top_k},
        {"e_start", cfg.extrapolation.e_start},
        {"e_end", cfg.extrapolation.e_end},
        {"e_infer", cfg.extrapolation.e_infer},
        {"window", cfg.extrapolation.window},
        {"force_trigger", cfg.extrapolation.force_trigger},
        {"extrapolate_all_tokens", cfg.extrapolation.extrapolate_all_tokens},
        {"jsd_support_k", cfg.extrapolation.jsd_support_k}}},
      {"contrast",
       {{"beta", cfg.contrast.beta},
        {"neg_inf", to_string(cfg.contrast.neg_inf)},
        {"repetition_penalty", cfg.contrast.repetition_penalty},
        {"dola_baseline", cfg.contrast.dola_baseline}}},
      {"jsd_against_extrapolated", cfg.jsd_against_extrapolated},
      {"freeze_layer_per_prompt", cfg.freeze_layer_per_prompt},
      {"max_new_tokens", cfg.max_new_tokens},
      {"end_token", cfg.end_token ? json(*cfg.end_token) : json(nullptr)},
      {"length_normalize", cfg.length_normalize},
      {"measure_overhead", cfg.measure_overhead},
  };
}

namespace {

RunConfig overlay(const json& j, RunConfig cfg) {
  reject_unknown(j, "config",
                 {"mode", "model", "buckets", "bucket", "strategy", "prompt_kind", "extrapolation", "contrast",
                  "jsd_against_extrapolated", "freeze_layer_per_prompt", "max_new_tokens", "end_token",
                  "length_normalize", "measure_overhead"});
  if (j.contains("mode")) {
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "vanilla") {
      cfg.mode = DecodeMode::vanilla;
    } else if (mode == "contrast") {
      cfg.mode = DecodeMode::contrast;
    } else {
      throw InvalidConfig("unknown mode '" + mode + "'");
    }
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, "model",
                   {"provider", "trace", "seed", "layers", "model_dim", "heads", "vocab_size", "max_seq", "ffn_mult",
                    "early_exit_norm", "train_steps", "train_batch", "train_seq_len", "learning_rate", "train_seed",
                    "corpus_seed", "distractor_token", "distractor_bias"});
    auto& s = cfg.model;
    if (m.contains("provider")) {
      const auto p = m.at("provider").get<std::string>();
      if (p == "tiny") {
        s.provider = ProviderKind::tiny_model;
      } else if (p == "trace") {
        s.provider = ProviderKind::trace_replay;
      } else {
        throw InvalidConfig("unknown provider '" + p + "'");
      }
    }
    std::string trace = s.trace_path.string();
    read(m, "trace", trace);
    s.trace_path = trace;
    read(m, "seed", s.tiny.seed);
    read(m, "layers", s.tiny.layers);
    read(m, "model_dim", s.tiny.model_dim);
    read(m, "heads", s.tiny.heads);
    read(m, "vocab_size", s.tiny.vocab_size);
    read(m, "max_seq", s.tiny.max_seq);
    read(m, "ffn_mult", s.tiny.ffn_mult);
    read(m, "early_exit_norm", s.tiny.early_exit_norm);
    read(m, "train_steps", s.train.steps);
    read(m, "train_batch", s.train.batch);
    read(m, "train_seq_len", s.train.seq_len);
    read(m, "learning_rate", s.train.learning_rate);
    read(m, "train_seed", s.train.seed);
    read(m, "corpus_seed", s.corpus_seed);
    read_token(m, "distractor_token", s.distractor_token);
    read(m, "distractor_bias", s.distractor_bias);
  }
  if (j.contains("buckets")) {
    cfg.buckets.buckets.clear();
    for (const auto& b : j.at("buckets")) {
      if (!b.is_array() || b.size() != 2) throw InvalidConfig("buckets: each bucket is [lo, hi]");
      cfg.buckets.buckets.push_back({b[0].get<std::size_t>(), b[1].get<std::size_t>()});
    }
  }
  read(j, "bucket", cfg.buckets.active_bucket);
  const bool has_strategy = j.contains("strategy");
  if (j.contains("prompt_kind")) {
    cfg.policy.prompt_kind = parse_prompt_kind(j.at("prompt_kind").get<std::string>());
    if (!has_strategy && cfg.policy.strategy != SelectionStrategy::jsd_baseline) {
      cfg.policy = SelectionPolicy::for_prompt_kind(cfg.policy.prompt_kind);
    }
  }
  if (has_strategy) {
    cfg.policy.strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (!j.contains("prompt_kind")) {
      if (cfg.policy.strategy == SelectionStrategy::min_entropy) cfg.policy.prompt_kind = PromptKind::open_ended;
      if (cfg.policy.strategy == SelectionStrategy::max_entropy) cfg.policy.prompt_kind = PromptKind::factual;
    }
  }
  if (j.contains("extrapolation")) {
    const json& e = j.at("extrapolation");
    reject_unknown(e, "extrapolation",
                   {"enabled", "alpha", "top_k", "e_start", "e_end", "e_infer", "window", "force_trigger",
                    "extrapolate_all_tokens", "jsd_support_k"});
    auto& x = cfg.extrapolation;
    read(e, "enabled", x.enabled);
    read(e, "alpha", x.alpha);
    read(e, "top_k", x.top_k);
    read(e, "e_start", x.e_start);
    read(e, "e_end", x.e_end);
    read(e, "e_infer", x.e_infer);
    read(e, "window", x.window);
    read(e, "force_trigger", x.force_trigger);
    read(e, "extrapolate_all_tokens", x.extrapolate_all_tokens);
    read(e, "jsd_support_k", x.jsd_support_k);
  }
  if (j.contains("contrast")) {
    const json& c = j.at("contrast");
    reject_unknown(c, "contrast", {"beta", "neg_inf", "repetition_penalty", "dola_baseline"});
    read(c, "beta", cfg.contrast.beta);
    if (c.contains("neg_inf")) cfg.contrast.neg_inf = parse_neg_inf(c.at("neg_inf").get<std::string>());
    read(c, "repetition_penalty", cfg.contrast.repetition_penalty);
    read(c, "dola_baseline", cfg.contrast.dola_baseline);
  }
  read(j, "jsd_against_extrapolated", cfg.jsd_against_extrapolated);
  read(j, "freeze_layer_per_prompt", cfg.freeze_layer_per_prompt);
  read(j, "max_new_tokens", cfg.max_new_tokens);
  read_token(j, "end_token", cfg.end_token);
  read(j, "length_normalize", cfg.length_normalize);
  read(j, "measure_overhead", cfg.measure_overhead);
  return cfg;
}

}  // namespace

RunConfig run_config_from_json(const json& j, RunConfig base) {
  try {
    return overlay(j, std::move(base));
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidConfig("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, std::move(base));
}

std::shared_ptr<TinyTransformer> build_tiny_model(const ModelSettings& settings) {
  auto model = std::make_shared<TinyTransformer>(settings.tiny);
  if (settings.train.steps > 0) {
    BigramCorpus corpus(settings.tiny.vocab_size, settings.corpus_seed);
    model->train(corpus, settings.train);
  }
  if (settings.distractor_token) {
    if (*settings.distractor_token >= settings.tiny.vocab_size) {
      throw InvalidConfig("distractor token outside vocabulary");
    }
    model->set_head_bias(*settings.distractor_token, settings.distractor_bias);
  }
  return model;
}

std::unique_ptr<LogitsProvider> make_provider(const ModelSettings& settings) {
  if (settings.provider == ProviderKind::trace_replay) {
    if (settings.trace_path.empty()) throw InvalidConfig("trace provider needs a trace path");
    return std::make_unique<TraceReplayProvider>(read_trace(settings.trace_path));
  }
  return std::make_unique<TinyModelProvider>(build_tiny_model(settings));
}

}  // namespace exdec
