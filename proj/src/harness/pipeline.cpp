// SPDX-License-Identifier: Apache-2.0

#include "exdec/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "exdec/errors.hpp"
#include "exdec/extrapolate.hpp"
#include "exdec/layer_select.hpp"

namespace exdec {

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point a, Clock::time_point b) { return std::chrono::duration<double>(b - a).count(); }

template <typename E>
[[noreturn]] void rethrow_at(std::size_t step, const E& e) {
  throw E("step " + std::to_string(step) + ": " + e.what());
}

}  // namespace

ContrastResult decode_step(const LayerLogitsStack& stack, const RunConfig& cfg, std::span<const TokenId> history,
                           std::optional<std::size_t> forced_layer) {
  if (cfg.mode == DecodeMode::vanilla) {
    ContrastResult r;
    r.scores = log_softmax(stack.final_row());
    apply_repetition_penalty(r.scores, history, cfg.contrast.repetition_penalty);
    r.contrast_layer = stack.layer_count();
    r.plausible_set_size = stack.vocab_size();
    return r;
  }

  const bool dola = cfg.contrast.dola_baseline;
  ExtrapolationConfig xcfg = cfg.extrapolation;
  if (dola) xcfg.enabled = false;
  ExtrapolationOutcome outcome = run_extrapolation(stack, xcfg);

  std::size_t layer = 0;
  if (forced_layer) {
    layer = *forced_layer;
  } else {
    const SelectionPolicy policy = dola ? SelectionPolicy::jsd() : cfg.policy;
    const ProbDist* mature = cfg.jsd_against_extrapolated ? &outcome.merged : nullptr;
    layer = select_contrast_layer(stack, cfg.buckets, policy, mature);
  }
  ContrastResult r = contrast_scores(outcome.merged, stack.layer_dist(layer), cfg.contrast, history);
  r.contrast_layer = layer;
  r.extrapolation_triggered = outcome.triggered;
  return r;
}

TokenId argmax_token(std::span<const double> scores) {
  if (scores.empty()) throw InvalidInput("argmax_token: empty scores");
  return static_cast<TokenId>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

double DecodeStats::overhead_ratio() const {
  const double base = provider_seconds + passthrough_seconds;
  if (passthrough_seconds <= 0.0 || base <= 0.0) return 0.0;
  return (provider_seconds + decode_seconds) / base;
}

void DecodeStats::merge(const DecodeStats& o) {
  steps += o.steps;
  triggered += o.triggered;
  for (const auto& [layer, n] : o.layer_histogram) layer_histogram[layer] += n;
  provider_seconds += o.provider_seconds;
  decode_seconds += o.decode_seconds;
  passthrough_seconds += o.passthrough_seconds;
}

StepOutcome run_step(ModelSession& session, std::optional<TokenId> feed, const RunConfig& cfg,
                     std::span<const TokenId> history, std::optional<std::size_t> forced_layer, DecodeStats& stats) {
  const auto t0 = Clock::now();
  LayerLogitsStack stack = session.next_layer_logits(feed);
  const auto t1 = Clock::now();
  ContrastResult result = decode_step(stack, cfg, history, forced_layer);
  const auto t2 = Clock::now();
  stats.provider_seconds += seconds(t0, t1);
  stats.decode_seconds += seconds(t1, t2);
  if (cfg.measure_overhead) {
    const auto t3 = Clock::now();
    std::vector<double> plain = log_softmax(stack.final_row());
    apply_repetition_penalty(plain, history, cfg.contrast.repetition_penalty);
    volatile TokenId sink = argmax_token(plain);
    (void)sink;
    stats.passthrough_seconds += seconds(t3, Clock::now());
  }
  ++stats.steps;
  if (result.extrapolation_triggered) ++stats.triggered;
  ++stats.layer_histogram[result.contrast_layer];
  return {std::move(stack), std::move(result)};
}

GenerationResult greedy_generate(LogitsProvider& provider, const RunConfig& cfg, const std::vector<TokenId>& prompt,
                                 TraceWriter* recorder) {
  cfg.validate(provider.layer_count());
  GenerationResult out;
  if (cfg.max_new_tokens == 0) return out;
  auto session = provider.open(prompt);
  std::optional<TokenId> feed;
  std::optional<std::size_t> frozen;
  for (std::size_t step = 0; step < cfg.max_new_tokens; ++step) {
    StepOutcome so;
    try {
      so = run_step(*session, feed, cfg, out.tokens, frozen, out.stats);
    } catch (const EndOfTrace& e) {
      rethrow_at(step, e);
    } catch (const TraceError& e) {
      rethrow_at(step, e);
    } catch (const InvalidInput& e) {
      rethrow_at(step, e);
    }
    if (cfg.freeze_layer_per_prompt && !frozen) frozen = so.result.contrast_layer;
    const TokenId token = argmax_token(so.result.scores);
    if (recorder) recorder->append(so.stack, token);
    out.tokens.push_back(token);
    out.log.push_back({step, token, so.result.scores[token], so.result.contrast_layer,
                       so.result.extrapolation_triggered, so.result.plausible_set_size});
    if (cfg.end_token && token == *cfg.end_token) break;
    feed = token;
  }
  return out;
}

}  // namespace exdec
