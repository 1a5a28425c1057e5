// SPDX-License-Identifier: Apache-2.0

#include "exdec/layer_select.hpp"

#include <string>

#include "exdec/errors.hpp"

namespace exdec {

void BucketConfig::validate(std::size_t layer_count) const {
  if (buckets.empty()) throw InvalidConfig("buckets: none configured");
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const auto& b = buckets[i];
    if (b.empty()) throw InvalidConfig("buckets: bucket " + std::to_string(i) + " is empty");
    if (b.hi > layer_count) {
      throw InvalidConfig("buckets: bucket " + std::to_string(i) + " reaches layer " + std::to_string(b.hi) +
                          ", final layer " + std::to_string(layer_count) + " cannot be a candidate");
    }
    if (i > 0 && b.lo < buckets[i - 1].hi) throw InvalidConfig("buckets: ranges must be ascending and disjoint");
  }
  if (active_bucket >= buckets.size()) throw InvalidConfig("buckets: active bucket index out of range");
}

BucketConfig BucketConfig::even(std::size_t layer_count, std::size_t count, std::size_t active) {
  if (count == 0 || count > layer_count) throw InvalidConfig("buckets: cannot split into that many buckets");
  BucketConfig cfg;
  const std::size_t width = layer_count / count;
  for (std::size_t i = 0; i < count; ++i) {
    cfg.buckets.push_back({i * width, i + 1 == count ? layer_count : (i + 1) * width});
  }
  cfg.active_bucket = active;
  cfg.validate(layer_count);
  return cfg;
}

SelectionPolicy SelectionPolicy::for_prompt_kind(PromptKind kind) {
  return {kind == PromptKind::open_ended ? SelectionStrategy::min_entropy : SelectionStrategy::max_entropy, kind};
}

SelectionPolicy SelectionPolicy::jsd() { return {SelectionStrategy::jsd_baseline, PromptKind::open_ended}; }

void SelectionPolicy::validate() const {
  if (strategy == SelectionStrategy::min_entropy && prompt_kind != PromptKind::open_ended) {
    throw InvalidConfig("min-entropy selection applies to open-ended prompts");
  }
  if (strategy == SelectionStrategy::max_entropy && prompt_kind != PromptKind::factual) {
    throw InvalidConfig("max-entropy selection applies to factual prompts");
  }
}

std::string_view to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::min_entropy: return "min-entropy";
    case SelectionStrategy::max_entropy: return "max-entropy";
    case SelectionStrategy::jsd_baseline: return "jsd";
  }
  return "?";
}

std::string_view to_string(PromptKind k) { return k == PromptKind::open_ended ? "open" : "factual"; }

SelectionStrategy parse_strategy(std::string_view name) {
  if (name == "min-entropy") return SelectionStrategy::min_entropy;
  if (name == "max-entropy") return SelectionStrategy::max_entropy;
  if (name == "jsd") return SelectionStrategy::jsd_baseline;
  throw InvalidConfig("unknown strategy '" + std::string(name) + "'");
}

PromptKind parse_prompt_kind(std::string_view name) {
  if (name == "open") return PromptKind::open_ended;
  if (name == "factual") return PromptKind::factual;
  throw InvalidConfig("unknown prompt kind '" + std::string(name) + "'");
}

std::size_t select_contrast_layer(const LayerLogitsStack& stack, const BucketConfig& cfg,
                                  const SelectionPolicy& policy, const ProbDist* mature) {
  if (cfg.active_bucket >= cfg.buckets.size()) throw InvalidConfig("select: active bucket index out of range");
  const LayerRange& bucket = cfg.active();
  if (bucket.empty()) throw InvalidConfig("select: active bucket is empty");
  if (bucket.hi > stack.layer_count()) throw InvalidConfig("select: bucket reaches the final layer");

  std::size_t best = bucket.lo;
  double best_score = 0.0;
  if (policy.strategy == SelectionStrategy::jsd_baseline) {
    const ProbDist final_dist = mature ? *mature : stack.layer_dist(stack.layer_count());
    for (std::size_t i = bucket.lo; i < bucket.hi; ++i) {
      const double d = jsd(final_dist, stack.layer_dist(i));
      if (i == bucket.lo || d > best_score) {
        best = i;
        best_score = d;
      }
    }
    return best;
  }
  const bool want_min = policy.strategy == SelectionStrategy::min_entropy;
  for (std::size_t i = bucket.lo; i < bucket.hi; ++i) {
    const double h = stack.layer_dist(i).entropy();
    if (i == bucket.lo || (want_min ? h < best_score : h > best_score)) {
      best = i;
      best_score = h;
    }
  }
  return best;
}

LayerDiagnostics layer_diagnostics(const LayerLogitsStack& stack) {
  if (stack.layer_count() < 1) throw InvalidInput("layer_diagnostics: need at least one layer above the embedding");
  const std::size_t rows = stack.row_count();
  std::vector<ProbDist> dists;
  dists.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) dists.push_back(stack.layer_dist(i));

  LayerDiagnostics out;
  out.entropy.resize(rows);
  out.entropy_change_rate.resize(rows);
  out.jsd_with_last.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    out.entropy[i] = dists[i].entropy();
    out.jsd_with_last[i] = jsd(dists[i], dists.back());
    if (i > 0 && out.entropy[i - 1] != 0.0) {
      out.entropy_change_rate[i] = (out.entropy[i] - out.entropy[i - 1]) / out.entropy[i - 1];
    }
  }
  return out;
}

}  // namespace exdec
