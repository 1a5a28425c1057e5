// SPDX-License-Identifier: Apache-2.0

#include "exdec/mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "exdec/errors.hpp"

namespace exdec {

void McItem::validate() const {
  if (prompt.empty()) throw DataError("mc item: empty prompt");
  if (options.size() < 2) throw DataError("mc item: need at least two options");
  if (labels.size() != options.size()) throw DataError("mc item: one label per option required");
  if (std::none_of(labels.begin(), labels.end(), [](bool b) { return b; })) {
    throw DataError("mc item: no true option");
  }
}

std::vector<double> score_mc_item(LogitsProvider& provider, const RunConfig& cfg, const McItem& item,
                                  DecodeStats& stats, TraceWriter* recorder) {
  if (cfg.mode == DecodeMode::contrast && cfg.contrast.neg_inf != NegInfMode::minus_1000) {
    throw InvalidConfig("multiple-choice scoring needs the minus1000 sentinel");
  }
  std::vector<double> scores;
  scores.reserve(item.options.size());
  for (const auto& option : item.options) {
    if (option.empty()) throw InvalidInput("mc item: empty option");
    auto session = provider.open(item.prompt);
    std::optional<TokenId> feed;
    std::optional<std::size_t> frozen;
    std::vector<TokenId> history;
    double total = 0.0;
    for (TokenId token : option) {
      StepOutcome so = run_step(*session, feed, cfg, history, frozen, stats);
      if (cfg.freeze_layer_per_prompt && !frozen) frozen = so.result.contrast_layer;
      if (token >= so.result.scores.size()) throw InvalidInput("mc item: option token outside vocabulary");
      total += so.result.scores[token];
      if (recorder) recorder->append(so.stack, token);
      history.push_back(token);
      feed = token;
    }
    scores.push_back(cfg.length_normalize ? total / static_cast<double>(option.size()) : total);
  }
  return scores;
}

McMetrics compute_mc_metrics(std::span<const ScoredMcItem> items) {
  McMetrics m;
  if (items.empty()) return m;
  for (const auto& item : items) {
    const auto& s = item.scores;
    const std::size_t best = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    if (item.labels[best]) m.mc1 += 1.0;

    double max_score = -std::numeric_limits<double>::infinity();
    double best_false = -std::numeric_limits<double>::infinity();
    double best_true = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i) {
      max_score = std::max(max_score, s[i]);
      if (item.labels[i]) {
        best_true = std::max(best_true, s[i]);
      } else {
        best_false = std::max(best_false, s[i]);
      }
    }
    double mass_true = 0.0;
    double mass_all = 0.0;
    std::size_t n_true = 0;
    std::size_t beats = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double w = std::exp(s[i] - max_score);
      mass_all += w;
      if (item.labels[i]) {
        mass_true += w;
        ++n_true;
        if (s[i] > best_false) ++beats;
      }
    }
    m.mc2 += mass_true / mass_all;
    m.mc3 += n_true ? static_cast<double>(beats) / static_cast<double>(n_true) : 0.0;
    if (best_true > best_false) m.accuracy += 1.0;
  }
  const double n = static_cast<double>(items.size());
  m.mc1 /= n;
  m.mc2 /= n;
  m.mc3 /= n;
  m.accuracy /= n;
  return m;
}

EvalReport run_mc_eval(LogitsProvider& provider, const RunConfig& cfg, std::span<const McItem> items,
                       TraceWriter* recorder) {
  cfg.validate(provider.layer_count());
  EvalReport report;
  report.items.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    items[i].validate();
    try {
      report.items.push_back({score_mc_item(provider, cfg, items[i], report.stats, recorder), items[i].labels});
    } catch (const EndOfTrace& e) {
      throw EndOfTrace("item " + std::to_string(i) + ": " + e.what());
    } catch (const TraceError& e) {
      throw TraceError("item " + std::to_string(i) + ": " + e.what());
    } catch (const InvalidInput& e) {
      throw InvalidInput("item " + std::to_string(i) + ": " + e.what());
    }
  }
  report.metrics = compute_mc_metrics(report.items);
  return report;
}

nlohmann::json to_json(const EvalReport& report, bool with_timing) {
  using nlohmann::json;
  json items = json::array();
  for (const auto& item : report.items) items.push_back({{"scores", item.scores}, {"labels", item.labels}});
  json histogram = json::object();
  for (const auto& [layer, n] : report.stats.layer_histogram) histogram[std::to_string(layer)] = n;
  json out{{"metrics",
            {{"mc1", report.metrics.mc1},
             {"mc2", report.metrics.mc2},
             {"mc3", report.metrics.mc3},
             {"accuracy", report.metrics.accuracy}}},
           {"steps", report.stats.steps},
           {"trigger_fraction", report.stats.trigger_fraction()},
           {"layer_histogram", histogram},
           {"items", items}};
  if (with_timing) {
    out["timing"] = {{"seconds_per_token", report.stats.seconds_per_token()},
                     {"provider_seconds", report.stats.provider_seconds},
                     {"decode_seconds", report.stats.decode_seconds},
                     {"passthrough_seconds", report.stats.passthrough_seconds},
                     {"overhead_ratio", report.stats.overhead_ratio()}};
  }
  return out;
}

}  // namespace exdec
