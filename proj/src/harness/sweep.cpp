// SPDX-License-Identifier: Apache-2.0

#include "exdec/sweep.hpp"

#include <charconv>
#include <cmath>

#include "exdec/errors.hpp"

namespace exdec {

namespace {

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string AlphaSetting::label() const { return always ? "always" : format_double(alpha); }

AlphaSetting AlphaSetting::parse(std::string_view text) {
  if (text == "always") return {0.0, true};
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v) || v < 0.0) {
    throw InvalidConfig("alpha must be 'always' or a non-negative number, got '" + std::string(text) + "'");
  }
  return {v, false};
}

SweepGrid SweepGrid::single(const RunConfig& cfg) {
  return {{cfg.buckets.active_bucket},
          {cfg.policy.strategy},
          {AlphaSetting{cfg.extrapolation.alpha, cfg.extrapolation.force_trigger}},
          {cfg.extrapolation.e_infer}};
}

RunConfig apply_cell(RunConfig base, std::size_t bucket, SelectionStrategy strategy, const AlphaSetting& alpha,
                     std::size_t e_infer) {
  base.buckets.active_bucket = bucket;
  switch (strategy) {
    case SelectionStrategy::min_entropy:
      base.policy = SelectionPolicy::for_prompt_kind(PromptKind::open_ended);
      break;
    case SelectionStrategy::max_entropy:
      base.policy = SelectionPolicy::for_prompt_kind(PromptKind::factual);
      break;
    case SelectionStrategy::jsd_baseline:
      base.policy = SelectionPolicy{SelectionStrategy::jsd_baseline, base.policy.prompt_kind};
      break;
  }
  base.extrapolation.force_trigger = alpha.always;
  if (!alpha.always) base.extrapolation.alpha = alpha.alpha;
  base.extrapolation.e_infer = e_infer;
  return base;
}

std::string SweepTable::to_csv() const {
  std::string out =
      "bucket,strategy,alpha,e_infer,mc1,mc2,mc3,accuracy,trigger_fraction,steps,ms_per_token,overhead_ratio\n";
  for (const auto& r : rows) {
    out += std::to_string(r.bucket) + ',' + std::string(to_string(r.strategy)) + ',' + r.alpha.label() + ',' +
           std::to_string(r.e_infer) + ',';
    if (r.has_metrics) {
      out += format_double(r.metrics.mc1) + ',' + format_double(r.metrics.mc2) + ',' + format_double(r.metrics.mc3) +
             ',' + format_double(r.metrics.accuracy) + ',';
    } else {
      out += ",,,,";
    }
    out += format_double(r.stats.trigger_fraction()) + ',' + std::to_string(r.stats.steps) + ',' +
           format_double(r.stats.seconds_per_token() * 1e3) + ',' + format_double(r.stats.overhead_ratio()) + '\n';
  }
  return out;
}

SweepTable sweep(const ProviderFactory& factory, const RunConfig& base, const SweepGrid& grid,
                 const SweepWorkload& workload) {
  SweepTable table;
  for (std::size_t bucket : grid.buckets) {
    for (SelectionStrategy strategy : grid.strategies) {
      for (const AlphaSetting& alpha : grid.alphas) {
        for (std::size_t e_infer : grid.e_infers) {
          RunConfig cfg = apply_cell(base, bucket, strategy, alpha, e_infer);
          cfg.measure_overhead = true;
          auto provider = factory();
          cfg.validate(provider->layer_count());

          SweepRow row{bucket, strategy, alpha, e_infer, {}, false, {}};
          if (!workload.mc_items.empty()) {
            EvalReport report = run_mc_eval(*provider, cfg, workload.mc_items);
            row.metrics = report.metrics;
            row.has_metrics = true;
            row.stats = report.stats;
          } else {
            for (const auto& prompt : workload.prompts) {
              row.stats.merge(greedy_generate(*provider, cfg, prompt).stats);
            }
          }
          table.rows.push_back(std::move(row));
        }
      }
    }
  }
  return table;
}

}  // namespace exdec
