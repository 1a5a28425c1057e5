// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "exdec/config.hpp"
#include "exdec/mc.hpp"

namespace exdec {

/// A trigger threshold, or "always" (fire on every step).
struct AlphaSetting {
  double alpha = 0.3;
  bool always = false;

  std::string label() const;
  /// "always" or a non-negative number. Throws InvalidConfig.
  static AlphaSetting parse(std::string_view text);
};

/// Cartesian grid; an empty dimension yields no cells.
struct SweepGrid {
  std::vector<std::size_t> buckets;
  std::vector<SelectionStrategy> strategies;
  std::vector<AlphaSetting> alphas;
  std::vector<std::size_t> e_infers;

  /// One value per dimension, taken from `cfg`.
  static SweepGrid single(const RunConfig& cfg);
};

/// Either multiple-choice items or generation prompts.
struct SweepWorkload {
  std::vector<McItem> mc_items;
  std::vector<std::vector<TokenId>> prompts;
};

struct SweepRow {
  std::size_t bucket = 0;
  SelectionStrategy strategy = SelectionStrategy::min_entropy;
  AlphaSetting alpha;
  std::size_t e_infer = 0;
  McMetrics metrics;
  bool has_metrics = false;
  DecodeStats stats;
};

struct SweepTable {
  std::vector<SweepRow> rows;

  /// bucket,strategy,alpha,e_infer,mc1,mc2,mc3,accuracy,trigger_fraction,steps,
  /// ms_per_token,overhead_ratio
  std::string to_csv() const;
};

/// The config a grid cell runs with.
RunConfig apply_cell(RunConfig base, std::size_t bucket, SelectionStrategy strategy, const AlphaSetting& alpha,
                     std::size_t e_infer);

using ProviderFactory = std::function<std::unique_ptr<LogitsProvider>()>;

/**
 * Runs every cell in bucket, strategy, alpha, e_infer nesting order, each on
 * a fresh provider from `factory`, always measuring overhead against plain
 * greedy decoding.
 */
SweepTable sweep(const ProviderFactory& factory, const RunConfig& base, const SweepGrid& grid,
                 const SweepWorkload& workload);

}  // namespace exdec
