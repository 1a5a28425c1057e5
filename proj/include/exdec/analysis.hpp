// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exdec/session.hpp"
#include "exdec/trace.hpp"

namespace exdec {

/// A question/answer token sequence; positions [answer_begin, answer_end) are
/// the answer tokens whose predictions get diagnosed.
struct AnalysisItem {
  std::vector<TokenId> tokens;
  std::size_t answer_begin = 0;
  std::size_t answer_end = 0;
};

struct LayerAnalysisRow {
  std::size_t layer = 0;
  double mean_entropy = 0.0;
  /// none at layer 0, or when no position had a defined rate.
  std::optional<double> mean_entropy_change_rate;
  double mean_jsd_with_last = 0.0;
};

struct LayerAnalysisReport {
  std::vector<LayerAnalysisRow> rows;
  std::size_t positions = 0;
  std::size_t items_used = 0;
  std::size_t items_skipped = 0;

  /// layer,mean_entropy,mean_entropy_change_rate,mean_jsd_with_last; blank for none.
  std::string to_csv() const;
};

/**
 * Mean per-layer diagnostics over every answer-token position. Items whose
 * answer range is empty, starts at 0 or runs past the sequence are skipped
 * and counted. Change-rate means are taken over positions where the rate is
 * defined.
 */
LayerAnalysisReport layer_analysis_run(LogitsProvider& provider, std::span<const AnalysisItem> items,
                                       TraceWriter* recorder = nullptr);

}  // namespace exdec
