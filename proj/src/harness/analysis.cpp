// SPDX-License-Identifier: Apache-2.0

#include "exdec/analysis.hpp"

#include <charconv>
#include <string>

#include "exdec/layer_select.hpp"

namespace exdec {

namespace {

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string LayerAnalysisReport::to_csv() const {
  std::string out = "layer,mean_entropy,mean_entropy_change_rate,mean_jsd_with_last\n";
  for (const auto& r : rows) {
    out += std::to_string(r.layer) + ',' + format_double(r.mean_entropy) + ',';
    if (r.mean_entropy_change_rate) out += format_double(*r.mean_entropy_change_rate);
    out += ',' + format_double(r.mean_jsd_with_last) + '\n';
  }
  return out;
}

LayerAnalysisReport layer_analysis_run(LogitsProvider& provider, std::span<const AnalysisItem> items,
                                       TraceWriter* recorder) {
  const std::size_t rows = provider.layer_count() + 1;
  std::vector<double> entropy_sum(rows, 0.0), rate_sum(rows, 0.0), jsd_sum(rows, 0.0);
  std::vector<std::size_t> rate_count(rows, 0);

  LayerAnalysisReport report;
  for (const auto& item : items) {
    if (item.answer_begin < 1 || item.answer_begin >= item.answer_end || item.answer_end > item.tokens.size()) {
      ++report.items_skipped;
      continue;
    }
    ++report.items_used;
    auto session = provider.open({item.tokens.begin(), item.tokens.begin() + static_cast<std::ptrdiff_t>(item.answer_begin)});
    std::optional<TokenId> feed;
    for (std::size_t pos = item.answer_begin; pos < item.answer_end; ++pos) {
      const LayerLogitsStack stack = session->next_layer_logits(feed);
      if (recorder) recorder->append(stack, item.tokens[pos]);
      const LayerDiagnostics diag = layer_diagnostics(stack);
      for (std::size_t l = 0; l < rows; ++l) {
        entropy_sum[l] += diag.entropy[l];
        jsd_sum[l] += diag.jsd_with_last[l];
        if (diag.entropy_change_rate[l]) {
          rate_sum[l] += *diag.entropy_change_rate[l];
          ++rate_count[l];
        }
      }
      ++report.positions;
      feed = item.tokens[pos];
    }
  }

  const double n = static_cast<double>(report.positions);
  report.rows.resize(rows);
  for (std::size_t l = 0; l < rows; ++l) {
    auto& r = report.rows[l];
    r.layer = l;
    if (report.positions == 0) continue;
    r.mean_entropy = entropy_sum[l] / n;
    r.mean_jsd_with_last = jsd_sum[l] / n;
    if (rate_count[l] > 0) r.mean_entropy_change_rate = rate_sum[l] / static_cast<double>(rate_count[l]);
  }
  return report;
}

}  // namespace exdec
