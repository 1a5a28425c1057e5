// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <vector>

#include "exdec/analysis.hpp"
#include "exdec/mc.hpp"
#include "json.hpp"

namespace exdec {

/// Demo text tokenizer: one token per byte, folded into the vocabulary.
std::vector<TokenId> byte_tokenize(std::string_view text, std::size_t vocab_size);

/// A string goes through byte_tokenize; an array must hold ids below vocab_size.
/// Throws DataError otherwise.
std::vector<TokenId> parse_tokens(const nlohmann::json& j, std::size_t vocab_size);

/// {"prompt": str|ids, "options": [str|ids, ...], "labels": [bool, ...]}
McItem parse_mc_item(const nlohmann::json& j, std::size_t vocab_size);
/// {"prompt": str|ids}
std::vector<TokenId> parse_generation_prompt(const nlohmann::json& j, std::size_t vocab_size);
/// {"question": str|ids, "answer": str|ids} or {"tokens": ids, "answer_range": [begin, end]}.
/// The range is not checked here; layer_analysis_run skips bad ones.
AnalysisItem parse_analysis_item(const nlohmann::json& j, std::size_t vocab_size);

/// JSON-lines readers; blank lines are ignored. Errors name the offending line
/// and are thrown as DataError.
std::vector<McItem> load_mc_items(const std::filesystem::path& path, std::size_t vocab_size);
std::vector<std::vector<TokenId>> load_generation_prompts(const std::filesystem::path& path, std::size_t vocab_size);
std::vector<AnalysisItem> load_analysis_items(const std::filesystem::path& path, std::size_t vocab_size);

}  // namespace exdec
