// SPDX-License-Identifier: Apache-2.0

#include "exdec/dataset.hpp"

#include <fstream>
#include <functional>
#include <string>

#include "exdec/errors.hpp"

namespace exdec {

using nlohmann::json;

std::vector<TokenId> byte_tokenize(std::string_view text, std::size_t vocab_size) {
  if (vocab_size == 0) throw InvalidInput("byte_tokenize: empty vocabulary");
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<TokenId>(c % vocab_size));
  return out;
}

std::vector<TokenId> parse_tokens(const json& j, std::size_t vocab_size) {
  if (j.is_string()) return byte_tokenize(j.get<std::string>(), vocab_size);
  if (!j.is_array()) throw DataError("expected a string or an array of token ids");
  std::vector<TokenId> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::uint64_t>() >= vocab_size) {
      throw DataError("token id must be an integer below " + std::to_string(vocab_size));
    }
    out.push_back(static_cast<TokenId>(v.get<std::uint64_t>()));
  }
  return out;
}

namespace {

const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw DataError("record must be a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
std::vector<T> load_lines(const std::filesystem::path& path, const std::function<T(const json&)>& parse) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

McItem parse_mc_item(const json& j, std::size_t vocab_size) {
  McItem item;
  item.prompt = parse_tokens(field(j, "prompt"), vocab_size);
  const json& options = field(j, "options");
  const json& labels = field(j, "labels");
  if (!options.is_array() || !labels.is_array()) throw DataError("options and labels must be arrays");
  for (const auto& o : options) item.options.push_back(parse_tokens(o, vocab_size));
  for (const auto& l : labels) {
    if (!l.is_boolean()) throw DataError("labels must be booleans");
    item.labels.push_back(l.get<bool>());
  }
  item.validate();
  return item;
}

std::vector<TokenId> parse_generation_prompt(const json& j, std::size_t vocab_size) {
  auto prompt = parse_tokens(field(j, "prompt"), vocab_size);
  if (prompt.empty()) throw DataError("empty prompt");
  return prompt;
}

AnalysisItem parse_analysis_item(const json& j, std::size_t vocab_size) {
  AnalysisItem item;
  if (j.is_object() && j.contains("tokens")) {
    item.tokens = parse_tokens(j.at("tokens"), vocab_size);
    const json& range = field(j, "answer_range");
    if (!range.is_array() || range.size() != 2 || !range[0].is_number_unsigned() || !range[1].is_number_unsigned()) {
      throw DataError("answer_range must be [begin, end]");
    }
    item.answer_begin = range[0].get<std::size_t>();
    item.answer_end = range[1].get<std::size_t>();
    return item;
  }
  item.tokens = parse_tokens(field(j, "question"), vocab_size);
  const auto answer = parse_tokens(field(j, "answer"), vocab_size);
  item.answer_begin = item.tokens.size();
  item.tokens.insert(item.tokens.end(), answer.begin(), answer.end());
  item.answer_end = item.tokens.size();
  return item;
}

std::vector<McItem> load_mc_items(const std::filesystem::path& path, std::size_t vocab_size) {
  return load_lines<McItem>(path, [&](const json& j) { return parse_mc_item(j, vocab_size); });
}

std::vector<std::vector<TokenId>> load_generation_prompts(const std::filesystem::path& path, std::size_t vocab_size) {
  return load_lines<std::vector<TokenId>>(path, [&](const json& j) { return parse_generation_prompt(j, vocab_size); });
}

std::vector<AnalysisItem> load_analysis_items(const std::filesystem::path& path, std::size_t vocab_size) {
  return load_lines<AnalysisItem>(path, [&](const json& j) { return parse_analysis_item(j, vocab_size); });
}

}  // namespace exdec
