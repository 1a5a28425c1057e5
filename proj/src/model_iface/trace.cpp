// SPDX-License-Identifier: Apache-2.0

#include "exdec/trace.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <iterator>
#include <string>

#include "exdec/errors.hpp"
#include "exdec/session.hpp"

namespace exdec {

namespace {

constexpr char kMagic[4] = {'E', 'X', 'D', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>(static_cast<std::uint8_t>(v >> (8 * i)));
  out.write(buf, 4);
}

void put_stack(std::vector<std::uint8_t>& out, const LayerLogitsStack& stack) {
  for (float z : stack.data()) put_u32(out, std::bit_cast<std::uint32_t>(z));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t& at) {
  if (bytes.size() - at < 4) throw TraceError("trace truncated at byte " + std::to_string(at));
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
  at += 4;
  return v;
}

void check_shape(const LayerLogitsStack& stack, std::uint32_t layers, std::uint32_t vocab) {
  if (stack.layer_count() != layers || stack.vocab_size() != vocab) {
    throw InvalidInput("trace: stack shape (" + std::to_string(stack.layer_count()) + ", " +
                       std::to_string(stack.vocab_size()) + ") does not match header (" + std::to_string(layers) +
                       ", " + std::to_string(vocab) + ")");
  }
}

}  // namespace

std::vector<std::uint8_t> encode_trace(const Trace& trace) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kTraceVersion);
  put_u32(out, trace.layer_count);
  put_u32(out, trace.vocab_size);
  put_u32(out, static_cast<std::uint32_t>(trace.steps.size()));
  for (const auto& step : trace.steps) {
    check_shape(step.stack, trace.layer_count, trace.vocab_size);
    put_u32(out, step.chosen_token);
    put_stack(out, step.stack);
  }
  return out;
}

Trace decode_trace(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kTraceHeaderBytes || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin(),
                                                      [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
    throw TraceError("not a trace file (bad magic)");
  }
  std::size_t at = 4;
  const std::uint32_t version = get_u32(bytes, at);
  if (version != kTraceVersion) throw TraceError("unsupported trace version " + std::to_string(version));
  Trace trace;
  trace.layer_count = get_u32(bytes, at);
  trace.vocab_size = get_u32(bytes, at);
  const std::uint32_t steps = get_u32(bytes, at);
  if (trace.vocab_size == 0) throw TraceError("trace header has zero vocabulary");
  const std::size_t per_step = 4 + 4 * (static_cast<std::size_t>(trace.layer_count) + 1) * trace.vocab_size;
  if ((bytes.size() - at) / per_step < steps || (bytes.size() - at) != per_step * steps) {
    throw TraceError("trace payload is " + std::to_string(bytes.size() - at) + " bytes, header promises " +
                     std::to_string(steps) + " steps of " + std::to_string(per_step));
  }
  trace.steps.reserve(steps);
  const std::size_t floats = (static_cast<std::size_t>(trace.layer_count) + 1) * trace.vocab_size;
  for (std::uint32_t s = 0; s < steps; ++s) {
    TraceStep step;
    step.chosen_token = get_u32(bytes, at);
    if (step.chosen_token >= trace.vocab_size) throw TraceError("trace step " + std::to_string(s) + ": bad token");
    std::vector<float> logits(floats);
    for (float& z : logits) z = std::bit_cast<float>(get_u32(bytes, at));
    try {
      step.stack = LayerLogitsStack(trace.layer_count, trace.vocab_size, std::move(logits), s);
    } catch (const InvalidInput& e) {
      throw TraceError("trace step " + std::to_string(s) + ": " + e.what());
    }
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

Trace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open trace " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_trace(bytes);
}

TraceWriter::TraceWriter(const std::filesystem::path& path, std::uint32_t layer_count, std::uint32_t vocab_size)
    : out_(path, std::ios::binary | std::ios::trunc), layer_count_(layer_count), vocab_size_(vocab_size) {
  if (!out_) throw TraceError("cannot create trace " + path.string());
  out_.write(kMagic, 4);
  put_u32(out_, kTraceVersion);
  put_u32(out_, layer_count_);
  put_u32(out_, vocab_size_);
  put_u32(out_, 0);
  if (!out_) throw TraceError("trace header write failed");
}

TraceWriter::~TraceWriter() {
  try {
    finish();
  } catch (...) {
  }
}

void TraceWriter::append(const LayerLogitsStack& stack, TokenId chosen_token) {
  if (finished_) throw TraceError("trace writer already finished");
  check_shape(stack, layer_count_, vocab_size_);
  if (chosen_token >= vocab_size_) throw InvalidInput("trace: chosen token outside vocabulary");
  std::vector<std::uint8_t> buf;
  buf.reserve(4 + 4 * stack.data().size());
  put_u32(buf, chosen_token);
  put_stack(buf, stack);
  out_.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out_) throw TraceError("trace write failed at step " + std::to_string(steps_));
  ++steps_;
}

void TraceWriter::finish() {
  if (finished_) return;
  finished_ = true;
  out_.seekp(16);
  put_u32(out_, steps_);
  out_.flush();
  if (!out_) throw TraceError("trace finalize failed");
  out_.close();
}

TokenId greedy_final_layer(const LayerLogitsStack& stack) {
  auto row = stack.final_row();
  return static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
}

void record_trace(ModelSession& session, std::size_t steps, TraceWriter& sink, const TokenChooser& choose) {
  if (session.kind() != ProviderKind::tiny_model) throw InvalidInput("record_trace: session is not a tiny-model session");
  std::optional<TokenId> feed;
  for (std::size_t s = 0; s < steps; ++s) {
    LayerLogitsStack stack = session.next_layer_logits(feed);
    const TokenId token = choose(stack);
    sink.append(stack, token);
    feed = token;
  }
}

}  // namespace exdec
