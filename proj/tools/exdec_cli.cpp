// SPDX-License-Identifier: Apache-2.0
//
// exdec: command line front end for the early-exit extrapolation decoder.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "exdec/analysis.hpp"
#include "exdec/config.hpp"
#include "exdec/dataset.hpp"
#include "exdec/errors.hpp"
#include "exdec/mc.hpp"
#include "exdec/pipeline.hpp"
#include "exdec/sweep.hpp"
#include "exdec/trace.hpp"

namespace {

using namespace exdec;
using nlohmann::json;

constexpr int kExitInvalidConfig = 2;
constexpr int kExitDataError = 3;

enum class Task { generate, mc_eval, layer_analysis };

Task parse_task(const std::string& name) {
  if (name == "generate") return Task::generate;
  if (name == "mc-eval") return Task::mc_eval;
  if (name == "layer-analysis") return Task::layer_analysis;
  throw InvalidConfig("unknown task '" + name + "'");
}

// Values of the RunConfig-mirroring flags; an option only takes effect if it
// appeared on the command line.
struct Flags {
  std::string config_path;
  std::string mode, strategy, prompt_kind, neg_inf;
  double alpha = 0, beta = 0, repetition_penalty = 0, distractor_bias = 0;
  std::size_t top_k = 0, e_start = 0, e_end = 0, e_infer = 0, bucket = 0, max_new_tokens = 0;
  std::uint64_t seed = 0;
  std::size_t train_steps = 0, layers = 0;
  TokenId distractor_token = 0, end_token = 0;
  std::string trace;
  bool force_trigger = false, no_extrapolation = false, dola_baseline = false, length_normalize = false;
  bool freeze_layer = false;

  // The subcommand that was parsed.
  const CLI::App* active = nullptr;

  bool given(const char* name) const { return active && active->count(name) > 0; }
};

// Per-subcommand inputs and outputs.
struct IoFlags {
  std::string data, prompt, prompt_ids, out, record, report, task = "generate", grid;
  std::vector<std::size_t> grid_buckets, grid_e_infer;
  std::vector<std::string> grid_strategies, grid_alphas;
  bool timing = false;
};

void add_run_flags(CLI::App& app, Flags& f) {
  app.add_option("--config", f.config_path, "JSON config file (flags override it)");
  app.add_option("--mode", f.mode, "contrast or vanilla");
  app.add_option("--alpha", f.alpha, "extrapolation trigger threshold");
  app.add_option("--top-k", f.top_k, "tokens considered for extrapolation");
  app.add_option("--e-start", f.e_start, "first fitting layer");
  app.add_option("--e-end", f.e_end, "last fitting layer");
  app.add_option("--e-infer", f.e_infer, "virtual layer the fit is read at");
  app.add_option("--bucket", f.bucket, "active bucket index");
  app.add_option("--strategy", f.strategy, "min-entropy, max-entropy or jsd");
  app.add_option("--prompt-kind", f.prompt_kind, "open or factual");
  app.add_option("--beta", f.beta, "plausibility threshold");
  app.add_option("--neg-inf", f.neg_inf, "inf or minus1000");
  app.add_option("--repetition-penalty", f.repetition_penalty, "penalty on previously emitted tokens");
  app.add_option("--seed", f.seed, "tiny model weight seed");
  app.add_option("--trace", f.trace, "replay logits from a recorded trace");
  app.add_option("--train-steps", f.train_steps, "training steps for the tiny model");
  app.add_option("--layers", f.layers, "tiny model depth");
  app.add_option("--distractor-token", f.distractor_token, "token given a head bias");
  app.add_option("--distractor-bias", f.distractor_bias, "head bias for the distractor");
  app.add_option("--max-new-tokens", f.max_new_tokens, "generation length");
  app.add_option("--end-token", f.end_token, "stop after emitting this token");
  app.add_flag("--force-trigger", f.force_trigger, "extrapolate on every step");
  app.add_flag("--no-extrapolation", f.no_extrapolation, "disable extrapolation");
  app.add_flag("--dola-baseline", f.dola_baseline, "JSD layer selection without extrapolation");
  app.add_flag("--length-normalize", f.length_normalize, "divide option scores by option length");
  app.add_flag("--freeze-layer", f.freeze_layer, "reuse the first step's contrast layer for the whole prompt");
}

void apply_model_flags(const Flags& f, ModelSettings& m) {
  if (f.given("--trace")) {
    m.provider = ProviderKind::trace_replay;
    m.trace_path = f.trace;
  }
  if (f.given("--seed")) m.tiny.seed = f.seed;
  if (f.given("--train-steps")) m.train.steps = f.train_steps;
  if (f.given("--layers")) m.tiny.layers = f.layers;
  if (f.given("--distractor-token")) m.distractor_token = f.distractor_token;
  if (f.given("--distractor-bias")) m.distractor_bias = f.distractor_bias;
}

void apply_run_flags(const Flags& f, RunConfig& cfg) {
  apply_model_flags(f, cfg.model);
  if (f.given("--mode")) {
    if (f.mode == "vanilla") {
      cfg.mode = DecodeMode::vanilla;
    } else if (f.mode == "contrast") {
      cfg.mode = DecodeMode::contrast;
    } else {
      throw InvalidConfig("unknown mode '" + f.mode + "'");
    }
  }
  auto& x = cfg.extrapolation;
  if (f.given("--alpha")) x.alpha = f.alpha;
  if (f.given("--top-k")) x.top_k = f.top_k;
  if (f.given("--e-start")) x.e_start = f.e_start;
  if (f.given("--e-end")) x.e_end = f.e_end;
  if (f.given("--e-infer")) x.e_infer = f.e_infer;
  if (f.force_trigger) x.force_trigger = true;
  if (f.no_extrapolation) x.enabled = false;
  if (f.given("--bucket")) cfg.buckets.active_bucket = f.bucket;
  if (f.given("--prompt-kind")) {
    cfg.policy.prompt_kind = parse_prompt_kind(f.prompt_kind);
    if (!f.given("--strategy") && cfg.policy.strategy != SelectionStrategy::jsd_baseline) {
      cfg.policy = SelectionPolicy::for_prompt_kind(cfg.policy.prompt_kind);
    }
  }
  if (f.given("--strategy")) {
    cfg.policy.strategy = parse_strategy(f.strategy);
    if (!f.given("--prompt-kind") && cfg.policy.strategy != SelectionStrategy::jsd_baseline) {
      cfg.policy.prompt_kind =
          cfg.policy.strategy == SelectionStrategy::min_entropy ? PromptKind::open_ended : PromptKind::factual;
    }
  }
  if (f.given("--beta")) cfg.contrast.beta = f.beta;
  if (f.given("--neg-inf")) cfg.contrast.neg_inf = parse_neg_inf(f.neg_inf);
  if (f.given("--repetition-penalty")) cfg.contrast.repetition_penalty = f.repetition_penalty;
  if (f.dola_baseline) cfg.contrast.dola_baseline = true;
  if (f.length_normalize) cfg.length_normalize = true;
  if (f.freeze_layer) cfg.freeze_layer_per_prompt = true;
  if (f.given("--max-new-tokens")) cfg.max_new_tokens = f.max_new_tokens;
  if (f.given("--end-token")) cfg.end_token = f.end_token;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidConfig("config " + path + ": " + e.what());
  }
}

// The layer count decides the scaled defaults, so the model settings are
// resolved first and the full config is laid over defaults for that depth.
// Multiple-choice scoring sums per-token scores, so it defaults to the finite
// sentinel; an explicit setting in the file or on the command line still wins.
RunConfig resolve_config(const Flags& f, bool scores_options) {
  const json file = f.config_path.empty() ? json::object() : load_json_file(f.config_path);
  RunConfig first = run_config_from_json(file, default_run_config());
  apply_model_flags(f, first.model);

  std::size_t layers = first.model.tiny.layers;
  if (first.model.provider == ProviderKind::trace_replay) {
    if (first.model.trace_path.empty()) throw InvalidConfig("trace provider needs a trace path");
    std::ifstream in(first.model.trace_path, std::ios::binary);
    char header[kTraceHeaderBytes];
    if (!in.read(header, sizeof header)) throw TraceError("cannot read trace header " + first.model.trace_path.string());
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(static_cast<unsigned char>(header[8 + i])) << (8 * i);
    layers = n;
  }
  RunConfig base = default_run_config(layers);
  base.model = first.model;
  if (scores_options) base.contrast.neg_inf = NegInfMode::minus_1000;
  RunConfig cfg = run_config_from_json(file, base);
  apply_run_flags(f, cfg);
  return cfg;
}

// Builds the tiny model once; each call of the factory gets a fresh provider.
ProviderFactory provider_factory(const ModelSettings& settings) {
  if (settings.provider == ProviderKind::trace_replay) {
    auto trace = std::make_shared<const Trace>(read_trace(settings.trace_path));
    return [trace] { return std::make_unique<TraceReplayProvider>(*trace); };
  }
  std::shared_ptr<const TinyTransformer> model = build_tiny_model(settings);
  return [model] { return std::make_unique<TinyModelProvider>(model); };
}

std::vector<TokenId> parse_id_list(const std::string& text, std::size_t vocab) {
  std::vector<TokenId> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(part, &pos);
    } catch (const std::exception&) {
      throw DataError("bad token id '" + part + "'");
    }
    if (pos != part.size() || v >= vocab) throw DataError("bad token id '" + part + "'");
    out.push_back(static_cast<TokenId>(v));
  }
  return out;
}

std::vector<std::vector<TokenId>> generation_prompts(const IoFlags& io, std::size_t vocab) {
  if (!io.prompt_ids.empty()) return {parse_id_list(io.prompt_ids, vocab)};
  if (!io.prompt.empty()) return {byte_tokenize(io.prompt, vocab)};
  if (!io.data.empty()) return load_generation_prompts(io.data, vocab);
  throw DataError("generate needs --prompt, --prompt-ids or --data");
}

std::string require_data(const IoFlags& io, const char* what) {
  if (io.data.empty()) throw DataError(std::string(what) + " needs --data");
  return io.data;
}

json generation_json(const std::vector<std::vector<TokenId>>& prompts, const std::vector<GenerationResult>& results,
                     const DecodeStats& total, bool timing) {
  json runs = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    json log = json::array();
    for (const auto& s : results[i].log) {
      log.push_back({{"step", s.step},
                     {"token", s.token},
                     {"score", s.score},
                     {"contrast_layer", s.contrast_layer},
                     {"extrapolated", s.extrapolation_triggered},
                     {"plausible_set_size", s.plausible_set_size}});
    }
    runs.push_back({{"prompt", prompts[i]}, {"tokens", results[i].tokens}, {"log", log}});
  }
  json histogram = json::object();
  for (const auto& [layer, n] : total.layer_histogram) histogram[std::to_string(layer)] = n;
  json out{{"steps", total.steps},
           {"trigger_fraction", total.trigger_fraction()},
           {"layer_histogram", histogram},
           {"runs", runs}};
  if (timing) {
    out["timing"] = {{"seconds_per_token", total.seconds_per_token()}, {"overhead_ratio", total.overhead_ratio()}};
  }
  return out;
}

// Runs one task and renders its report.
std::string run_task(Task task, LogitsProvider& provider, const RunConfig& cfg, const IoFlags& io,
                     TraceWriter* recorder) {
  const std::size_t vocab = provider.vocab_size();
  switch (task) {
    case Task::generate: {
      cfg.validate(provider.layer_count());
      const auto prompts = generation_prompts(io, vocab);
      std::vector<GenerationResult> results;
      DecodeStats total;
      for (const auto& p : prompts) {
        results.push_back(greedy_generate(provider, cfg, p, recorder));
        total.merge(results.back().stats);
      }
      return generation_json(prompts, results, total, io.timing).dump(2) + "\n";
    }
    case Task::mc_eval: {
      const auto items = load_mc_items(require_data(io, "mc-eval"), vocab);
      return to_json(run_mc_eval(provider, cfg, items, recorder), io.timing).dump(2) + "\n";
    }
    case Task::layer_analysis: {
      const auto items = load_analysis_items(require_data(io, "layer-analysis"), vocab);
      const auto report = layer_analysis_run(provider, items, recorder);
      if (report.items_skipped > 0) {
        std::cerr << "warning: skipped " << report.items_skipped << " item(s) with an invalid answer range\n";
      }
      return report.to_csv();
    }
  }
  return {};
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

SweepGrid resolve_grid(const RunConfig& cfg, const IoFlags& io) {
  SweepGrid grid = SweepGrid::single(cfg);
  if (!io.grid.empty()) {
    const json j = load_json_file(io.grid);
    try {
      if (j.contains("buckets")) grid.buckets = j.at("buckets").get<std::vector<std::size_t>>();
      if (j.contains("strategies")) {
        grid.strategies.clear();
        for (const auto& s : j.at("strategies")) grid.strategies.push_back(parse_strategy(s.get<std::string>()));
      }
      if (j.contains("alphas")) {
        grid.alphas.clear();
        for (const auto& a : j.at("alphas")) {
          grid.alphas.push_back(a.is_string() ? AlphaSetting::parse(a.get<std::string>())
                                              : AlphaSetting{a.get<double>(), false});
        }
      }
      if (j.contains("e_infer")) grid.e_infers = j.at("e_infer").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
      throw InvalidConfig("grid " + io.grid + ": " + e.what());
    }
  }
  if (!io.grid_buckets.empty()) grid.buckets = io.grid_buckets;
  if (!io.grid_strategies.empty()) {
    grid.strategies.clear();
    for (const auto& s : io.grid_strategies) grid.strategies.push_back(parse_strategy(s));
  }
  if (!io.grid_alphas.empty()) {
    grid.alphas.clear();
    for (const auto& a : io.grid_alphas) grid.alphas.push_back(AlphaSetting::parse(a));
  }
  if (!io.grid_e_infer.empty()) grid.e_infers = io.grid_e_infer;
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Early-exit contrastive decoding with logit extrapolation"};
  app.require_subcommand(1);
  Flags flags;
  IoFlags io;

  auto* generate = app.add_subcommand("generate", "greedy generation");
  auto* mc_eval = app.add_subcommand("mc-eval", "multiple-choice scoring with MC1/MC2/MC3");
  auto* analysis = app.add_subcommand("layer-analysis", "per-layer entropy and JSD over answer tokens");
  auto* record = app.add_subcommand("trace-record", "run a task on the live model and record its stacks");
  auto* replay = app.add_subcommand("trace-replay", "rerun a task from a recorded trace");
  auto* sweep_cmd = app.add_subcommand("sweep", "grid over bucket, strategy, alpha and e-infer");

  for (auto* sub : {generate, mc_eval, analysis, record, replay, sweep_cmd}) {
    add_run_flags(*sub, flags);
    sub->add_option("--data", io.data, "JSON-lines dataset");
    sub->add_flag("--timing", io.timing, "include wall-clock figures in JSON reports");
  }
  for (auto* sub : {generate, record, replay}) {
    sub->add_option("--prompt", io.prompt, "prompt text (byte tokenizer)");
    sub->add_option("--prompt-ids", io.prompt_ids, "comma-separated prompt token ids");
  }
  for (auto* sub : {generate, mc_eval, analysis, replay, sweep_cmd}) {
    sub->add_option("--out", io.out, "report path (default stdout)");
  }
  for (auto* sub : {generate, mc_eval, analysis}) {
    sub->add_option("--record", io.record, "also record the stacks to this trace file");
  }
  record->add_option("--out", io.record, "trace file to write")->required();
  record->add_option("--report", io.report, "report path (default stdout)");
  for (auto* sub : {record, replay}) {
    sub->add_option("--task", io.task, "generate, mc-eval or layer-analysis");
  }
  sweep_cmd->add_option("--grid", io.grid, "JSON grid file: buckets, strategies, alphas, e_infer");
  sweep_cmd->add_option("--grid-bucket", io.grid_buckets, "bucket indices");
  sweep_cmd->add_option("--grid-strategy", io.grid_strategies, "selection strategies");
  sweep_cmd->add_option("--grid-alpha", io.grid_alphas, "alpha values or 'always'");
  sweep_cmd->add_option("--grid-e-infer", io.grid_e_infer, "virtual layers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalidConfig;
  }

  for (auto* sub : app.get_subcommands()) flags.active = sub;

  try {
    Task task = Task::generate;
    if (mc_eval->parsed()) task = Task::mc_eval;
    if (analysis->parsed()) task = Task::layer_analysis;
    if (record->parsed() || replay->parsed()) task = parse_task(io.task);
    bool sweep_mc = false;
    if (sweep_cmd->parsed()) {
      std::ifstream probe(require_data(io, "sweep"));
      std::string first_line;
      while (std::getline(probe, first_line) && first_line.find_first_not_of(" \t\r") == std::string::npos) {
      }
      try {
        sweep_mc = !first_line.empty() && json::parse(first_line).contains("options");
      } catch (const json::exception& e) {
        throw DataError(io.data + ": " + e.what());
      }
    }

    RunConfig cfg = resolve_config(flags, task == Task::mc_eval || sweep_mc);
    if (replay->parsed() && cfg.model.provider != ProviderKind::trace_replay) {
      throw InvalidConfig("trace-replay needs --trace");
    }
    if (record->parsed() && cfg.model.provider != ProviderKind::tiny_model) {
      throw InvalidConfig("trace-record runs the live tiny model; drop --trace");
    }

    if (sweep_cmd->parsed()) {
      const ProviderFactory factory = provider_factory(cfg.model);
      SweepWorkload workload;
      const std::size_t vocab = factory()->vocab_size();
      if (sweep_mc) {
        workload.mc_items = load_mc_items(io.data, vocab);
      } else {
        workload.prompts = load_generation_prompts(io.data, vocab);
      }
      emit(sweep(factory, cfg, resolve_grid(cfg, io), workload).to_csv(), io.out);
      return 0;
    }

    auto provider = make_provider(cfg.model);
    std::optional<TraceWriter> writer;
    if (!io.record.empty()) {
      writer.emplace(io.record, static_cast<std::uint32_t>(provider->layer_count()),
                     static_cast<std::uint32_t>(provider->vocab_size()));
    }
    const std::string report = run_task(task, *provider, cfg, io, writer ? &*writer : nullptr);
    if (writer) writer->finish();
    emit(report, record->parsed() ? io.report : io.out);
    return 0;
  } catch (const InvalidConfig& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
}
