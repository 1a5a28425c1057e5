// SPDX-License-Identifier: Apache-2.0
//
// Searches the trained tiny model for prompts where a head-bias distractor wins
// the raw final layer but the contrast pipeline recovers the source's most
// likely successor. Prints candidate fixtures as JSON lines.

#include <iostream>

#include "CLI11.hpp"
#include "exdec/config.hpp"
#include "exdec/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace exdec;
  CLI::App app{"distractor case search"};
  std::size_t train_steps = 300;
  std::size_t prompts = 200;
  std::size_t prompt_len = 6;
  std::size_t limit = 20;
  std::vector<double> biases{1.0, 1.5, 2.0, 2.5, 3.0};
  app.add_option("--train-steps", train_steps);
  app.add_option("--prompts", prompts);
  app.add_option("--prompt-len", prompt_len);
  app.add_option("--limit", limit);
  app.add_option("--bias", biases);
  CLI11_PARSE(app, argc, argv);

  RunConfig cfg = default_run_config(8);
  cfg.model.train.steps = train_steps;
  const auto model = build_tiny_model(cfg.model);
  const BigramCorpus corpus(cfg.model.tiny.vocab_size, cfg.model.corpus_seed);
  RunConfig no_extrap = cfg;
  no_extrap.extrapolation.enabled = false;

  Xoshiro256 rng(2024);
  std::size_t found = 0;
  for (std::size_t p = 0; p < prompts && found < limit; ++p) {
    const std::vector<TokenId> prompt = corpus.sample(rng, prompt_len);
    const TokenId truth = corpus.most_likely_next(prompt.back());
    const LayerLogitsStack clean = model->early_exit(prompt);
    for (double bias : biases) {
      for (TokenId d = 0; d < clean.vocab_size() && found < limit; ++d) {
        if (d == truth) continue;
        std::vector<float> data(clean.data().begin(), clean.data().end());
        for (std::size_t j = 0; j < clean.row_count(); ++j) {
          data[j * clean.vocab_size() + d] = static_cast<float>(data[j * clean.vocab_size() + d] + bias);
        }
        const LayerLogitsStack stack(clean.layer_count(), clean.vocab_size(), std::move(data));
        if (argmax_token(log_softmax(stack.final_row())) != d) continue;
        const ContrastResult r = decode_step(stack, cfg);
        if (!r.extrapolation_triggered || argmax_token(r.scores) != truth) continue;
        const TokenId plain_contrast = argmax_token(decode_step(stack, no_extrap).scores);
        ++found;
        nlohmann::json j{{"prompt", prompt},   {"distractor", d},         {"bias", bias},
                         {"truth", truth},     {"layer", r.contrast_layer}, {"contrast_only", plain_contrast}};
        std::cout << j.dump() << "\n";
      }
    }
  }
  std::cerr << found << " candidate(s)\n";
  return found ? 0 : 1;
}
