// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "exdec/errors.hpp"
#include "exdec/layer_stack.hpp"
#include "exdec/rng.hpp"
#include "exdec/session.hpp"
#include "exdec/tiny_model.hpp"

using namespace exdec;

namespace {

TinyModelConfig small_config() {
  TinyModelConfig c;
  c.layers = 2;
  c.model_dim = 8;
  c.heads = 2;
  c.vocab_size = 11;
  c.max_seq = 8;
  return c;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("LayerLogitsStack shape and validation") {
    const LayerLogitsStack s(2, 3, {0, 1, 2, 3, 4, 5, 6, 7, 8}, 5);
    CHECK(s.layer_count() == 2);
    CHECK(s.row_count() == 3);
    CHECK(s.vocab_size() == 3);
    CHECK(s.step() == 5);
    CHECK(s.row(1)[0] == 3.0f);
    CHECK(s.final_row()[2] == 8.0f);
    CHECK_THROWS_AS(s.row(3), InvalidInput);
    CHECK_THROWS_AS(LayerLogitsStack(2, 3, {0, 1, 2}), InvalidInput);
    CHECK_THROWS_AS(LayerLogitsStack(1, 2, {0, 1, 2, NAN}), InvalidInput);
  }

  TEST_CASE("xoshiro256 is deterministic and in range") {
    Xoshiro256 a(9), b(9), c(10);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
      const std::uint64_t x = a.next();
      CHECK(x == b.next());
      differs = differs || x != c.next();
    }
    CHECK(differs);
    for (int i = 0; i < 1000; ++i) {
      const double u = a.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      CHECK(a.below(7) < 7);
      CHECK(std::abs(a.symmetric(0.5)) <= 0.5);
    }
  }

  TEST_CASE("tiny model stack has N+1 rows of width V") {
    TinyModelConfig cfg;
    cfg.seed = 42;
    const TinyTransformer m(cfg);
    const std::vector<TokenId> ctx{1, 2, 3};
    const LayerLogitsStack s = m.early_exit(ctx);
    CHECK(s.row_count() == cfg.layers + 1);
    CHECK(s.vocab_size() == cfg.vocab_size);
    CHECK(s.data().size() == (cfg.layers + 1) * cfg.vocab_size);
  }

  TEST_CASE("fresh sessions on the same seed give bit-identical stacks") {
    TinyModelConfig cfg;
    TinyModelProvider a(std::make_shared<TinyTransformer>(cfg));
    TinyModelProvider b(std::make_shared<TinyTransformer>(cfg));
    auto sa = a.open({1, 2, 3});
    auto sb = b.open({1, 2, 3});
    CHECK(sa->next_layer_logits(std::nullopt) == sb->next_layer_logits(std::nullopt));
    CHECK(sa->next_layer_logits(TokenId{9}) == sb->next_layer_logits(TokenId{9}));
    CHECK(sa->steps_taken() == 2);
    CHECK(std::vector<TokenId>(sa->context().begin(), sa->context().end()) == std::vector<TokenId>{1, 2, 3, 9});
  }

  TEST_CASE("different seeds give different weights") {
    TinyModelConfig a;
    TinyModelConfig b;
    b.seed = 43;
    const std::vector<TokenId> ctx{4, 5};
    CHECK_FALSE(TinyTransformer(a).early_exit(ctx) == TinyTransformer(b).early_exit(ctx));
  }

  TEST_CASE("final early-exit row is the ordinary next-token logits") {
    TinyTransformer m(small_config());
    m.set_head_bias(4, 1.25);
    const std::vector<TokenId> ctx{3, 1, 4, 1, 5};
    const LayerLogitsStack s = m.early_exit(ctx);
    const std::vector<float> logits = m.next_token_logits(ctx);
    CHECK(std::vector<float>(s.final_row().begin(), s.final_row().end()) == logits);
  }

  TEST_CASE("head bias shifts the biased column of every layer") {
    TinyTransformer m(small_config());
    const std::vector<TokenId> ctx{2, 7};
    const LayerLogitsStack before = m.early_exit(ctx);
    m.set_head_bias(6, 2.0);
    const LayerLogitsStack after = m.early_exit(ctx);
    for (std::size_t j = 0; j < before.row_count(); ++j) {
      for (std::size_t i = 0; i < before.vocab_size(); ++i) {
        const double delta = after.row(j)[i] - before.row(j)[i];
        CHECK(delta == doctest::Approx(i == 6 ? 2.0 : 0.0).epsilon(1e-5));
      }
    }
    CHECK_THROWS_AS(m.set_head_bias(11, 1.0), InvalidInput);
  }

  TEST_CASE("early-exit normalization only affects intermediate rows") {
    TinyModelConfig with = small_config();
    TinyModelConfig without = small_config();
    without.early_exit_norm = false;
    const std::vector<TokenId> ctx{1, 2};
    const LayerLogitsStack a = TinyTransformer(with).early_exit(ctx);
    const LayerLogitsStack b = TinyTransformer(without).early_exit(ctx);
    CHECK(std::vector<float>(a.final_row().begin(), a.final_row().end()) ==
          std::vector<float>(b.final_row().begin(), b.final_row().end()));
    CHECK(std::vector<float>(a.row(0).begin(), a.row(0).end()) !=
          std::vector<float>(b.row(0).begin(), b.row(0).end()));
  }

  TEST_CASE("context validation") {
    const TinyTransformer m(small_config());
    CHECK_THROWS_AS(m.early_exit(std::vector<TokenId>{}), InvalidInput);
    CHECK_THROWS_AS(m.early_exit(std::vector<TokenId>{11}), InvalidInput);
    CHECK_THROWS_AS(m.early_exit(std::vector<TokenId>(9, 1)), InvalidInput);
    TinyModelProvider p(std::make_shared<TinyTransformer>(small_config()));
    CHECK_THROWS_AS(p.open({1, 12}), InvalidInput);
    auto s = p.open({1});
    CHECK_THROWS_AS(s->next_layer_logits(TokenId{11}), InvalidInput);
  }

  TEST_CASE("config validation") {
    TinyModelConfig c = small_config();
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    c = small_config();
    c.layers = 0;
    CHECK_THROWS_AS(TinyTransformer{c}, InvalidConfig);
  }

  TEST_CASE("analytic gradient matches central finite differences") {
    TinyTransformer m(small_config());
    m.set_head_bias(3, 0.7);
    const std::vector<std::vector<TokenId>> seqs{{1, 2, 3, 4, 5}, {7, 3, 9}};
    std::vector<double> grad;
    m.loss_and_gradient(seqs, grad);
    REQUIRE(grad.size() == m.params().size());
    double worst = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      auto p = m.mutable_params();
      const double orig = p[i];
      const double h = 1e-6;
      p[i] = orig + h;
      const double up = m.loss(seqs);
      p[i] = orig - h;
      const double down = m.loss(seqs);
      p[i] = orig;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1e-6, std::abs(fd) + std::abs(grad[i])));
    }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("training lowers the loss deterministically") {
    TinyModelConfig c = small_config();
    c.model_dim = 16;
    const BigramCorpus corpus(c.vocab_size, 5);
    TrainConfig tc;
    tc.steps = 60;
    tc.seq_len = 8;
    tc.learning_rate = 1e-2;
    TinyTransformer a(c), b(c);
    const auto ha = a.train(corpus, tc);
    const auto hb = b.train(corpus, tc);
    CHECK(ha == hb);
    REQUIRE(ha.size() == 60);
    CHECK(ha.back() < ha.front());
  }

  TEST_CASE("bigram corpus") {
    const BigramCorpus corpus(16, 3);
    double total = 0;
    for (double w : corpus.weights()) total += w;
    CHECK(total == doctest::Approx(1.0));
    for (TokenId t = 0; t < 16; ++t) {
      const auto succ = corpus.successors(t);
      CHECK(std::set<TokenId>(succ.begin(), succ.end()).size() == succ.size());
      CHECK(corpus.most_likely_next(t) == succ.front());
      CHECK(corpus.transition(t, succ.front()) == doctest::Approx(0.6));
    }
    Xoshiro256 rng(1);
    const auto seq = corpus.sample(rng, 50);
    REQUIRE(seq.size() == 50);
    for (std::size_t i = 1; i < seq.size(); ++i) CHECK(corpus.transition(seq[i - 1], seq[i]) > 0.0);
  }
}
