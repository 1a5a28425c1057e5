// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "exdec/contrast.hpp"
#include "exdec/errors.hpp"
#include "exdec/numkit.hpp"
#include "support/generators.hpp"

using namespace exdec;

namespace {

ProbDist dist(std::vector<double> p) { return ProbDist::from_probs(std::move(p)); }

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

TEST_SUITE("contrast") {
  TEST_CASE("plausible set thresholds") {
    const ProbDist p = dist({0.6, 0.3, 0.05, 0.05});
    CHECK(plausible_set(p, 0.1) == std::vector<TokenId>{0, 1});
    CHECK(plausible_set(p, 0.0) == std::vector<TokenId>{0, 1, 2, 3});
    CHECK(plausible_set(p, 1.0) == std::vector<TokenId>{0});
    // Zero-probability tokens never qualify, even at beta 0.
    CHECK(plausible_set(dist({0.5, 0.0, 0.5}), 0.0) == std::vector<TokenId>{0, 2});
    // A token exactly at the threshold is kept.
    CHECK(plausible_set(dist({0.5, 0.25, 0.25}), 0.5) == std::vector<TokenId>{0, 1, 2});
  }

  TEST_CASE("contrast scores worked example") {
    const ProbDist mature = dist({0.7, 0.2, 0.1});
    const ProbDist early = dist({0.1, 0.7, 0.2});
    ContrastConfig cfg;
    cfg.beta = 0.0;
    const ContrastResult r = contrast_scores(mature, early, cfg);
    CHECK(r.scores[0] == doctest::Approx(std::log(7.0)).epsilon(1e-14));
    CHECK(r.scores[1] == doctest::Approx(std::log(2.0 / 7.0)).epsilon(1e-14));
    CHECK(r.scores[2] == doctest::Approx(std::log(0.5)).epsilon(1e-14));
    CHECK(r.plausible_set_size == 3);
  }

  TEST_CASE("contrasting a distribution with itself scores zero") {
    testgen::Rng rng(41);
    ContrastConfig cfg;
    cfg.beta = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const ProbDist p = dist(testgen::distribution(rng, testgen::pick(rng, 2, 30), false));
      for (double s : contrast_scores(p, p, cfg).scores) CHECK(s == 0.0);
    }
  }

  TEST_CASE("masked tokens get the configured sentinel") {
    const ProbDist mature = dist({0.6, 0.3, 0.05, 0.05});
    const ProbDist early = dist({0.25, 0.25, 0.25, 0.25});
    ContrastConfig cfg;
    const ContrastResult inf = contrast_scores(mature, early, cfg);
    CHECK(inf.plausible_set_size == 2);
    CHECK(inf.scores[2] == kNegInf);
    CHECK(inf.scores[3] == kNegInf);
    CHECK(std::isfinite(inf.scores[0]));
    cfg.neg_inf = NegInfMode::minus_1000;
    const ContrastResult fin = contrast_scores(mature, early, cfg);
    CHECK(fin.scores[2] == -1000.0);
    CHECK(fin.scores[0] == inf.scores[0]);
    CHECK(sentinel_score(NegInfMode::minus_1000) == -1000.0);
    CHECK(sentinel_score(NegInfMode::negative_infinity) == kNegInf);
  }

  TEST_CASE("zero contrast probability is floored") {
    const ProbDist mature = dist({0.5, 0.5});
    const ProbDist early = dist({1.0, 0.0});
    ContrastConfig cfg;
    const ContrastResult r = contrast_scores(mature, early, cfg);
    CHECK(r.scores[1] == doctest::Approx(std::log(0.5) - std::log(kContrastFloor)).epsilon(1e-14));
  }

  TEST_CASE("repetition penalty") {
    std::vector<double> s{2.0, -1.0, 0.0, 3.0};
    const std::vector<TokenId> history{0, 1, 2, 0, 0};
    apply_repetition_penalty(s, history, 2.0);
    CHECK(s == std::vector<double>{1.0, -2.0, 0.0, 3.0});
    std::vector<double> same{2.0, -1.0};
    apply_repetition_penalty(same, history, 1.0);
    CHECK(same == std::vector<double>{2.0, -1.0});
  }

  TEST_CASE("repetition penalty runs before masking") {
    const ProbDist mature = dist({0.6, 0.3, 0.1});
    const ProbDist early = dist({0.2, 0.3, 0.5});
    ContrastConfig cfg;
    cfg.beta = 0.4;
    cfg.neg_inf = NegInfMode::minus_1000;
    cfg.repetition_penalty = 1.5;
    const std::vector<TokenId> history{0, 2};
    const ContrastResult r = contrast_scores(mature, early, cfg, history);
    CHECK(r.scores[0] == doctest::Approx(std::log(3.0) / 1.5).epsilon(1e-14));
    CHECK(r.scores[1] == doctest::Approx(0.0).epsilon(1e-14));
    // Token 2 is outside the plausible set: the sentinel is not penalized again.
    CHECK(r.scores[2] == -1000.0);
  }

  TEST_CASE("validation") {
    ContrastConfig cfg;
    cfg.beta = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg.beta = -0.1;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg.beta = 0.1;
    cfg.repetition_penalty = 0.9;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    CHECK_THROWS_AS(contrast_scores(dist({0.5, 0.5}), dist({0.2, 0.3, 0.5}), ContrastConfig{}), InvalidInput);
    CHECK(parse_neg_inf("inf") == NegInfMode::negative_infinity);
    CHECK(parse_neg_inf("minus1000") == NegInfMode::minus_1000);
    CHECK(to_string(NegInfMode::minus_1000) == "minus1000");
    CHECK_THROWS_AS(parse_neg_inf("-1e9"), InvalidConfig);
  }
}
