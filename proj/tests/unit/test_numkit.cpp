// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "exdec/errors.hpp"
#include "exdec/numkit.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace exdec;

namespace {

ProbDist dist(std::vector<double> p) { return ProbDist::from_probs(std::move(p)); }

}  // namespace

TEST_SUITE("numkit") {
  TEST_CASE("softmax worked examples") {
    const std::vector<double> zeros{0, 0, 0, 0};
    const ProbDist u = softmax(zeros);
    for (double p : u.probs()) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

    const std::vector<double> big{1000, 0};
    const ProbDist s = softmax(big);
    CHECK(std::abs(s[0] - 1.0) < 1e-12);
    CHECK(s[1] < 1e-12);

    const std::vector<double> ln2{std::log(2.0), 0};
    const ProbDist t = softmax(ln2);
    CHECK(std::abs(t[0] - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(t[1] - 1.0 / 3.0) < 1e-15);
  }

  TEST_CASE("softmax rejects empty and non-finite logits") {
    CHECK_THROWS_AS(softmax(std::vector<double>{}), InvalidInput);
    CHECK_THROWS_AS(softmax(std::vector<double>{0.0, NAN}), InvalidInput);
    CHECK_THROWS_AS(softmax(std::vector<double>{INFINITY, 0.0}), InvalidInput);
  }

  TEST_CASE("softmax of random logits sums to one and matches the oracle") {
    testgen::Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<float> z(testgen::pick(rng, 1, 50));
      for (auto& v : z) v = static_cast<float>(testgen::uniform(rng, -30, 30));
      const ProbDist p = softmax(z);
      const std::vector<double> ref = oracle::softmax(z);
      double total = 0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        total += p[i];
        CHECK(p[i] == ref[i]);
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }

  TEST_CASE("log_softmax agrees with log of softmax") {
    const std::vector<float> z{1.5f, -0.25f, 3.0f, 0.0f};
    const auto ls = log_softmax(z);
    const ProbDist p = softmax(z);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(ls[i] == doctest::Approx(std::log(p[i])).epsilon(1e-13));
  }

  TEST_CASE("ProbDist validation") {
    CHECK_THROWS_AS(dist({}), InvalidInput);
    CHECK_THROWS_AS(dist({0.5, 0.6}), InvalidInput);
    CHECK_THROWS_AS(dist({1.5, -0.5}), InvalidInput);
    CHECK_THROWS_AS(dist({NAN, 1.0}), InvalidInput);
    CHECK_NOTHROW(dist({0.5, 0.5 + 1e-7}));
    CHECK(dist({0.2, 0.4, 0.4}).argmax() == 1);
    CHECK(dist({0.2, 0.4, 0.4}).max_prob() == 0.4);
  }

  TEST_CASE("entropy worked examples") {
    CHECK(entropy(dist({0.25, 0.25, 0.25, 0.25})) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    CHECK(entropy(dist({0, 0, 1, 0})) == 0.0);
    CHECK(entropy(dist({0.5, 0.5, 0, 0})) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(dist({0.5, 0.5}).entropy() == entropy(dist({0.5, 0.5})));
  }

  TEST_CASE("jsd worked examples") {
    const ProbDist p = dist({0.1, 0.6, 0.3});
    CHECK(jsd(p, p) == 0.0);
    CHECK(jsd(dist({1, 0}), dist({0, 1})) == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
    // Hand evaluation: m = [0.75, 0.25];
    // KL(p||m) = 0.5 ln(2/3) + 0.5 ln 2, KL(q||m) = ln(4/3).
    const double expected = 0.5 * (0.5 * std::log(2.0 / 3.0) + 0.5 * std::log(2.0)) + 0.5 * std::log(4.0 / 3.0);
    CHECK(jsd(dist({0.5, 0.5}), dist({1, 0})) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(jsd(dist({0.5, 0.5}), dist({1, 0})) == doctest::Approx(0.21576).epsilon(1e-4));
    CHECK_THROWS_AS(jsd(dist({1.0}), dist({0.5, 0.5})), InvalidInput);
  }

  TEST_CASE("jsd is symmetric, bounded and matches the oracle") {
    testgen::Rng rng(2);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t v = testgen::pick(rng, 2, 40);
      const auto a = testgen::distribution(rng, v, trial % 2 == 0);
      const auto b = testgen::distribution(rng, v, trial % 3 == 0);
      const double d = jsd(dist(a), dist(b));
      CHECK(d == jsd(dist(b), dist(a)));
      CHECK(d >= 0.0);
      CHECK(d <= std::numbers::ln2);
      const double ref = static_cast<double>(oracle::jsd(a, b));
      CHECK(std::abs(d - ref) <= 1e-12 + 1e-9 * ref);
    }
  }

  TEST_CASE("kl divergence") {
    const std::vector<double> p{0.5, 0.5, 0.0};
    const std::vector<double> q{0.25, 0.5, 0.25};
    CHECK(kl_divergence(p, q) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-15));
    CHECK(kl_divergence(q, q) == 0.0);
    CHECK_THROWS_AS(kl_divergence(p, std::vector<double>{1.0}), InvalidInput);
  }

  TEST_CASE("jsd_truncated") {
    const ProbDist a = dist({0.5, 0.3, 0.1, 0.1});
    const ProbDist b = dist({0.1, 0.3, 0.5, 0.1});
    CHECK(jsd_truncated(a, b, 0) == jsd(a, b));
    CHECK(jsd_truncated(a, b, 4) == jsd(a, b));
    // Top-1 supports are {0} and {2}; each side is renormalized over {0, 2}.
    const double one = jsd(dist({0.5 / 0.6, 0.1 / 0.6}), dist({0.1 / 0.6, 0.5 / 0.6}));
    CHECK(jsd_truncated(a, b, 1) == doctest::Approx(one).epsilon(1e-14));
    // Top-2: support {0, 1, 2}, renormalized by 0.9 on both sides.
    const double ref = jsd(dist({0.5 / 0.9, 0.3 / 0.9, 0.1 / 0.9}), dist({0.1 / 0.9, 0.3 / 0.9, 0.5 / 0.9}));
    CHECK(jsd_truncated(a, b, 2) == doctest::Approx(ref).epsilon(1e-14));
  }

  TEST_CASE("top_k_indices worked examples") {
    CHECK(top_k_indices(dist({0.1, 0.7, 0.2}), 2) == std::vector<TokenId>{1, 2});
    CHECK(top_k_indices(dist({0.25, 0.25, 0.25, 0.25}), 2) == std::vector<TokenId>{0, 1});
    CHECK(top_k_indices(dist({0, 0, 0, 1}), 1) == std::vector<TokenId>{3});
    CHECK_THROWS_AS(top_k_indices(dist({0.5, 0.5}), 0), InvalidInput);
    CHECK_THROWS_AS(top_k_indices(dist({0.5, 0.5}), 3), InvalidInput);
  }

  TEST_CASE("top_k_indices matches a full stable sort") {
    testgen::Rng rng(3);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t v = testgen::pick(rng, 1, 30);
      auto p = testgen::distribution(rng, v, true);
      // Force a tie, then renormalize.
      if (v > 3 && p[2] > 0) {
        p[1] = p[2];
        double total = 0;
        for (double x : p) total += x;
        for (double& x : p) x /= total;
      }
      const std::size_t k = testgen::pick(rng, 1, v);
      const auto got = top_k_indices(dist(p), k);
      const auto want = oracle::top_k(p, k);
      CHECK(std::vector<std::uint32_t>(got.begin(), got.end()) == want);
    }
  }

  TEST_CASE("is_monotonic worked examples") {
    CHECK(is_monotonic(std::vector<double>{0.1, 0.2, 0.3}));
    CHECK_FALSE(is_monotonic(std::vector<double>{0.1, 0.3, 0.2}));
    CHECK(is_monotonic(std::vector<double>{0.3, 0.3, 0.2}));
    CHECK(is_monotonic(std::vector<double>{0.3, 0.3}));
    CHECK_THROWS_AS(is_monotonic(std::vector<double>{0.3}), InvalidInput);
  }

  TEST_CASE("ols_fit and ols_predict worked examples") {
    const std::vector<double> xs{1, 2, 3};
    LinearFit f = ols_fit(xs, std::vector<double>{0.1, 0.2, 0.3});
    CHECK(f.slope == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(std::abs(f.intercept) < 1e-15);
    CHECK(ols_predict({0.1, 0.0}, 5) == doctest::Approx(0.5));

    f = ols_fit(xs, std::vector<double>{0.2, 0.2, 0.2});
    CHECK(f.slope == 0.0);
    CHECK(f.intercept == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(ols_predict({0.0, 0.2}, 100) == 0.2);

    // Centered sums: sum dx*dy = 0.3, sum dx^2 = 2, so slope 0.15 and intercept 2/15 - 0.3.
    f = ols_fit(xs, std::vector<double>{0.0, 0.1, 0.3});
    CHECK(f.slope == doctest::Approx(0.15).epsilon(1e-14));
    CHECK(f.intercept == doctest::Approx(-1.0 / 6.0).epsilon(1e-14));
    CHECK(ols_predict(f, 4) == doctest::Approx(0.4333333333333333).epsilon(1e-14));
  }

  TEST_CASE("ols_fit errors") {
    CHECK_THROWS_AS(ols_fit(std::vector<double>{1, 2}, std::vector<double>{1}), InvalidInput);
    CHECK_THROWS_AS(ols_fit(std::vector<double>{1}, std::vector<double>{1}), InvalidInput);
    CHECK_THROWS_AS(ols_fit(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}), DegenerateFit);
  }

  TEST_CASE("ols_fit matches the normal equations") {
    testgen::Rng rng(4);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = testgen::pick(rng, 2, 12);
      std::vector<double> xs(n), ys(n);
      const double start = testgen::uniform(rng, 0, 40);
      for (std::size_t i = 0; i < n; ++i) {
        xs[i] = start + static_cast<double>(i);
        ys[i] = testgen::uniform(rng, 0, 1);
      }
      const LinearFit f = ols_fit(xs, ys);
      const oracle::Line l = oracle::ols(xs, ys);
      CHECK(std::abs(f.slope - static_cast<double>(l.slope)) <= 1e-9 * std::max(1.0, std::abs(f.slope)));
      CHECK(std::abs(f.intercept - static_cast<double>(l.intercept)) <= 1e-9 * std::max(1.0, std::abs(f.intercept)));
    }
  }
}
