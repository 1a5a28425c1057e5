// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file numkit.hpp
 * @brief Deterministic numeric kernels over next-token distributions.
 *
 * Everything here is a pure function of its arguments. Entropies and
 * divergences are in nats. Summations run in ascending index order so results
 * are reproducible bit-for-bit for identical inputs.
 */

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace exdec {

using TokenId = std::uint32_t;

/// Absolute tolerance on the total mass of a ProbDist.
inline constexpr double kProbSumTolerance = 1e-6;

/**
 * Normalized probability vector over vocabulary indices 0..V-1.
 *
 * Every entry is non-negative and the entries sum to one within
 * kProbSumTolerance. The Shannon entropy is computed once at construction.
 */
class ProbDist {
 public:
  /// Validates and adopts `probs`. Throws InvalidInput on negative, non-finite
  /// or badly normalized input.
  static ProbDist from_probs(std::vector<double> probs);

  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::size_t size() const { return probs_.size(); }
  double entropy() const { return entropy_; }

  /// Index of the largest probability, lowest index on ties.
  std::size_t argmax() const;
  double max_prob() const;

  friend bool operator==(const ProbDist&, const ProbDist&) = default;

 private:
  explicit ProbDist(std::vector<double> probs);

  std::vector<double> probs_;
  double entropy_ = 0.0;
};

/// Closed-form least-squares line y = slope * x + intercept.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Max-shifted softmax. Throws InvalidInput on empty or non-finite logits.
ProbDist softmax(std::span<const double> logits);
ProbDist softmax(std::span<const float> logits);

/// Natural-log softmax, z_i - logsumexp(z), without passing through exp/log.
std::vector<double> log_softmax(std::span<const float> logits);

/// Shannon entropy -sum p ln p with 0 ln 0 = 0, recomputed from the entries.
double entropy(const ProbDist& d);

/// KL(p || q) in nats with 0 ln(0/x) = 0. q must be positive wherever p is.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Jensen-Shannon divergence over the full support. Throws InvalidInput on a
/// length mismatch.
double jsd(const ProbDist& p, const ProbDist& q);

/**
 * Jensen-Shannon divergence restricted to the union of the top `k` indices of
 * `p` and of `q`, each side renormalized over that support. `k == 0` or
 * `k >= V` falls back to the full-support jsd().
 */
double jsd_truncated(const ProbDist& p, const ProbDist& q, std::size_t k);

/// The k most probable indices, descending probability, ascending index on
/// ties. Throws InvalidInput unless 1 <= k <= V.
std::vector<TokenId> top_k_indices(const ProbDist& d, std::size_t k);

/// True iff the series is non-decreasing or non-increasing (ties allowed).
/// Throws InvalidInput for fewer than two points.
bool is_monotonic(std::span<const double> series);

/// Ordinary least squares over (xs[i], ys[i]). Throws InvalidInput on length
/// mismatch or fewer than two points, DegenerateFit when every x is equal.
LinearFit ols_fit(std::span<const double> xs, std::span<const double> ys);

inline double ols_predict(const LinearFit& fit, double x) { return fit.slope * x + fit.intercept; }

}  // namespace exdec
