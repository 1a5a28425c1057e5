// SPDX-License-Identifier: Apache-2.0

#include "exdec/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "exdec/errors.hpp"

namespace exdec {

namespace {

double entropy_of(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h < 0.0 ? 0.0 : h;
}

template <typename T>
ProbDist softmax_impl(std::span<const T> logits) {
  if (logits.empty()) throw InvalidInput("softmax: empty logits");
  double max_logit = -INFINITY;
  for (T z : logits) {
    if (!std::isfinite(z)) throw InvalidInput("softmax: non-finite logit");
    max_logit = std::max(max_logit, static_cast<double>(z));
  }
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(static_cast<double>(logits[i]) - max_logit);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return ProbDist::from_probs(std::move(out));
}

}  // namespace

ProbDist::ProbDist(std::vector<double> probs) : probs_(std::move(probs)), entropy_(entropy_of(probs_)) {}

ProbDist ProbDist::from_probs(std::vector<double> probs) {
  if (probs.empty()) throw InvalidInput("ProbDist: empty distribution");
  double sum = 0.0;
  for (double v : probs) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidInput("ProbDist: entries must be finite and non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance) {
    throw InvalidInput("ProbDist: entries sum to " + std::to_string(sum));
  }
  return ProbDist(std::move(probs));
}

std::size_t ProbDist::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

double ProbDist::max_prob() const { return probs_[argmax()]; }

ProbDist softmax(std::span<const double> logits) { return softmax_impl(logits); }
ProbDist softmax(std::span<const float> logits) { return softmax_impl(logits); }

std::vector<double> log_softmax(std::span<const float> logits) {
  if (logits.empty()) throw InvalidInput("log_softmax: empty logits");
  double max_logit = -INFINITY;
  for (float z : logits) {
    if (!std::isfinite(z)) throw InvalidInput("log_softmax: non-finite logit");
    max_logit = std::max(max_logit, static_cast<double>(z));
  }
  double sum = 0.0;
  for (float z : logits) sum += std::exp(static_cast<double>(z) - max_logit);
  const double lse = max_logit + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<double>(logits[i]) - lse;
  return out;
}

double entropy(const ProbDist& d) { return entropy_of(d.probs()); }

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidInput("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

double jsd(const ProbDist& p, const ProbDist& q) {
  if (p.size() != q.size()) throw InvalidInput("jsd: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    const double from_p = p[i] > 0.0 ? p[i] * std::log(p[i] / m) : 0.0;
    const double from_q = q[i] > 0.0 ? q[i] * std::log(q[i] / m) : 0.0;
    // One addition per index keeps jsd(p, q) == jsd(q, p) exactly.
    acc += from_p + from_q;
  }
  // Rounding can push the sum a hair outside the analytic range.
  return std::clamp(0.5 * acc, 0.0, std::numbers::ln2);
}

double jsd_truncated(const ProbDist& p, const ProbDist& q, std::size_t k) {
  if (p.size() != q.size()) throw InvalidInput("jsd_truncated: length mismatch");
  if (k == 0 || k >= p.size()) return jsd(p, q);
  std::vector<TokenId> support = top_k_indices(p, k);
  for (TokenId t : top_k_indices(q, k)) support.push_back(t);
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());

  auto restrict = [&](const ProbDist& d) {
    std::vector<double> out(support.size());
    double mass = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
      out[i] = d[support[i]];
      mass += out[i];
    }
    // Both sides contribute their own top-k, so each keeps positive mass.
    for (double& v : out) v /= mass;
    return ProbDist::from_probs(std::move(out));
  };
  return jsd(restrict(p), restrict(q));
}

std::vector<TokenId> top_k_indices(const ProbDist& d, std::size_t k) {
  if (k < 1 || k > d.size()) {
    throw InvalidInput("top_k_indices: k=" + std::to_string(k) + " outside [1, " + std::to_string(d.size()) + "]");
  }
  std::vector<TokenId> idx(d.size());
  std::iota(idx.begin(), idx.end(), TokenId{0});
  auto before = [&](TokenId a, TokenId b) { return d[a] > d[b] || (d[a] == d[b] && a < b); };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
  idx.resize(k);
  return idx;
}

bool is_monotonic(std::span<const double> series) {
  if (series.size() < 2) throw InvalidInput("is_monotonic: need at least two points");
  bool non_decreasing = true;
  bool non_increasing = true;
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i] < series[i - 1]) non_decreasing = false;
    if (series[i] > series[i - 1]) non_increasing = false;
  }
  return non_decreasing || non_increasing;
}

LinearFit ols_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidInput("ols_fit: length mismatch");
  if (xs.size() < 2) throw InvalidInput("ols_fit: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mean_x += xs[i];
    mean_y += ys[i];
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mean_x;
    sxx += dx * dx;
    sxy += dx * (ys[i] - mean_y);
  }
  if (sxx == 0.0) throw DegenerateFit("ols_fit: all abscissae identical");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  return fit;
}

}  // namespace exdec
