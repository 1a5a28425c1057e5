// SPDX-License-Identifier: Apache-2.0

#include "exdec/tiny_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "exdec/errors.hpp"

namespace exdec {

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

// y[t, :out] = W[out, in] * x[t, :in]
void linear(const double* w, const double* x, double* y, std::size_t rows, std::size_t in, std::size_t out) {
  for (std::size_t t = 0; t < rows; ++t) {
    const double* xt = x + t * in;
    double* yt = y + t * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w + o * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xt[i];
      yt[o] = acc;
    }
  }
}

void linear_backward(const double* w, const double* x, const double* dy, double* dw, double* dx, std::size_t rows,
                     std::size_t in, std::size_t out) {
  for (std::size_t t = 0; t < rows; ++t) {
    const double* xt = x + t * in;
    const double* dyt = dy + t * out;
    double* dxt = dx + t * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dyt[o];
      if (g == 0.0) continue;
      const double* wo = w + o * in;
      double* dwo = dw + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        dwo[i] += g * xt[i];
        dxt[i] += g * wo[i];
      }
    }
  }
}

void rms_norm(const double* x, const double* gain, double* y, double* rstd, std::size_t rows, std::size_t dim) {
  for (std::size_t t = 0; t < rows; ++t) {
    const double* xt = x + t * dim;
    double ms = 0.0;
    for (std::size_t i = 0; i < dim; ++i) ms += xt[i] * xt[i];
    const double r = 1.0 / std::sqrt(ms / static_cast<double>(dim) + kNormEps);
    rstd[t] = r;
    for (std::size_t i = 0; i < dim; ++i) y[t * dim + i] = xt[i] * r * gain[i];
  }
}

void rms_norm_backward(const double* x, const double* gain, const double* rstd, const double* dy, double* dx,
                       double* dgain, std::size_t rows, std::size_t dim) {
  for (std::size_t t = 0; t < rows; ++t) {
    const double* xt = x + t * dim;
    const double* dyt = dy + t * dim;
    const double r = rstd[t];
    double dot = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      dgain[i] += dyt[i] * xt[i] * r;
      dot += dyt[i] * gain[i] * xt[i];
    }
    const double coef = r * r * r * dot / static_cast<double>(dim);
    for (std::size_t i = 0; i < dim; ++i) dx[t * dim + i] += r * gain[i] * dyt[i] - xt[i] * coef;
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); }

double gelu_grad(double x) {
  const double th = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
}

}  // namespace

void TinyModelConfig::validate() const {
  if (layers == 0 || model_dim == 0 || heads == 0 || vocab_size == 0 || max_seq == 0 || ffn_mult == 0) {
    throw InvalidConfig("tiny model: every dimension must be positive");
  }
  if (model_dim % heads != 0) throw InvalidConfig("tiny model: heads must divide model_dim");
}

ParamLayout::ParamLayout(const TinyModelConfig& cfg) {
  const std::size_t d = cfg.model_dim;
  const std::size_t f = cfg.ffn_mult * d;
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    const std::size_t off = at;
    at += n;
    return off;
  };
  tok_emb = take(cfg.vocab_size * d);
  pos_emb = take(cfg.max_seq * d);
  blocks.reserve(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Block b{};
    b.attn_norm = take(d);
    b.qkv = take(3 * d * d);
    b.attn_out = take(d * d);
    b.mlp_norm = take(d);
    b.mlp_up = take(f * d);
    b.mlp_down = take(d * f);
    blocks.push_back(b);
  }
  final_norm = take(d);
  head = take(cfg.vocab_size * d);
  total = at;
}

BigramCorpus::BigramCorpus(std::size_t vocab_size, std::uint64_t seed, std::vector<double> successor_weights)
    : weights_(std::move(successor_weights)) {
  if (vocab_size < 2) throw InvalidConfig("bigram corpus: vocabulary too small");
  if (weights_.empty() || weights_.size() > vocab_size) throw InvalidConfig("bigram corpus: bad successor count");
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (!(total > 0.0)) throw InvalidConfig("bigram corpus: weights must be positive");
  for (double& w : weights_) {
    if (!(w > 0.0)) throw InvalidConfig("bigram corpus: weights must be positive");
    w /= total;
  }
  Xoshiro256 rng(seed);
  successors_.resize(vocab_size);
  for (auto& succ : successors_) {
    // Partial Fisher-Yates over the vocabulary.
    std::vector<TokenId> pool(vocab_size);
    std::iota(pool.begin(), pool.end(), TokenId{0});
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      const std::size_t j = i + rng.below(vocab_size - i);
      std::swap(pool[i], pool[j]);
    }
    succ.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(weights_.size()));
  }
}

double BigramCorpus::transition(TokenId token, TokenId next) const {
  const auto& succ = successors_.at(token);
  for (std::size_t i = 0; i < succ.size(); ++i) {
    if (succ[i] == next) return weights_[i];
  }
  return 0.0;
}

std::vector<TokenId> BigramCorpus::sample(Xoshiro256& rng, std::size_t length) const {
  std::vector<TokenId> out;
  out.reserve(length);
  if (length == 0) return out;
  out.push_back(static_cast<TokenId>(rng.below(successors_.size())));
  while (out.size() < length) {
    const double u = rng.uniform();
    const auto& succ = successors_[out.back()];
    double acc = 0.0;
    std::size_t pick = succ.size() - 1;
    for (std::size_t i = 0; i < succ.size(); ++i) {
      acc += weights_[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out.push_back(succ[pick]);
  }
  return out;
}

struct TinyTransformer::Activations {
  std::size_t rows = 0;
  // residual stream entering each block, plus the final stream: layers + 1 entries
  std::vector<std::vector<double>> resid;
  struct Block {
    std::vector<double> norm1, rstd1, qkv, att, mixed, mid, norm2, rstd2, up, act;
  };
  std::vector<Block> blocks;
};

TinyTransformer::TinyTransformer(const TinyModelConfig& cfg) : cfg_(cfg), layout_((cfg.validate(), cfg)) {
  params_.assign(layout_.total, 0.0);
  head_bias_.assign(cfg_.vocab_size, 0.0);
  const std::size_t d = cfg_.model_dim;
  const std::size_t f = cfg_.ffn_mult * d;
  const double resid_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg_.layers));
  Xoshiro256 rng(cfg_.seed);
  auto fill = [&](std::size_t off, std::size_t n, double bound) {
    for (std::size_t i = 0; i < n; ++i) params_[off + i] = rng.symmetric(bound);
  };
  auto ones = [&](std::size_t off) { std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(off), d, 1.0); };

  fill(layout_.tok_emb, cfg_.vocab_size * d, 1.0);
  fill(layout_.pos_emb, cfg_.max_seq * d, 0.1);
  for (const auto& b : layout_.blocks) {
    ones(b.attn_norm);
    fill(b.qkv, 3 * d * d, 1.0 / std::sqrt(static_cast<double>(d)));
    fill(b.attn_out, d * d, resid_scale / std::sqrt(static_cast<double>(d)));
    ones(b.mlp_norm);
    fill(b.mlp_up, f * d, 1.0 / std::sqrt(static_cast<double>(d)));
    fill(b.mlp_down, d * f, resid_scale / std::sqrt(static_cast<double>(f)));
  }
  ones(layout_.final_norm);
  fill(layout_.head, cfg_.vocab_size * d, 1.0 / std::sqrt(static_cast<double>(d)));
}

void TinyTransformer::set_head_bias(TokenId token, double bias) {
  if (token >= cfg_.vocab_size) throw InvalidInput("set_head_bias: token outside vocabulary");
  head_bias_[token] = bias;
}

void TinyTransformer::check_context(std::span<const TokenId> context) const {
  if (context.empty()) throw InvalidInput("tiny model: empty context");
  if (context.size() > cfg_.max_seq) {
    throw InvalidInput("tiny model: context length " + std::to_string(context.size()) + " exceeds max_seq " +
                       std::to_string(cfg_.max_seq));
  }
  for (TokenId t : context) {
    if (t >= cfg_.vocab_size) throw InvalidInput("tiny model: token " + std::to_string(t) + " outside vocabulary");
  }
}

void TinyTransformer::forward(std::span<const TokenId> tokens, Activations& act) const {
  const std::size_t rows = tokens.size();
  const std::size_t d = cfg_.model_dim;
  const std::size_t f = cfg_.ffn_mult * d;
  const std::size_t heads = cfg_.heads;
  const std::size_t hd = d / heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const double* p = params_.data();

  act.rows = rows;
  act.resid.assign(cfg_.layers + 1, std::vector<double>(rows * d));
  act.blocks.resize(cfg_.layers);

  auto& x0 = act.resid[0];
  for (std::size_t t = 0; t < rows; ++t) {
    const double* te = p + layout_.tok_emb + tokens[t] * d;
    const double* pe = p + layout_.pos_emb + t * d;
    for (std::size_t i = 0; i < d; ++i) x0[t * d + i] = te[i] + pe[i];
  }

  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const auto& off = layout_.blocks[l];
    auto& b = act.blocks[l];
    const auto& x = act.resid[l];
    b.norm1.resize(rows * d);
    b.rstd1.resize(rows);
    b.qkv.resize(rows * 3 * d);
    b.att.assign(heads * rows * rows, 0.0);
    b.mixed.assign(rows * d, 0.0);
    b.mid.resize(rows * d);
    b.norm2.resize(rows * d);
    b.rstd2.resize(rows);
    b.up.resize(rows * f);
    b.act.resize(rows * f);

    rms_norm(x.data(), p + off.attn_norm, b.norm1.data(), b.rstd1.data(), rows, d);
    linear(p + off.qkv, b.norm1.data(), b.qkv.data(), rows, d, 3 * d);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t t = 0; t < rows; ++t) {
        const double* q = b.qkv.data() + t * 3 * d + h * hd;
        double* a = b.att.data() + (h * rows + t) * rows;
        double max_s = -INFINITY;
        for (std::size_t u = 0; u <= t; ++u) {
          const double* k = b.qkv.data() + u * 3 * d + d + h * hd;
          double s = 0.0;
          for (std::size_t e = 0; e < hd; ++e) s += q[e] * k[e];
          a[u] = s * att_scale;
          max_s = std::max(max_s, a[u]);
        }
        double sum = 0.0;
        for (std::size_t u = 0; u <= t; ++u) {
          a[u] = std::exp(a[u] - max_s);
          sum += a[u];
        }
        double* out = b.mixed.data() + t * d + h * hd;
        for (std::size_t u = 0; u <= t; ++u) {
          a[u] /= sum;
          const double* v = b.qkv.data() + u * 3 * d + 2 * d + h * hd;
          for (std::size_t e = 0; e < hd; ++e) out[e] += a[u] * v[e];
        }
      }
    }
    linear(p + off.attn_out, b.mixed.data(), b.mid.data(), rows, d, d);
    for (std::size_t i = 0; i < rows * d; ++i) b.mid[i] += x[i];

    rms_norm(b.mid.data(), p + off.mlp_norm, b.norm2.data(), b.rstd2.data(), rows, d);
    linear(p + off.mlp_up, b.norm2.data(), b.up.data(), rows, d, f);
    for (std::size_t i = 0; i < rows * f; ++i) b.act[i] = gelu(b.up[i]);
    auto& next = act.resid[l + 1];
    linear(p + off.mlp_down, b.act.data(), next.data(), rows, f, d);
    for (std::size_t i = 0; i < rows * d; ++i) next[i] += b.mid[i];
  }
}

std::vector<float> TinyTransformer::exit_logits(std::span<const double> hidden, bool normalize) const {
  const std::size_t d = cfg_.model_dim;
  const double* p = params_.data();
  std::vector<double> h(hidden.begin(), hidden.end());
  if (normalize) {
    double rstd = 0.0;
    rms_norm(hidden.data(), p + layout_.final_norm, h.data(), &rstd, 1, d);
  }
  std::vector<double> z(cfg_.vocab_size);
  linear(p + layout_.head, h.data(), z.data(), 1, d, cfg_.vocab_size);
  std::vector<float> out(cfg_.vocab_size);
  for (std::size_t v = 0; v < cfg_.vocab_size; ++v) out[v] = static_cast<float>(z[v] + head_bias_[v]);
  return out;
}

LayerLogitsStack TinyTransformer::early_exit(std::span<const TokenId> context) const {
  check_context(context);
  Activations act;
  forward(context, act);
  const std::size_t d = cfg_.model_dim;
  const std::size_t last = context.size() - 1;
  std::vector<float> rows;
  rows.reserve((cfg_.layers + 1) * cfg_.vocab_size);
  for (std::size_t j = 0; j <= cfg_.layers; ++j) {
    std::span<const double> hidden(act.resid[j].data() + last * d, d);
    const bool normalize = cfg_.early_exit_norm || j == cfg_.layers;
    auto z = exit_logits(hidden, normalize);
    rows.insert(rows.end(), z.begin(), z.end());
  }
  return LayerLogitsStack(cfg_.layers, cfg_.vocab_size, std::move(rows));
}

std::vector<float> TinyTransformer::next_token_logits(std::span<const TokenId> context) const {
  check_context(context);
  Activations act;
  forward(context, act);
  const std::size_t d = cfg_.model_dim;
  return exit_logits(std::span<const double>(act.resid.back().data() + (context.size() - 1) * d, d), true);
}

double TinyTransformer::backward(std::span<const TokenId> tokens, const Activations& act, double scale,
                                 std::vector<double>& grad) const {
  const std::size_t rows = tokens.size();
  const std::size_t d = cfg_.model_dim;
  const std::size_t f = cfg_.ffn_mult * d;
  const std::size_t vocab = cfg_.vocab_size;
  const std::size_t heads = cfg_.heads;
  const std::size_t hd = d / heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const double* p = params_.data();
  double* g = grad.data();

  // Head and loss. Position rows-1 has no target.
  const auto& x_final = act.resid.back();
  std::vector<double> normf(rows * d), rstdf(rows);
  rms_norm(x_final.data(), p + layout_.final_norm, normf.data(), rstdf.data(), rows, d);
  std::vector<double> logits(rows * vocab);
  linear(p + layout_.head, normf.data(), logits.data(), rows, d, vocab);
  std::vector<double> dlogits(rows * vocab, 0.0);
  double loss = 0.0;
  for (std::size_t t = 0; t + 1 < rows; ++t) {
    double* z = logits.data() + t * vocab;
    double max_z = -INFINITY;
    for (std::size_t v = 0; v < vocab; ++v) {
      z[v] += head_bias_[v];
      max_z = std::max(max_z, z[v]);
    }
    double sum = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) sum += std::exp(z[v] - max_z);
    const double lse = max_z + std::log(sum);
    const TokenId target = tokens[t + 1];
    loss += lse - z[target];
    for (std::size_t v = 0; v < vocab; ++v) dlogits[t * vocab + v] = std::exp(z[v] - lse) * scale;
    dlogits[t * vocab + target] -= scale;
  }

  std::vector<double> dnormf(rows * d, 0.0);
  linear_backward(p + layout_.head, normf.data(), dlogits.data(), g + layout_.head, dnormf.data(), rows, d, vocab);
  std::vector<double> dx(rows * d, 0.0);
  rms_norm_backward(x_final.data(), p + layout_.final_norm, rstdf.data(), dnormf.data(), dx.data(),
                    g + layout_.final_norm, rows, d);

  for (std::size_t l = cfg_.layers; l-- > 0;) {
    const auto& off = layout_.blocks[l];
    const auto& b = act.blocks[l];
    const auto& x = act.resid[l];

    // MLP: out = mid + down(gelu(up(norm2(mid))))
    std::vector<double> dact(rows * f, 0.0);
    linear_backward(p + off.mlp_down, b.act.data(), dx.data(), g + off.mlp_down, dact.data(), rows, f, d);
    for (std::size_t i = 0; i < rows * f; ++i) dact[i] *= gelu_grad(b.up[i]);
    std::vector<double> dnorm2(rows * d, 0.0);
    linear_backward(p + off.mlp_up, b.norm2.data(), dact.data(), g + off.mlp_up, dnorm2.data(), rows, d, f);
    std::vector<double> dmid = dx;
    rms_norm_backward(b.mid.data(), p + off.mlp_norm, b.rstd2.data(), dnorm2.data(), dmid.data(), g + off.mlp_norm,
                      rows, d);

    // Attention: mid = x + out_proj(mixed)
    std::vector<double> dmixed(rows * d, 0.0);
    linear_backward(p + off.attn_out, b.mixed.data(), dmid.data(), g + off.attn_out, dmixed.data(), rows, d, d);
    std::vector<double> dqkv(rows * 3 * d, 0.0);
    std::vector<double> datt(rows);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t t = 0; t < rows; ++t) {
        const double* a = b.att.data() + (h * rows + t) * rows;
        const double* dout = dmixed.data() + t * d + h * hd;
        double weighted = 0.0;
        for (std::size_t u = 0; u <= t; ++u) {
          const double* v = b.qkv.data() + u * 3 * d + 2 * d + h * hd;
          double* dv = dqkv.data() + u * 3 * d + 2 * d + h * hd;
          double s = 0.0;
          for (std::size_t e = 0; e < hd; ++e) {
            s += dout[e] * v[e];
            dv[e] += a[u] * dout[e];
          }
          datt[u] = s;
          weighted += a[u] * s;
        }
        const double* q = b.qkv.data() + t * 3 * d + h * hd;
        double* dq = dqkv.data() + t * 3 * d + h * hd;
        for (std::size_t u = 0; u <= t; ++u) {
          const double ds = a[u] * (datt[u] - weighted) * att_scale;
          const double* k = b.qkv.data() + u * 3 * d + d + h * hd;
          double* dk = dqkv.data() + u * 3 * d + d + h * hd;
          for (std::size_t e = 0; e < hd; ++e) {
            dq[e] += ds * k[e];
            dk[e] += ds * q[e];
          }
        }
      }
    }
    std::vector<double> dnorm1(rows * d, 0.0);
    linear_backward(p + off.qkv, b.norm1.data(), dqkv.data(), g + off.qkv, dnorm1.data(), rows, d, 3 * d);
    dx = dmid;
    rms_norm_backward(x.data(), p + off.attn_norm, b.rstd1.data(), dnorm1.data(), dx.data(), g + off.attn_norm, rows,
                      d);
  }

  for (std::size_t t = 0; t < rows; ++t) {
    double* gte = g + layout_.tok_emb + tokens[t] * d;
    double* gpe = g + layout_.pos_emb + t * d;
    for (std::size_t i = 0; i < d; ++i) {
      gte[i] += dx[t * d + i];
      gpe[i] += dx[t * d + i];
    }
  }
  return loss;
}

double TinyTransformer::loss_and_gradient(std::span<const std::vector<TokenId>> sequences,
                                          std::vector<double>& grad) const {
  grad.assign(params_.size(), 0.0);
  std::size_t targets = 0;
  for (const auto& s : sequences) {
    check_context(s);
    targets += s.size() - 1;
  }
  if (targets == 0) throw InvalidInput("loss: sequences need at least two tokens");
  const double scale = 1.0 / static_cast<double>(targets);
  double total = 0.0;
  Activations act;
  for (const auto& s : sequences) {
    forward(s, act);
    total += backward(s, act, scale, grad);
  }
  return total * scale;
}

double TinyTransformer::loss(std::span<const std::vector<TokenId>> sequences) const {
  std::vector<double> scratch;
  return loss_and_gradient(sequences, scratch);
}

std::vector<double> TinyTransformer::train(const BigramCorpus& corpus, const TrainConfig& tc) {
  if (corpus.vocab_size() != cfg_.vocab_size) throw InvalidConfig("train: corpus vocabulary differs from model");
  if (tc.seq_len < 2 || tc.seq_len > cfg_.max_seq) throw InvalidConfig("train: seq_len outside [2, max_seq]");
  if (tc.batch == 0) throw InvalidConfig("train: batch must be positive");
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.99;
  constexpr double kEps = 1e-8;

  Xoshiro256 rng(tc.seed);
  std::vector<double> m(params_.size(), 0.0), v(params_.size(), 0.0), grad;
  std::vector<std::vector<TokenId>> batch(tc.batch);
  std::vector<double> history;
  history.reserve(tc.steps);
  double b1 = 1.0;
  double b2 = 1.0;
  for (std::size_t step = 0; step < tc.steps; ++step) {
    for (auto& s : batch) s = corpus.sample(rng, tc.seq_len);
    history.push_back(loss_and_gradient(batch, grad));
    b1 *= kBeta1;
    b2 *= kBeta2;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      const double mhat = m[i] / (1.0 - b1);
      const double vhat = v[i] / (1.0 - b2);
      params_[i] -= tc.learning_rate * mhat / (std::sqrt(vhat) + kEps);
    }
  }
  return history;
}

}  // namespace exdec
