#include "nklm/layers.hpp"

#include <algorithm>
#include <cmath>

#include "nklm/errors.hpp"

namespace nklm {

double sigmoid(double x) {
  // split on sign so exp never overflows
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double log_sum_exp(const Vec& logits) {
  if (logits.empty()) throw DomainError("log_sum_exp: empty input");
  double m = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) throw DomainError("log_sum_exp: non-finite logit");
    m = std::max(m, v);
  }
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  return m + std::log(s);
}

Vec softmax(const Vec& logits) {
  if (logits.empty()) throw DomainError("softmax: empty input");
  double m = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) throw DomainError("softmax: non-finite logit");
    m = std::max(m, v);
  }
  Vec p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

double log_softmax_at(const Vec& logits, std::size_t idx) {
  if (idx >= logits.size()) throw DomainError("log_softmax_at: index out of range");
  return logits[idx] - log_sum_exp(logits);
}

// --- MLP ---

Vec mlp_forward(const MlpParams& p, const Vec& x, MlpCache* cache) {
  if (p.b1->cols() != 1 || p.b2->cols() != 1) throw ShapeError("mlp_forward: biases must be n x 1");
  Vec pre = matvec(*p.w1, x);
  if (pre.size() != p.b1->rows()) throw ShapeError("mlp_forward: w1/b1 mismatch");
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += p.b1->at(i, 0);
  Vec hidden(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) hidden[i] = pre[i] > 0.0 ? pre[i] : 0.0;
  Vec out = matvec(*p.w2, hidden);
  if (out.size() != p.b2->rows()) throw ShapeError("mlp_forward: w2/b2 mismatch");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.b2->at(i, 0);
  if (cache) {
    cache->x = x;
    cache->hidden_pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

Vec mlp_backward(const MlpParams& p, const MlpCache& c, const Vec& d_out, const MlpGrads& g) {
  if (d_out.size() != p.w2->rows()) throw ShapeError("mlp_backward: d_out size mismatch");
  add_outer(*g.w2, d_out, c.hidden);
  for (std::size_t i = 0; i < d_out.size(); ++i) g.b2->at(i, 0) += d_out[i];
  Vec dh = matvec_t(*p.w2, d_out);
  for (std::size_t i = 0; i < dh.size(); ++i)
    if (c.hidden_pre[i] <= 0.0) dh[i] = 0.0;  // relu'
  add_outer(*g.w1, dh, c.x);
  for (std::size_t i = 0; i < dh.size(); ++i) g.b1->at(i, 0) += dh[i];
  return matvec_t(*p.w1, dh);
}

// --- LSTM ---

LstmState LstmState::zeros(std::size_t layers, std::size_t width) {
  LstmState s;
  s.hidden.assign(layers, Vec(width, 0.0));
  s.cell.assign(layers, Vec(width, 0.0));
  return s;
}

std::pair<Vec, Vec> lstm_layer_forward(const LstmLayerParams& p, const Vec& x,
                                       const Vec& h_prev, const Vec& c_prev,
                                       LstmLayerCache* cache) {
  const std::size_t h4 = p.wx->rows();
  if (h4 % 4 != 0) throw ShapeError("lstm_layer_forward: weight rows not divisible by 4");
  const std::size_t h = h4 / 4;
  if (p.wh->rows() != h4 || p.wh->cols() != h || p.b->rows() != h4 || p.b->cols() != 1)
    throw ShapeError("lstm_layer_forward: inconsistent weight shapes");
  if (h_prev.size() != h || c_prev.size() != h)
    throw ShapeError("lstm_layer_forward: state width mismatch");

  Vec pre = matvec(*p.wx, x);
  const Vec rec = matvec(*p.wh, h_prev);
  for (std::size_t i = 0; i < h4; ++i) pre[i] += rec[i] + p.b->at(i, 0);

  Vec gi(h), gf(h), gg(h), go(h), c(h), tc(h), hn(h);
  for (std::size_t j = 0; j < h; ++j) {
    gi[j] = sigmoid(pre[j]);
    gf[j] = sigmoid(pre[h + j]);
    gg[j] = std::tanh(pre[2 * h + j]);
    go[j] = sigmoid(pre[3 * h + j]);
    c[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
    tc[j] = std::tanh(c[j]);
    hn[j] = go[j] * tc[j];
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->i = gi;
    cache->f = gf;
    cache->g = gg;
    cache->o = go;
    cache->c = c;
    cache->tanh_c = tc;
  }
  return {std::move(hn), std::move(c)};
}

Vec lstm_layer_backward(const LstmLayerParams& p, const LstmLayerCache& c, const Vec& dh,
                        const Vec& dc_in, const LstmLayerGrads& g, Vec& dh_prev, Vec& dc_prev) {
  const std::size_t h = c.i.size();
  if (dh.size() != h || dc_in.size() != h || dh_prev.size() != h || dc_prev.size() != h)
    throw ShapeError("lstm_layer_backward: size mismatch");

  Vec dpre(4 * h);
  for (std::size_t j = 0; j < h; ++j) {
    const double do_ = dh[j] * c.tanh_c[j];
    double dc = dc_in[j] + dh[j] * c.o[j] * (1.0 - c.tanh_c[j] * c.tanh_c[j]);
    const double di = dc * c.g[j];
    const double df = dc * c.c_prev[j];
    const double dg = dc * c.i[j];
    dc_prev[j] += dc * c.f[j];
    dpre[j] = di * c.i[j] * (1.0 - c.i[j]);
    dpre[h + j] = df * c.f[j] * (1.0 - c.f[j]);
    dpre[2 * h + j] = dg * (1.0 - c.g[j] * c.g[j]);
    dpre[3 * h + j] = do_ * c.o[j] * (1.0 - c.o[j]);
  }
  add_outer(*g.wx, dpre, c.x);
  add_outer(*g.wh, dpre, c.h_prev);
  for (std::size_t i = 0; i < dpre.size(); ++i) g.b->at(i, 0) += dpre[i];
  const Vec dhp = matvec_t(*p.wh, dpre);
  axpy(1.0, dhp, dh_prev);
  return matvec_t(*p.wx, dpre);
}

Vec lstm_step_inplace(const LstmStack& stack, const Vec& x, LstmState& state, double dropout,
                      Rng* rng, std::vector<LstmLayerCache>* caches,
                      std::vector<Vec>* dropout_masks) {
  const std::size_t layers = stack.layers.size();
  if (state.layer_count() != layers) throw ShapeError("lstm_step: state/stack layer mismatch");
  if (dropout < 0.0 || dropout >= 1.0) throw DomainError("lstm_step: dropout must be in [0, 1)");
  if (caches) caches->resize(layers);
  if (dropout_masks) dropout_masks->assign(layers, Vec{});

  Vec input = x;
  for (std::size_t l = 0; l < layers; ++l) {
    if (l > 0 && dropout > 0.0 && rng) {
      Vec mask(input.size());
      const double keep = 1.0 - dropout;
      for (std::size_t i = 0; i < input.size(); ++i) {
        mask[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
        input[i] *= mask[i];
      }
      if (dropout_masks) (*dropout_masks)[l] = std::move(mask);
    }
    auto [h, c] = lstm_layer_forward(stack.layers[l], input, state.hidden[l], state.cell[l],
                                     caches ? &(*caches)[l] : nullptr);
    state.hidden[l] = h;
    state.cell[l] = std::move(c);
    input = std::move(h);
  }
  return input;
}

std::pair<Vec, LstmState> lstm_step(const LstmStack& stack, const Vec& x, const LstmState& state) {
  LstmState next = state;
  Vec h = lstm_step_inplace(stack, x, next);
  return {std::move(h), std::move(next)};
}

}  // namespace nklm
