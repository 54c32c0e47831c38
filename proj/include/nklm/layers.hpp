#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "nklm/rng.hpp"
#include "nklm/tensor.hpp"

namespace nklm {

double sigmoid(double x);
// log(1 + e^x), overflow-safe.
double softplus(double x);

// Numerically stable softmax (max-shifted). Throws DomainError on an empty or
// non-finite input.
Vec softmax(const Vec& logits);
double log_sum_exp(const Vec& logits);
// log softmax(logits)[idx], computed in log space.
double log_softmax_at(const Vec& logits, std::size_t idx);

// --- Two-layer perceptron: w2 * relu(w1 x + b1) + b2. Biases are n x 1. ---

struct MlpParams {
  const Tensor2* w1;
  const Tensor2* b1;
  const Tensor2* w2;
  const Tensor2* b2;
};
struct MlpGrads {
  Tensor2* w1;
  Tensor2* b1;
  Tensor2* w2;
  Tensor2* b2;
};
struct MlpCache {
  Vec x;
  Vec hidden_pre;  // w1 x + b1, before relu
  Vec hidden;
};

Vec mlp_forward(const MlpParams& p, const Vec& x, MlpCache* cache = nullptr);
// Returns d_loss/d_x; accumulates parameter gradients.
Vec mlp_backward(const MlpParams& p, const MlpCache& c, const Vec& d_out, const MlpGrads& g);

// --- LSTM ---
// Weight rows are stacked gate blocks in the order: input, forget, cell,
// output. wx: 4H x D, wh: 4H x H, b: 4H x 1.

struct LstmLayerParams {
  const Tensor2* wx;
  const Tensor2* wh;
  const Tensor2* b;
};
struct LstmLayerGrads {
  Tensor2* wx;
  Tensor2* wh;
  Tensor2* b;
};
struct LstmLayerCache {
  Vec x, h_prev, c_prev;
  Vec i, f, g, o;  // post-activation gates
  Vec c, tanh_c;
};
struct LstmState {
  std::vector<Vec> hidden;
  std::vector<Vec> cell;
  std::size_t layer_count() const { return hidden.size(); }
  static LstmState zeros(std::size_t layers, std::size_t width);
};

std::pair<Vec, Vec> lstm_layer_forward(const LstmLayerParams& p, const Vec& x,
                                       const Vec& h_prev, const Vec& c_prev,
                                       LstmLayerCache* cache = nullptr);
// Accumulates into parameter grads and into dh_prev / dc_prev; returns dx.
Vec lstm_layer_backward(const LstmLayerParams& p, const LstmLayerCache& c, const Vec& dh,
                        const Vec& dc, const LstmLayerGrads& g, Vec& dh_prev, Vec& dc_prev);

struct LstmStack {
  std::vector<LstmLayerParams> layers;
};

// One multi-layer step; mutates `state` in place and returns the top-layer
// output. Inverted dropout is applied to the inputs of layers > 0 only when
// dropout > 0 and rng is given (training); masks come out via dropout_masks.
Vec lstm_step_inplace(const LstmStack& stack, const Vec& x, LstmState& state,
                      double dropout = 0.0, Rng* rng = nullptr,
                      std::vector<LstmLayerCache>* caches = nullptr,
                      std::vector<Vec>* dropout_masks = nullptr);

// Pure variant: returns (top-layer h, next state). Deterministic for equal
// inputs; never applies dropout.
std::pair<Vec, LstmState> lstm_step(const LstmStack& stack, const Vec& x, const LstmState& state);

}  // namespace nklm
