#include "nklm/model.hpp"

#include <algorithm>
#include <cmath>

#include "nklm/errors.hpp"

namespace nklm {

namespace {

std::size_t argmax(const Vec& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::size_t sample_index(const Vec& probs, Rng& rng) {
  const double u = rng.next_double();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

void check_fact_index(int a, std::size_t fact_count, const char* who) {
  if (a < 0 || static_cast<std::size_t>(a) >= fact_count)
    throw DomainError(std::string(who) + ": fact index " + std::to_string(a) +
                      " outside topic memory of " + std::to_string(fact_count));
}

}  // namespace

void NklmConfig::validate() const {
  if (word_dim < 1 || entity_dim < 1 || position_dim < 1 || hidden_dim < 1)
    throw ConfigError("NklmConfig: all dimensions must be >= 1");
  if (max_positions < 1) throw ConfigError("NklmConfig: max_positions must be >= 1");
  if (layers < 1) throw ConfigError("NklmConfig: layers must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("NklmConfig: dropout must be in [0, 1)");
  if (no_fact && !no_copy)
    throw ConfigError("NklmConfig: no_fact requires no_copy (copying needs a fact)");
}

void RnnlmConfig::validate() const {
  if (word_dim < 1 || hidden_dim < 1) throw ConfigError("RnnlmConfig: dimensions must be >= 1");
  if (layers < 1) throw ConfigError("RnnlmConfig: layers must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("RnnlmConfig: dropout must be in [0, 1)");
}

double step_loss(const AugmentedToken& gold, const StepOutput& out) {
  if (gold.z && gold.a == out.naf_index)
    throw DataError("step_loss: gold copy token assigned to NaF");
  double loss = 0.0;
  const bool z_eff = gold.z && out.gate_active;
  if (z_eff) {
    if (gold.n < 0 || static_cast<std::size_t>(gold.n) >= out.pos_probs.size())
      throw DomainError("step_loss: copy position " + std::to_string(gold.n) +
                        " outside the position distribution");
    loss -= std::log(out.pos_probs[gold.n]);
  } else {
    if (gold.w_id < 0 || static_cast<std::size_t>(gold.w_id) >= out.vocab_probs.size())
      throw DomainError("step_loss: unresolved gold word id");
    loss -= std::log(out.vocab_probs[gold.w_id]);
  }
  if (!out.fact_probs.empty()) {
    if (gold.a < 0 || static_cast<std::size_t>(gold.a) >= out.fact_probs.size())
      throw DomainError("step_loss: gold fact index out of range");
    loss -= std::log(out.fact_probs[gold.a]);
  }
  if (out.gate_active) loss += softplus(gold.z ? -out.gate_pre : out.gate_pre);
  return loss;
}

NklmModel::NklmModel(const NklmConfig& config, const Vocabulary& vocab, const EmbeddingStore& kg)
    : config_(config), vocab_(vocab) {
  config_.validate();
  if (static_cast<int>(kg.dim) != config_.entity_dim)
    throw ConfigError("NklmModel: entity_dim " + std::to_string(config_.entity_dim) +
                      " does not match embedding store dim " + std::to_string(kg.dim));
  Rng rng(config_.seed);
  auto u = [&](std::size_t r, std::size_t c) { return Tensor2::uniform(r, c, -0.05, 0.05, rng); };
  const std::size_t dw = config_.word_dim, da = config_.fact_dim(), h = config_.hidden_dim;

  params_.add("embed.word", u(dw, vocab_.size()));
  params_.add("embed.position", u(config_.position_dim, config_.max_positions));
  params_.add("fact.naf", u(da, 1));
  params_.add("fact.topic_itself", u(da, 1));
  for (int l = 0; l < config_.layers; ++l) {
    const std::size_t in = l == 0 ? da + 2 * dw : h;
    const std::string p = "lstm.l" + std::to_string(l) + ".";
    params_.add(p + "wx", u(4 * h, in));
    params_.add(p + "wh", u(4 * h, h));
    params_.add(p + "b", u(4 * h, 1));
  }
  const std::pair<const char*, std::size_t> heads[] = {
      {"factkey", da},
      {"copy", 1},
      {"voca", dw},
      {"poskey", static_cast<std::size_t>(config_.position_dim)},
  };
  for (const auto& [name, out] : heads) {
    const std::string p = std::string(name) + ".";
    params_.add(p + "w1", u(h, h + da));
    params_.add(p + "b1", u(h, 1));
    params_.add(p + "w2", u(out, h));
    params_.add(p + "b2", u(out, 1));
  }
  params_.add("kg.entity", kg.entities, /*trainable=*/false);
  params_.add("kg.relation", kg.relations, /*trainable=*/false);
}

MlpParams NklmModel::head(const std::string& name) const {
  return {&params_.value(name + ".w1"), &params_.value(name + ".b1"),
          &params_.value(name + ".w2"), &params_.value(name + ".b2")};
}

MlpGrads NklmModel::head_grads(const std::string& name) {
  return {&params_.grad(name + ".w1"), &params_.grad(name + ".b1"),
          &params_.grad(name + ".w2"), &params_.grad(name + ".b2")};
}

LstmStack NklmModel::stack() const {
  LstmStack s;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "lstm.l" + std::to_string(l) + ".";
    s.layers.push_back({&params_.value(p + "wx"), &params_.value(p + "wh"),
                        &params_.value(p + "b")});
  }
  return s;
}

BoundTopic NklmModel::bind(const std::vector<Fact>& facts, int topic_id) const {
  if (!facts_are_canonical(facts))
    throw DataError("bind: topic " + std::to_string(topic_id) +
                    " facts are not in canonical order");
  const Tensor2& ent = params_.value("kg.entity");
  const Tensor2& rel = params_.value("kg.relation");
  const std::size_t da = config_.fact_dim();

  BoundTopic b;
  b.topic_id = topic_id;
  b.memory = Tensor2(da, facts.size());
  for (std::size_t i = 0; i < facts.size(); ++i) {
    const Fact& f = facts[i];
    if (static_cast<int>(f.knowledge_words.size()) > config_.max_positions)
      throw DomainError("bind: fact " + std::to_string(f.fact_id) + " has " +
                        std::to_string(f.knowledge_words.size()) +
                        " knowledge words, above max_positions " +
                        std::to_string(config_.max_positions));
    if (f.is_naf) {
      b.naf_index = static_cast<int>(i);
      b.memory.set_col(i, params_.value("fact.naf").col(0));
      b.col_src.push_back(BoundTopic::ColSrc::naf_param);
    } else if (f.is_topic_itself) {
      b.ti_index = static_cast<int>(i);
      b.memory.set_col(i, params_.value("fact.topic_itself").col(0));
      b.col_src.push_back(BoundTopic::ColSrc::ti_param);
    } else {
      if (f.relation < 0 || static_cast<std::size_t>(f.relation) >= rel.cols())
        throw BuildError("bind: fact " + std::to_string(f.fact_id) +
                         " references missing relation " + std::to_string(f.relation));
      if (f.object < 0 || static_cast<std::size_t>(f.object) >= ent.cols())
        throw BuildError("bind: fact " + std::to_string(f.fact_id) +
                         " references missing entity " + std::to_string(f.object));
      b.memory.set_col(i, concat(rel.col(f.relation), ent.col(f.object)));
      b.col_src.push_back(BoundTopic::ColSrc::frozen);
    }
    b.words.push_back(f.knowledge_words);
  }
  b.context.assign(da, 0.0);
  const double inv = 1.0 / static_cast<double>(facts.size() - 1);
  for (std::size_t i = 0; i < facts.size(); ++i) {
    if (static_cast<int>(i) == b.naf_index) continue;
    const Vec c = b.memory.col(i);
    axpy(inv, c, b.context);
  }
  return b;
}

LstmState NklmModel::initial_state() const {
  return LstmState::zeros(config_.layers, config_.hidden_dim);
}

AugmentedToken NklmModel::bos_token(const BoundTopic& topic) const {
  return {Vocabulary::bos_word(), Vocabulary::kBosId, false, topic.naf_index, 0, topic.topic_id};
}

AugmentedToken NklmModel::eos_token(const BoundTopic& topic) const {
  return {Vocabulary::eos_word(), Vocabulary::kEosId, false, topic.naf_index, 0, topic.topic_id};
}

Vec NklmModel::build_input(const AugmentedToken& prev, const BoundTopic& topic) const {
  check_fact_index(prev.a, topic.fact_count(), "build_input");
  const Tensor2& w = params_.value("embed.word");
  const std::size_t dw = config_.word_dim;
  Vec w_v(dw, 0.0), w_o(dw, 0.0);
  const Vec emb = w.col(vocab_.id_or_unk(prev.w));
  (prev.z ? w_o : w_v) = emb;
  return concat(topic.memory.col(prev.a), w_v, w_o);
}

Vec NklmModel::fact_distribution(const Vec& h, const BoundTopic& topic) const {
  const Vec key = mlp_forward(head("factkey"), concat(h, topic.context));
  return softmax(matvec_t(topic.memory, key));
}

double NklmModel::copy_gate_pre(const Vec& h, const Vec& fact_col) const {
  return mlp_forward(head("copy"), concat(h, fact_col))[0];
}

Vec NklmModel::vocab_distribution(const Vec& h, const Vec& fact_col) const {
  const Vec key = mlp_forward(head("voca"), concat(h, fact_col));
  return softmax(matvec_t(params_.value("embed.word"), key));
}

Vec NklmModel::position_distribution(const Vec& h, const Vec& fact_col, int o_size) const {
  if (o_size < 1)
    throw DomainError("position_distribution: empty object expansion (copy on NaF?)");
  if (o_size > config_.max_positions)
    throw DomainError("position_distribution: o_size " + std::to_string(o_size) +
                      " above max_positions " + std::to_string(config_.max_positions));
  const Vec key = mlp_forward(head("poskey"), concat(h, fact_col));
  const Tensor2& p = params_.value("embed.position");
  Vec logits(o_size);
  for (int n = 0; n < o_size; ++n) logits[n] = dot(key, p.col(n));
  return softmax(logits);
}

Vec NklmModel::advance(const AugmentedToken& prev, LstmState& state,
                       const BoundTopic& topic) const {
  return lstm_step_inplace(stack(), build_input(prev, topic), state);
}

StepOutput NklmModel::teacher_step(const AugmentedToken& prev, const AugmentedToken& gold,
                                   LstmState& state, const BoundTopic& topic) const {
  check_fact_index(gold.a, topic.fact_count(), "teacher_step");
  StepOutput out;
  out.naf_index = topic.naf_index;
  out.h = advance(prev, state, topic);
  out.fact = config_.no_fact ? topic.naf_index : gold.a;
  if (!config_.no_fact) out.fact_probs = fact_distribution(out.h, topic);
  const Vec fact_col = topic.memory.col(out.fact);
  out.gate_active = !(config_.no_copy || config_.no_fact);
  if (out.gate_active) {
    out.gate_pre = copy_gate_pre(out.h, fact_col);
    out.copy_prob = sigmoid(out.gate_pre);
  }
  out.vocab_probs = vocab_distribution(out.h, fact_col);
  if (out.fact != topic.naf_index)
    out.pos_probs = position_distribution(out.h, fact_col,
                                          static_cast<int>(topic.words[out.fact].size()));
  out.word = gold.w;
  return out;
}

StepOutput NklmModel::free_step(const AugmentedToken& prev, LstmState& state,
                                const BoundTopic& topic) const {
  StepOutput out;
  out.naf_index = topic.naf_index;
  out.h = advance(prev, state, topic);
  if (config_.no_fact) {
    out.fact = topic.naf_index;
  } else {
    out.fact_probs = fact_distribution(out.h, topic);
    out.fact = static_cast<int>(argmax(out.fact_probs));
  }
  const Vec fact_col = topic.memory.col(out.fact);
  out.gate_active = !(config_.no_copy || config_.no_fact);
  if (out.gate_active) {
    out.gate_pre = copy_gate_pre(out.h, fact_col);
    out.copy_prob = sigmoid(out.gate_pre);
  }
  bool copy = out.gate_active && out.copy_prob >= 0.5;
  if (copy && out.fact == topic.naf_index) {
    out.copy_conflict = true;  // the gate fired with nothing to copy
    copy = false;
  }
  out.copy = copy;
  out.vocab_probs = vocab_distribution(out.h, fact_col);
  if (out.fact != topic.naf_index)
    out.pos_probs = position_distribution(out.h, fact_col,
                                          static_cast<int>(topic.words[out.fact].size()));
  if (copy) {
    out.position = static_cast<int>(argmax(out.pos_probs));
    out.word = topic.words[out.fact][out.position];
  } else {
    out.word_id = static_cast<int>(argmax(out.vocab_probs));
    out.word = vocab_.word(out.word_id);
  }
  return out;
}

// --- training forward/backward over one unroll window ---

namespace {

struct NklmStepCache {
  const AugmentedToken* prev;
  const AugmentedToken* gold;
  std::vector<LstmLayerCache> lstm;
  std::vector<Vec> masks;
  Vec h;
  int cond = -1;
  bool z_eff = false;
  MlpCache factkey_c, copy_c, voca_c, pos_c;
  Vec fact_key, voca_key, pos_key;
  Vec fact_probs, vocab_probs, pos_probs;
  double gate_pre = 0.0;
};

}  // namespace

double NklmModel::train_window(const std::vector<AugmentedToken>& stream, std::size_t begin,
                               std::size_t end, const BoundTopic& topic, LstmState& state,
                               bool with_grad, Rng* dropout_rng) {
  if (begin >= end || end > stream.size())
    throw DomainError("train_window: bad window [" + std::to_string(begin) + ", " +
                      std::to_string(end) + ")");
  const std::size_t m = topic.fact_count();
  const bool gate_active = !(config_.no_copy || config_.no_fact);
  const AugmentedToken bos = bos_token(topic);
  const LstmStack lstm = stack();
  const Tensor2& w_embed = params_.value("embed.word");
  const Tensor2& p_embed = params_.value("embed.position");

  std::vector<NklmStepCache> steps(end - begin);
  double loss = 0.0;
  for (std::size_t t = begin; t < end; ++t) {
    NklmStepCache& sc = steps[t - begin];
    sc.prev = t == begin ? (begin == 0 ? &bos : &stream[begin - 1]) : &stream[t - 1];
    sc.gold = &stream[t];
    const AugmentedToken& gold = *sc.gold;
    check_fact_index(gold.a, m, "train_window");
    if (gold.z && gold.a == topic.naf_index)
      throw DataError("train_window: gold copy token assigned to NaF");

    const Vec x = build_input(*sc.prev, topic);
    sc.h = lstm_step_inplace(lstm, x, state, with_grad ? config_.dropout : 0.0, dropout_rng,
                             &sc.lstm, &sc.masks);

    if (!config_.no_fact) {
      sc.fact_key = mlp_forward(head("factkey"), concat(sc.h, topic.context), &sc.factkey_c);
      sc.fact_probs = softmax(matvec_t(topic.memory, sc.fact_key));
      loss -= std::log(sc.fact_probs[gold.a]);
    }
    sc.cond = config_.no_fact ? topic.naf_index : gold.a;
    const Vec fact_col = topic.memory.col(sc.cond);
    if (gate_active) {
      sc.gate_pre = mlp_forward(head("copy"), concat(sc.h, fact_col), &sc.copy_c)[0];
      loss += softplus(gold.z ? -sc.gate_pre : sc.gate_pre);
    }
    sc.z_eff = gold.z && gate_active;
    if (sc.z_eff) {
      const int o_size = static_cast<int>(topic.words[sc.cond].size());
      if (gold.n < 0 || gold.n >= o_size)
        throw DataError("train_window: copy position out of range");
      sc.pos_key = mlp_forward(head("poskey"), concat(sc.h, fact_col), &sc.pos_c);
      Vec logits(o_size);
      for (int n = 0; n < o_size; ++n) logits[n] = dot(sc.pos_key, p_embed.col(n));
      sc.pos_probs = softmax(logits);
      loss -= std::log(sc.pos_probs[gold.n]);
    } else {
      if (gold.w_id < 0 || static_cast<std::size_t>(gold.w_id) >= vocab_.size())
        throw DomainError("train_window: unresolved gold word id");
      sc.voca_key = mlp_forward(head("voca"), concat(sc.h, fact_col), &sc.voca_c);
      sc.vocab_probs = softmax(matvec_t(w_embed, sc.voca_key));
      loss -= std::log(sc.vocab_probs[gold.w_id]);
    }
  }
  if (!std::isfinite(loss))
    throw TrainError("train_window: non-finite loss in window starting at " +
                     std::to_string(begin));
  if (!with_grad) return loss;

  // backward
  const std::size_t hdim = config_.hidden_dim;
  const std::size_t da = config_.fact_dim();
  Tensor2 d_memory(da, m);
  Vec d_context(da, 0.0);
  std::vector<Vec> dh(config_.layers, Vec(hdim, 0.0));
  std::vector<Vec> dc(config_.layers, Vec(hdim, 0.0));
  Tensor2& gw_embed = params_.grad("embed.word");
  Tensor2& gp_embed = params_.grad("embed.position");

  std::vector<LstmLayerGrads> lstm_grads;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "lstm.l" + std::to_string(l) + ".";
    lstm_grads.push_back({&params_.grad(p + "wx"), &params_.grad(p + "wh"),
                          &params_.grad(p + "b")});
  }

  for (std::size_t i = steps.size(); i-- > 0;) {
    NklmStepCache& sc = steps[i];
    const AugmentedToken& gold = *sc.gold;
    Vec dh_top(hdim, 0.0);
    Vec d_fact_col(da, 0.0);
    const Vec fact_col = topic.memory.col(sc.cond);

    if (sc.z_eff) {
      Vec dlogits = sc.pos_probs;
      dlogits[gold.n] -= 1.0;
      Vec d_key(sc.pos_key.size(), 0.0);
      for (std::size_t n = 0; n < dlogits.size(); ++n) {
        axpy(dlogits[n], p_embed.col(n), d_key);
        gp_embed.add_col(n, sc.pos_key, dlogits[n]);
      }
      const Vec dx = mlp_backward(head("poskey"), sc.pos_c, d_key, head_grads("poskey"));
      for (std::size_t j = 0; j < hdim; ++j) dh_top[j] += dx[j];
      for (std::size_t j = 0; j < da; ++j) d_fact_col[j] += dx[hdim + j];
    } else {
      Vec dlogits = sc.vocab_probs;
      dlogits[gold.w_id] -= 1.0;
      const Vec d_key = matvec(w_embed, dlogits);
      add_outer(gw_embed, sc.voca_key, dlogits);
      const Vec dx = mlp_backward(head("voca"), sc.voca_c, d_key, head_grads("voca"));
      for (std::size_t j = 0; j < hdim; ++j) dh_top[j] += dx[j];
      for (std::size_t j = 0; j < da; ++j) d_fact_col[j] += dx[hdim + j];
    }
    if (gate_active) {
      const double dpre = sigmoid(sc.gate_pre) - (gold.z ? 1.0 : 0.0);
      const Vec dx = mlp_backward(head("copy"), sc.copy_c, {dpre}, head_grads("copy"));
      for (std::size_t j = 0; j < hdim; ++j) dh_top[j] += dx[j];
      for (std::size_t j = 0; j < da; ++j) d_fact_col[j] += dx[hdim + j];
    }
    if (!config_.no_fact) {
      Vec dscores = sc.fact_probs;
      dscores[gold.a] -= 1.0;
      const Vec d_key = matvec(topic.memory, dscores);
      add_outer(d_memory, sc.fact_key, dscores);
      const Vec dx = mlp_backward(head("factkey"), sc.factkey_c, d_key, head_grads("factkey"));
      for (std::size_t j = 0; j < hdim; ++j) dh_top[j] += dx[j];
      for (std::size_t j = 0; j < da; ++j) d_context[j] += dx[hdim + j];
    }
    d_memory.add_col(sc.cond, d_fact_col);

    // through the LSTM stack at this step
    axpy(1.0, dh_top, dh[config_.layers - 1]);
    std::vector<Vec> dh_prev(config_.layers, Vec(hdim, 0.0));
    std::vector<Vec> dc_prev(config_.layers, Vec(hdim, 0.0));
    Vec dx_layer;
    for (int l = config_.layers - 1; l >= 0; --l) {
      dx_layer = lstm_layer_backward(lstm.layers[l], sc.lstm[l], dh[l], dc[l], lstm_grads[l],
                                     dh_prev[l], dc_prev[l]);
      if (l > 0) {
        const Vec& mask = sc.masks[l];
        for (std::size_t j = 0; j < hdim; ++j)
          dh[l - 1][j] += mask.empty() ? dx_layer[j] : mask[j] * dx_layer[j];
      }
    }
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);

    // input slots: fact embedding of prev a, then the active word slot
    const AugmentedToken& prev = *sc.prev;
    Vec d_slot(da);
    std::copy(dx_layer.begin(), dx_layer.begin() + da, d_slot.begin());
    d_memory.add_col(prev.a, d_slot);
    const std::size_t dw = config_.word_dim;
    const std::size_t offset = prev.z ? da + dw : da;
    Vec d_word(dw);
    std::copy(dx_layer.begin() + offset, dx_layer.begin() + offset + dw, d_word.begin());
    gw_embed.add_col(vocab_.id_or_unk(prev.w), d_word);
  }

  // e_k is the mean of the non-NaF memory columns
  const double inv = 1.0 / static_cast<double>(m - 1);
  for (std::size_t a = 0; a < m; ++a)
    if (static_cast<int>(a) != topic.naf_index) d_memory.add_col(a, d_context, inv);
  // route memory columns to their parameter sources; frozen columns stop here
  for (std::size_t a = 0; a < m; ++a) {
    switch (topic.col_src[a]) {
      case BoundTopic::ColSrc::naf_param:
        params_.grad("fact.naf").add_col(0, d_memory.col(a));
        break;
      case BoundTopic::ColSrc::ti_param:
        params_.grad("fact.topic_itself").add_col(0, d_memory.col(a));
        break;
      case BoundTopic::ColSrc::frozen: break;
    }
  }
  return loss;
}

// --- RNNLM baseline ---

RnnlmModel::RnnlmModel(const RnnlmConfig& config, const Vocabulary& vocab)
    : config_(config), vocab_(vocab) {
  config_.validate();
  Rng rng(config_.seed);
  auto u = [&](std::size_t r, std::size_t c) { return Tensor2::uniform(r, c, -0.05, 0.05, rng); };
  const std::size_t dw = config_.word_dim, h = config_.hidden_dim;
  params_.add("embed.word", u(dw, vocab_.size()));
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "lstm.l" + std::to_string(l) + ".";
    params_.add(p + "wx", u(4 * h, l == 0 ? dw : h));
    params_.add(p + "wh", u(4 * h, h));
    params_.add(p + "b", u(4 * h, 1));
  }
  params_.add("voca.w1", u(h, h));
  params_.add("voca.b1", u(h, 1));
  params_.add("voca.w2", u(dw, h));
  params_.add("voca.b2", u(dw, 1));
}

LstmState RnnlmModel::initial_state() const {
  return LstmState::zeros(config_.layers, config_.hidden_dim);
}

Vec RnnlmModel::step(int prev_word_id, LstmState& state) const {
  if (prev_word_id < 0 || static_cast<std::size_t>(prev_word_id) >= vocab_.size())
    throw DomainError("RnnlmModel::step: word id out of range");
  LstmStack s;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "lstm.l" + std::to_string(l) + ".";
    s.layers.push_back({&params_.value(p + "wx"), &params_.value(p + "wh"),
                        &params_.value(p + "b")});
  }
  const Vec h = lstm_step_inplace(s, params_.value("embed.word").col(prev_word_id), state);
  const MlpParams voca{&params_.value("voca.w1"), &params_.value("voca.b1"),
                       &params_.value("voca.w2"), &params_.value("voca.b2")};
  const Vec key = mlp_forward(voca, h);
  return softmax(matvec_t(params_.value("embed.word"), key));
}

namespace {

struct RnnlmStepCache {
  int prev = -1, gold = -1;
  std::vector<LstmLayerCache> lstm;
  std::vector<Vec> masks;
  Vec h, key, probs;
  MlpCache voca_c;
};

}  // namespace

double RnnlmModel::train_window(const std::vector<int>& word_ids, std::size_t begin,
                                std::size_t end, LstmState& state, bool with_grad,
                                Rng* dropout_rng) {
  if (begin >= end || end > word_ids.size())
    throw DomainError("train_window: bad window [" + std::to_string(begin) + ", " +
                      std::to_string(end) + ")");
  LstmStack s;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "lstm.l" + std::to_string(l) + ".";
    s.layers.push_back({&params_.value(p + "wx"), &params_.value(p + "wh"),
                        &params_.value(p + "b")});
  }
  const MlpParams voca{&params_.value("voca.w1"), &params_.value("voca.b1"),
                       &params_.value("voca.w2"), &params_.value("voca.b2")};
  const Tensor2& w_embed = params_.value("embed.word");

  std::vector<RnnlmStepCache> steps(end - begin);
  double loss = 0.0;
  for (std::size_t t = begin; t < end; ++t) {
    RnnlmStepCache& sc = steps[t - begin];
    sc.prev = t == begin ? (begin == 0 ? Vocabulary::kBosId : word_ids[begin - 1])
                         : word_ids[t - 1];
    sc.gold = word_ids[t];
    if (sc.gold < 0 || static_cast<std::size_t>(sc.gold) >= vocab_.size())
      throw DomainError("train_window: word id out of range");
    sc.h = lstm_step_inplace(s, w_embed.col(sc.prev), state,
                             with_grad ? config_.dropout : 0.0, dropout_rng, &sc.lstm,
                             &sc.masks);
    sc.key = mlp_forward(voca, sc.h, &sc.voca_c);
    sc.probs = softmax(matvec_t(w_embed, sc.key));
    loss -= std::log(sc.probs[sc.gold]);
  }
  if (!std::isfinite(loss))
    throw TrainError("train_window: non-finite loss in window starting at " +
                     std::to_string(begin));
  if (!with_grad) return loss;

  const std::size_t hdim = config_.hidden_dim;
  std::vector<Vec> dh(config_.layers, Vec(hdim, 0.0));
  std::vector<Vec> dc(config_.layers, Vec(hdim, 0.0));
  Tensor2& gw_embed = params_.grad("embed.word");
  const MlpGrads voca_g{&params_.grad("voca.w1"), &params_.grad("voca.b1"),
                        &params_.grad("voca.w2"), &params_.grad("voca.b2")};
  std::vector<LstmLayerGrads> lstm_grads;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "lstm.l" + std::to_string(l) + ".";
    lstm_grads.push_back({&params_.grad(p + "wx"), &params_.grad(p + "wh"),
                          &params_.grad(p + "b")});
  }

  for (std::size_t i = steps.size(); i-- > 0;) {
    RnnlmStepCache& sc = steps[i];
    Vec dlogits = sc.probs;
    dlogits[sc.gold] -= 1.0;
    const Vec d_key = matvec(w_embed, dlogits);
    add_outer(gw_embed, sc.key, dlogits);
    Vec dh_top = mlp_backward(voca, sc.voca_c, d_key, voca_g);
    axpy(1.0, dh_top, dh[config_.layers - 1]);

    std::vector<Vec> dh_prev(config_.layers, Vec(hdim, 0.0));
    std::vector<Vec> dc_prev(config_.layers, Vec(hdim, 0.0));
    Vec dx_layer;
    for (int l = config_.layers - 1; l >= 0; --l) {
      dx_layer = lstm_layer_backward(s.layers[l], sc.lstm[l], dh[l], dc[l], lstm_grads[l],
                                     dh_prev[l], dc_prev[l]);
      if (l > 0) {
        const Vec& mask = sc.masks[l];
        for (std::size_t j = 0; j < hdim; ++j)
          dh[l - 1][j] += mask.empty() ? dx_layer[j] : mask[j] * dx_layer[j];
      }
    }
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
    gw_embed.add_col(sc.prev, dx_layer);
  }
  return loss;
}

// --- decoding ---

namespace {

StepOutput stochastic_step(const NklmModel& model, const AugmentedToken& prev, LstmState& state,
                           const BoundTopic& topic, Rng& rng) {
  const NklmConfig& cfg = model.config();
  StepOutput out;
  out.naf_index = topic.naf_index;
  out.h = model.advance(prev, state, topic);
  if (cfg.no_fact) {
    out.fact = topic.naf_index;
  } else {
    out.fact_probs = model.fact_distribution(out.h, topic);
    out.fact = static_cast<int>(sample_index(out.fact_probs, rng));
  }
  const Vec fact_col = topic.memory.col(out.fact);
  out.gate_active = !(cfg.no_copy || cfg.no_fact);
  if (out.gate_active) {
    out.gate_pre = model.copy_gate_pre(out.h, fact_col);
    out.copy_prob = sigmoid(out.gate_pre);
  }
  bool copy = out.gate_active && rng.next_double() < out.copy_prob;
  if (copy && out.fact == topic.naf_index) {
    out.copy_conflict = true;
    copy = false;
  }
  out.copy = copy;
  out.vocab_probs = model.vocab_distribution(out.h, fact_col);
  if (out.fact != topic.naf_index)
    out.pos_probs = model.position_distribution(
        out.h, fact_col, static_cast<int>(topic.words[out.fact].size()));
  if (copy) {
    out.position = static_cast<int>(sample_index(out.pos_probs, rng));
    out.word = topic.words[out.fact][out.position];
  } else {
    out.word_id = static_cast<int>(sample_index(out.vocab_probs, rng));
    out.word = model.vocab().word(out.word_id);
  }
  return out;
}

}  // namespace

SampleResult sample_description(const NklmModel& model, const TopicDocument& doc,
                                const std::vector<std::string>& warmup, int max_len,
                                DecodeMode mode, std::uint64_t seed, const AliasTable& aliases) {
  if (warmup.empty()) throw DomainError("sample_description: warmup must not be empty");
  if (max_len < 0) throw DomainError("sample_description: max_len must be >= 0");
  const BoundTopic topic = model.bind(doc);

  TopicDocument warm_doc;
  warm_doc.topic_id = doc.topic_id;
  warm_doc.tokens = warmup;
  warm_doc.facts = doc.facts;
  const std::vector<AugmentedToken> warm = align(warm_doc, aliases);

  LstmState state = model.initial_state();
  AugmentedToken prev = model.bos_token(topic);
  for (const AugmentedToken& tok : warm) {
    model.advance(prev, state, topic);
    prev = tok;
  }

  SampleResult result;
  Rng rng(seed);
  for (int t = 0; t < max_len; ++t) {
    const StepOutput out = mode == DecodeMode::greedy
                               ? model.free_step(prev, state, topic)
                               : stochastic_step(model, prev, state, topic, rng);
    if (out.word == Vocabulary::eos_word()) break;
    result.raw.push_back(out.word);
    result.rendered.push_back(out.copy ? "[" + out.word + "]" : out.word);
    StepTrace row;
    row.t = t;
    row.token = out.word;
    row.source = out.copy ? "copy" : "vocab";
    row.copy_prob = out.copy_prob;
    row.fact_probs = out.fact_probs;
    result.trace.push_back(std::move(row));
    prev = {out.word, out.word_id, out.copy, out.fact, out.copy ? out.position : 0,
            topic.topic_id};
  }
  return result;
}

}  // namespace nklm
