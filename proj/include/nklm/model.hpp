#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nklm/corpus.hpp"
#include "nklm/knowledge.hpp"
#include "nklm/layers.hpp"
#include "nklm/param_store.hpp"
#include "nklm/tensor.hpp"

namespace nklm {

struct NklmConfig {
  int word_dim = 32;      // D_w
  int entity_dim = 16;    // D_e; a fact embedding is [relation; object], 2*D_e wide
  int position_dim = 8;   // D_o
  int max_positions = 16; // longest supported object expansion
  int hidden_dim = 64;    // LSTM width; every head MLP uses the same hidden width
  int layers = 2;
  double dropout = 0.0;   // on inputs of LSTM layers > 0, training only
  bool no_copy = false;   // gate pinned to 0; copy supervision dropped
  bool no_fact = false;   // fact head bypassed, conditioning fact pinned to NaF
  std::uint64_t seed = 1;

  int fact_dim() const { return 2 * entity_dim; }
  void validate() const;  // throws ConfigError
};

// A topic's knowledge bound to the model's parameters: the fact-embedding
// memory (one column per fact, specials reading the trainable NaF /
// Topic_Itself vectors live) plus everything a decode step needs to know
// about the facts. Rebind after any parameter update or fact edit.
struct BoundTopic {
  int topic_id = -1;
  int naf_index = -1;
  int ti_index = -1;
  enum class ColSrc { frozen, naf_param, ti_param };
  std::vector<ColSrc> col_src;
  std::vector<std::vector<std::string>> words;  // per fact, empty for NaF
  Tensor2 memory;   // fact_dim x fact_count
  Vec context;      // e_k: mean of the non-NaF columns
  std::size_t fact_count() const { return col_src.size(); }
};

// Everything one step computes; distributions are conditioned on `fact`
// (gold during teacher forcing, the model's own choice during decoding).
struct StepOutput {
  Vec h;              // top-layer hidden state
  Vec fact_probs;     // over the topic's facts; empty under no_fact
  int fact = -1;      // conditioning fact index
  int naf_index = -1;
  double gate_pre = 0.0;   // f_copy output; copy_prob = sigmoid(gate_pre)
  double copy_prob = 0.0;  // 0 exactly when the gate is inactive
  bool gate_active = true; // false under no_copy / no_fact
  Vec vocab_probs;    // over V
  Vec pos_probs;      // over 0..|O_fact|-1; empty when fact = NaF
  bool copy = false;  // source decision: copy iff copy_prob >= 0.5 (decode)
  bool copy_conflict = false;  // gate fired on NaF -> vocabulary fallback
  int word_id = -1;   // decoded vocabulary word (source = vocabulary)
  int position = -1;  // decoded copy position (source = copy)
  std::string word;   // decoded surface word
};

struct StepTrace {
  int t = 0;
  std::string token;
  std::string source;  // "copy" or "vocab"
  double copy_prob = 0.0;
  Vec fact_probs;
};

// -[log P(w | a, z, h) + log P(a | h) + log P(z | h)] for one gold token.
// The word term reads the position softmax at n when the (gate-effective)
// gold z is 1, the vocabulary softmax at w_id otherwise; inactive heads
// contribute zero. Throws DataError on gold z=1 with a=NaF; DomainError on an
// unresolved w_id.
double step_loss(const AugmentedToken& gold, const StepOutput& out);

class NklmModel {
 public:
  NklmModel(const NklmConfig& config, const Vocabulary& vocab, const EmbeddingStore& kg);

  const NklmConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  BoundTopic bind(const std::vector<Fact>& facts, int topic_id) const;
  BoundTopic bind(const TopicDocument& doc) const { return bind(doc.facts, doc.topic_id); }

  LstmState initial_state() const;
  // Virtual previous token at a description start / gold target closing it.
  AugmentedToken bos_token(const BoundTopic& topic) const;
  AugmentedToken eos_token(const BoundTopic& topic) const;

  // x_t = [fact embedding of prev a ; generated-word slot ; copied-word slot],
  // the slot not selected by prev z zeroed; OOV words read the UNK embedding.
  Vec build_input(const AugmentedToken& prev, const BoundTopic& topic) const;

  // Head primitives over a hidden state (forward only).
  Vec fact_distribution(const Vec& h, const BoundTopic& topic) const;
  double copy_gate_pre(const Vec& h, const Vec& fact_col) const;
  Vec vocab_distribution(const Vec& h, const Vec& fact_col) const;
  // Length o_size; softmax restricted to the first o_size position columns.
  Vec position_distribution(const Vec& h, const Vec& fact_col, int o_size) const;

  // Advance the LSTM one step (no dropout) and return the top hidden state.
  Vec advance(const AugmentedToken& prev, LstmState& state, const BoundTopic& topic) const;

  // Teacher-forced step: distributions conditioned on the gold fact.
  // pos_probs is filled whenever the gold fact is not NaF.
  StepOutput teacher_step(const AugmentedToken& prev, const AugmentedToken& gold,
                          LstmState& state, const BoundTopic& topic) const;
  // Hard-decision decode step: argmax fact, thresholded gate, argmax word or
  // position; a gate firing on NaF falls back to the vocabulary source.
  StepOutput free_step(const AugmentedToken& prev, LstmState& state,
                       const BoundTopic& topic) const;

  // Teacher-forced loss over stream[begin, end); prev token stream[begin-1]
  // or BOS. Accumulates parameter gradients when with_grad; carries `state`
  // across calls (truncated backpropagation). Returns the summed loss.
  double train_window(const std::vector<AugmentedToken>& stream, std::size_t begin,
                      std::size_t end, const BoundTopic& topic, LstmState& state,
                      bool with_grad, Rng* dropout_rng = nullptr);

 private:
  struct HeadRefs;  // named tensors resolved against params_
  MlpParams head(const std::string& name) const;
  MlpGrads head_grads(const std::string& name);
  LstmStack stack() const;

  NklmConfig config_;
  Vocabulary vocab_;
  ParamStore params_;
};

// Vocabulary-only LSTM baseline sharing the training loop's conventions.
struct RnnlmConfig {
  int word_dim = 32;
  int hidden_dim = 64;
  int layers = 2;
  double dropout = 0.0;
  std::uint64_t seed = 1;
  void validate() const;
};

class RnnlmModel {
 public:
  RnnlmModel(const RnnlmConfig& config, const Vocabulary& vocab);

  const RnnlmConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  LstmState initial_state() const;
  // Word distribution after consuming prev_word_id; mutates state.
  Vec step(int prev_word_id, LstmState& state) const;
  double train_window(const std::vector<int>& word_ids, std::size_t begin, std::size_t end,
                      LstmState& state, bool with_grad, Rng* dropout_rng = nullptr);

 private:
  RnnlmConfig config_;
  Vocabulary vocab_;
  ParamStore params_;
};

// --- decoding ---

enum class DecodeMode { greedy, stochastic };

struct SampleResult {
  std::vector<std::string> rendered;  // continuation tokens, copies as [word]
  std::vector<std::string> raw;       // same tokens without markers
  std::vector<StepTrace> trace;       // one row per emitted token
};

// Feeds the warmup (aligned against the topic for its augmentation), then
// decodes up to max_len tokens, stopping after emitting EOS.
SampleResult sample_description(const NklmModel& model, const TopicDocument& doc,
                                const std::vector<std::string>& warmup, int max_len,
                                DecodeMode mode = DecodeMode::greedy, std::uint64_t seed = 1,
                                const AliasTable& aliases = {});

}  // namespace nklm
