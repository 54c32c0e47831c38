#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nklm/corpus.hpp"
#include "nklm/model.hpp"

namespace nklm {

// Score of one teacher-forced token (the per-topic EOS target included).
struct TokenScore {
  int topic_id = -1;
  int t = 0;                 // position in the topic's augmented stream
  std::string word;          // gold word
  double log_p = 0.0;        // log of the scored (joint) probability
  bool unk_target = false;   // gold word OOV and scored on the vocabulary path
  bool predicted_unk = false;  // argmax of the vocabulary head is UNK
  std::string source;        // "copy" or "vocab"
  double p() const;
};

struct MetricReport {
  double ppl = 0.0;
  double upp = 0.0;
  double upp_f = 0.0;
  std::size_t unk_count = 0;
  std::size_t tokens = 0;
  std::size_t upp_divisor = 0;  // |V_total \ V_voca| used for UPP
};

// Corpus-level constants the metrics need: the UPP divisor and the per-topic
// distinct knowledge-word counts |O_{F_k}| for UPP-fact.
struct EvalContext {
  std::size_t upp_divisor = 0;
  std::map<int, std::size_t> object_words;  // topic_id -> |O_{F_k}|
};

// Unique folded words across every document that are missing from the
// model vocabulary.
std::size_t upp_divisor(const std::set<std::string>& corpus_words, const Vocabulary& vocab);
std::set<std::string> corpus_word_set(const Corpus& corpus);
std::map<int, std::size_t> topic_object_word_counts(const Corpus& corpus);
EvalContext make_eval_context(const Corpus& corpus, const Vocabulary& vocab);

// Teacher-forced joint scoring with gold augmentation. Each topic is scored
// as its alignment followed by EOS, starting from BOS. `word_term_only`
// drops the fact/gate factors for sensitivity analysis.
std::vector<TokenScore> score_tokens(const NklmModel& model, const Corpus& topics,
                                     bool word_term_only = false);
std::vector<TokenScore> score_tokens(const RnnlmModel& model, const Corpus& topics);

// PPL, UPP, UPP-fact and the UNK-prediction count. Throws MetricError when a
// divisor needed by a penalized token is missing or zero.
MetricReport compute_metrics(const std::vector<TokenScore>& scores, std::size_t upp_div,
                             const std::map<int, std::size_t>& topic_object_words);
MetricReport compute_metrics(const std::vector<TokenScore>& scores, const EvalContext& ctx);

// Copy of `facts` with fact `fact_id` pointing at a new object entity with
// new surface words. Throws DomainError if the fact is missing or special
// (NaF, Topic_Itself).
std::vector<Fact> facts_with_edited_object(const std::vector<Fact>& facts, int fact_id,
                                           int new_object, std::vector<std::string> new_words);

struct EditProbeResult {
  int topic_id = -1;
  std::vector<std::string> before, after;  // raw decoded tokens
  std::vector<std::size_t> changed_positions;
  bool changed = false;
  bool new_words_copied = false;  // an after-decode copy token names the new object
  bool params_unchanged = false;
};

// Swaps one fact's object, redecodes from the same warmup, and reports the
// diff. Never updates a parameter; the fingerprint check is part of the
// result. Throws DomainError when the edit targets NaF.
EditProbeResult knowledge_edit_probe(const NklmModel& model, const TopicDocument& doc, int fact_id,
                                     int new_object, const std::vector<std::string>& new_words,
                                     const std::vector<std::string>& warmup, int max_len);

// One CSV per sentence, teacher-forced over the topic's alignment. Header:
// t,token,source,copy_prob,fact_0,...,fact_{m-1}.
std::vector<std::string> trace_csvs(const NklmModel& model, const AlignedTopic& topic);

// Deterministic shortest-exact decimal for doubles (shared by CSV writers).
std::string format_double(double v);

}  // namespace nklm
