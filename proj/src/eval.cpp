#include "nklm/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "nklm/errors.hpp"

namespace nklm {
namespace {

std::size_t argmax_index(const Vec& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

double TokenScore::p() const { return std::exp(log_p); }

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::size_t upp_divisor(const std::set<std::string>& corpus_words, const Vocabulary& vocab) {
  std::size_t n = 0;
  for (const auto& w : corpus_words)
    if (!vocab.contains(w)) ++n;
  return n;
}

std::set<std::string> corpus_word_set(const Corpus& corpus) {
  std::set<std::string> words;
  for (const auto& topic : corpus)
    for (const auto& w : topic.doc.tokens) words.insert(fold_word(w));
  return words;
}

std::map<int, std::size_t> topic_object_word_counts(const Corpus& corpus) {
  std::map<int, std::size_t> counts;
  for (const auto& topic : corpus) {
    std::set<std::string> words;
    for (const auto& f : topic.doc.facts)
      for (const auto& w : knowledge_words_of(f)) words.insert(fold_word(w));
    counts[topic.doc.topic_id] = words.size();
  }
  return counts;
}

EvalContext make_eval_context(const Corpus& corpus, const Vocabulary& vocab) {
  return {upp_divisor(corpus_word_set(corpus), vocab), topic_object_word_counts(corpus)};
}

std::vector<TokenScore> score_tokens(const NklmModel& model, const Corpus& topics,
                                     bool word_term_only) {
  std::vector<TokenScore> scores;
  const Vocabulary& vocab = model.vocab();
  for (const auto& topic : topics) {
    if (topic.doc.facts.empty())
      throw EvalError("score_tokens: topic " + std::to_string(topic.doc.topic_id) +
                      " has no facts");
    const BoundTopic bt = model.bind(topic.doc);
    std::vector<AugmentedToken> stream = topic.alignment;
    for (auto& tok : stream) tok.w_id = vocab.id_or_unk(tok.w);
    stream.push_back(model.eos_token(bt));

    LstmState state = model.initial_state();
    AugmentedToken prev = model.bos_token(bt);
    for (std::size_t t = 0; t < stream.size(); ++t) {
      const AugmentedToken& gold = stream[t];
      const StepOutput out = model.teacher_step(prev, gold, state, bt);
      const bool z_eff = gold.z && out.gate_active;
      TokenScore s;
      s.topic_id = topic.doc.topic_id;
      s.t = static_cast<int>(t);
      s.word = gold.w;
      if (word_term_only)
        s.log_p = z_eff ? std::log(out.pos_probs[static_cast<std::size_t>(gold.n)])
                        : std::log(out.vocab_probs[static_cast<std::size_t>(gold.w_id)]);
      else
        s.log_p = -step_loss(gold, out);
      s.unk_target = !z_eff && gold.w_id == Vocabulary::kUnkId;
      s.predicted_unk = argmax_index(out.vocab_probs) == Vocabulary::kUnkId;
      s.source = z_eff ? "copy" : "vocab";
      scores.push_back(std::move(s));
      prev = gold;
    }
  }
  return scores;
}

std::vector<TokenScore> score_tokens(const RnnlmModel& model, const Corpus& topics) {
  std::vector<TokenScore> scores;
  const Vocabulary& vocab = model.vocab();
  for (const auto& topic : topics) {
    std::vector<std::pair<std::string, int>> stream;
    for (const auto& w : topic.doc.tokens) stream.emplace_back(w, vocab.id_or_unk(w));
    stream.emplace_back(vocab.word(Vocabulary::kEosId), Vocabulary::kEosId);

    LstmState state = model.initial_state();
    int prev_id = Vocabulary::kBosId;
    for (std::size_t t = 0; t < stream.size(); ++t) {
      const auto& [word, w_id] = stream[t];
      const Vec probs = model.step(prev_id, state);
      TokenScore s;
      s.topic_id = topic.doc.topic_id;
      s.t = static_cast<int>(t);
      s.word = word;
      s.log_p = std::log(probs[static_cast<std::size_t>(w_id)]);
      s.unk_target = w_id == Vocabulary::kUnkId;
      s.predicted_unk = argmax_index(probs) == Vocabulary::kUnkId;
      s.source = "vocab";
      scores.push_back(std::move(s));
      prev_id = w_id;
    }
  }
  return scores;
}

MetricReport compute_metrics(const std::vector<TokenScore>& scores, std::size_t upp_div,
                             const std::map<int, std::size_t>& topic_object_words) {
  if (scores.empty()) throw MetricError("compute_metrics: no tokens scored");
  long double sum = 0.0L, sum_upp = 0.0L, sum_uppf = 0.0L;
  MetricReport r;
  r.tokens = scores.size();
  r.upp_divisor = upp_div;
  for (const auto& s : scores) {
    sum += s.log_p;
    long double lp_upp = s.log_p, lp_uppf = s.log_p;
    if (s.unk_target) {
      if (upp_div == 0)
        throw MetricError("compute_metrics: UPP divisor is zero but token '" + s.word +
                          "' is an unknown target");
      lp_upp -= std::log(static_cast<long double>(upp_div));
      const auto it = topic_object_words.find(s.topic_id);
      if (it == topic_object_words.end() || it->second == 0)
        throw MetricError("compute_metrics: topic " + std::to_string(s.topic_id) +
                          " has no knowledge words but produced an unknown target");
      lp_uppf -= std::log(static_cast<long double>(it->second));
    }
    sum_upp += lp_upp;
    sum_uppf += lp_uppf;
    if (s.predicted_unk) ++r.unk_count;
  }
  const long double n = static_cast<long double>(r.tokens);
  r.ppl = static_cast<double>(std::exp(-sum / n));
  r.upp = static_cast<double>(std::exp(-sum_upp / n));
  r.upp_f = static_cast<double>(std::exp(-sum_uppf / n));
  return r;
}

MetricReport compute_metrics(const std::vector<TokenScore>& scores, const EvalContext& ctx) {
  return compute_metrics(scores, ctx.upp_divisor, ctx.object_words);
}

std::vector<Fact> facts_with_edited_object(const std::vector<Fact>& facts, int fact_id,
                                           int new_object, std::vector<std::string> new_words) {
  std::vector<Fact> out = facts;
  for (auto& f : out) {
    if (f.fact_id != fact_id) continue;
    if (f.is_naf || f.is_topic_itself)
      throw DomainError("facts_with_edited_object: special facts cannot be edited");
    f = make_fact(f.fact_id, f.subject, f.relation, new_object, std::move(new_words), false,
                  false, f.is_anchor);
    return out;
  }
  throw DomainError("facts_with_edited_object: no fact with id " + std::to_string(fact_id));
}

EditProbeResult knowledge_edit_probe(const NklmModel& model, const TopicDocument& doc, int fact_id,
                                     int new_object, const std::vector<std::string>& new_words,
                                     const std::vector<std::string>& warmup, int max_len) {
  for (const auto& f : doc.facts)
    if (f.fact_id == fact_id && f.is_naf)
      throw DomainError("knowledge_edit_probe: cannot edit NaF");

  EditProbeResult r;
  r.topic_id = doc.topic_id;
  const std::string fp_before = param_fingerprint(model.params());

  const SampleResult before = sample_description(model, doc, warmup, max_len);
  TopicDocument edited = doc;
  edited.facts = facts_with_edited_object(doc.facts, fact_id, new_object, new_words);
  const SampleResult after = sample_description(model, edited, warmup, max_len);

  r.before = before.raw;
  r.after = after.raw;
  for (std::size_t i = 0; i < std::max(r.before.size(), r.after.size()); ++i) {
    const bool differs = i >= r.before.size() || i >= r.after.size() || r.before[i] != r.after[i];
    if (differs) r.changed_positions.push_back(i);
  }
  r.changed = !r.changed_positions.empty();

  std::set<std::string> targets;
  for (const auto& w : new_words) targets.insert(fold_word(w));
  for (std::size_t i = 0; i < after.raw.size(); ++i)
    if (after.trace[i].source == "copy" && targets.count(fold_word(after.raw[i])))
      r.new_words_copied = true;

  r.params_unchanged = fp_before == param_fingerprint(model.params());
  return r;
}

std::vector<std::string> trace_csvs(const NklmModel& model, const AlignedTopic& topic) {
  const BoundTopic bt = model.bind(topic.doc);
  std::vector<AugmentedToken> stream = topic.alignment;
  for (auto& tok : stream) tok.w_id = model.vocab().id_or_unk(tok.w);

  std::string header = "t,token,source,copy_prob";
  if (!model.config().no_fact)
    for (std::size_t a = 0; a < bt.fact_count(); ++a) header += ",fact_" + std::to_string(a);
  header += "\n";

  std::vector<std::string> csvs;
  std::string body;
  LstmState state = model.initial_state();
  AugmentedToken prev = model.bos_token(bt);
  for (std::size_t t = 0; t < stream.size(); ++t) {
    const AugmentedToken& gold = stream[t];
    const StepOutput out = model.teacher_step(prev, gold, state, bt);
    body += std::to_string(t) + ',' + csv_field(gold.w) + ',' + (gold.z ? "copy" : "vocab") + ',' +
            format_double(out.copy_prob);
    for (double p : out.fact_probs) body += ',' + format_double(p);
    body += '\n';
    if (gold.w == "." || gold.w == "!" || gold.w == "?") {
      csvs.push_back(header + body);
      body.clear();
    }
    prev = gold;
  }
  if (!body.empty()) csvs.push_back(header + body);
  return csvs;
}

}  // namespace nklm
