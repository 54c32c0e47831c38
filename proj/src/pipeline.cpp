#include "nklm/pipeline.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nklm/corpus.hpp"
#include "nklm/digest.hpp"
#include "nklm/errors.hpp"
#include "nklm/eval.hpp"
#include "nklm/kg_embed.hpp"
#include "nklm/model.hpp"
#include "nklm/train.hpp"

namespace nklm {

using json = nlohmann::json;

namespace {

// ---- settings ---------------------------------------------------------------

template <typename T>
void read_key(const json& j, const char* key, T& into, const std::string& origin) {
  try {
    into = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config (" + origin + "): bad value for '" + key + "': " + e.what());
  }
}

void apply_settings(Settings& s, const json& j, const std::string& origin) {
  if (!j.is_object()) throw ConfigError("config (" + origin + "): expected a JSON object");
  for (const auto& item : j.items()) {
    const std::string& k = item.key();
    if (k == "model") read_key(j, "model", s.model, origin);
    else if (k == "word_dim") read_key(j, "word_dim", s.word_dim, origin);
    else if (k == "entity_dim") read_key(j, "entity_dim", s.entity_dim, origin);
    else if (k == "position_dim") read_key(j, "position_dim", s.position_dim, origin);
    else if (k == "max_positions") read_key(j, "max_positions", s.max_positions, origin);
    else if (k == "hidden_dim") read_key(j, "hidden_dim", s.hidden_dim, origin);
    else if (k == "layers") read_key(j, "layers", s.layers, origin);
    else if (k == "dropout") read_key(j, "dropout", s.dropout, origin);
    else if (k == "unroll") read_key(j, "unroll", s.unroll, origin);
    else if (k == "batch") read_key(j, "batch", s.batch, origin);
    else if (k == "lr0") read_key(j, "lr0", s.lr0, origin);
    else if (k == "decay") read_key(j, "decay", s.decay, origin);
    else if (k == "epochs") read_key(j, "epochs", s.epochs, origin);
    else if (k == "clip") read_key(j, "clip", s.clip, origin);
    else if (k == "ablation") read_key(j, "ablation", s.ablation, origin);
    else if (k == "seed") read_key(j, "seed", s.seed, origin);
    else if (k == "vocab_size") read_key(j, "vocab_size", s.vocab_size, origin);
    else if (k == "topics") read_key(j, "topics", s.topics, origin);
    else if (k == "min_facts") read_key(j, "min_facts", s.min_facts, origin);
    else if (k == "max_facts") read_key(j, "max_facts", s.max_facts, origin);
    else if (k == "min_sentences") read_key(j, "min_sentences", s.min_sentences, origin);
    else if (k == "max_sentences") read_key(j, "max_sentences", s.max_sentences, origin);
    else if (k == "anchor_prob") read_key(j, "anchor_prob", s.anchor_prob, origin);
    else if (k == "kg_dim") read_key(j, "kg_dim", s.kg_dim, origin);
    else if (k == "kg_epochs") read_key(j, "kg_epochs", s.kg_epochs, origin);
    else if (k == "kg_margin") read_key(j, "kg_margin", s.kg_margin, origin);
    else if (k == "kg_lr") read_key(j, "kg_lr", s.kg_lr, origin);
    else if (k == "embedding_mode") read_key(j, "embedding_mode", s.embedding_mode, origin);
    else if (k == "split") read_key(j, "split", s.split, origin);
    else if (k == "word_term_only") read_key(j, "word_term_only", s.word_term_only, origin);
    else if (k == "decode") read_key(j, "decode", s.decode, origin);
    else if (k == "max_len") read_key(j, "max_len", s.max_len, origin);
    else if (k == "topic") read_key(j, "topic", s.topic, origin);
    else if (k == "fact") read_key(j, "fact", s.fact, origin);
    else if (k == "object_entity") read_key(j, "object_entity", s.object_entity, origin);
    else if (k == "object_words") read_key(j, "object_words", s.object_words, origin);
    else if (k == "warmup") read_key(j, "warmup", s.warmup, origin);
    else throw ConfigError("config (" + origin + "): unknown key '" + k + "'");
  }
}

json settings_json(const Settings& s) {
  return json{{"model", s.model},
              {"word_dim", s.word_dim},
              {"entity_dim", s.entity_dim},
              {"position_dim", s.position_dim},
              {"max_positions", s.max_positions},
              {"hidden_dim", s.hidden_dim},
              {"layers", s.layers},
              {"dropout", s.dropout},
              {"unroll", s.unroll},
              {"batch", s.batch},
              {"lr0", s.lr0},
              {"decay", s.decay},
              {"epochs", s.epochs},
              {"clip", s.clip},
              {"ablation", s.ablation},
              {"seed", s.seed},
              {"vocab_size", s.vocab_size},
              {"topics", s.topics},
              {"min_facts", s.min_facts},
              {"max_facts", s.max_facts},
              {"min_sentences", s.min_sentences},
              {"max_sentences", s.max_sentences},
              {"anchor_prob", s.anchor_prob},
              {"kg_dim", s.kg_dim},
              {"kg_epochs", s.kg_epochs},
              {"kg_margin", s.kg_margin},
              {"kg_lr", s.kg_lr},
              {"embedding_mode", s.embedding_mode},
              {"split", s.split},
              {"word_term_only", s.word_term_only},
              {"decode", s.decode},
              {"max_len", s.max_len},
              {"topic", s.topic},
              {"fact", s.fact},
              {"object_entity", s.object_entity},
              {"object_words", s.object_words},
              {"warmup", s.warmup}};
}

// ---- small helpers ----------------------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

std::string iso_utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// One Table-2-shaped row: model, split, then the four headline numbers.
std::string metric_row_text(const std::string& model, const std::string& split,
                            const MetricReport& r) {
  std::ostringstream out;
  out << "model\tsplit\tppl\tupp\tupp_f\tunk\n"
      << model << '\t' << split << '\t' << fixed4(r.ppl) << '\t' << fixed4(r.upp) << '\t'
      << fixed4(r.upp_f) << '\t' << r.unk_count << '\n';
  return out.str();
}

std::string metric_row_csv(const std::string& model, const std::string& split,
                           const MetricReport& r) {
  std::ostringstream out;
  out << "model,split,ppl,upp,upp_f,unk_count,tokens,upp_divisor\n"
      << model << ',' << split << ',' << format_double(r.ppl) << ',' << format_double(r.upp)
      << ',' << format_double(r.upp_f) << ',' << r.unk_count << ',' << r.tokens << ','
      << r.upp_divisor << '\n';
  return out.str();
}

Corpus topics_of_split(const Corpus& corpus, const std::string& split) {
  if (split == "all") return corpus;
  const Split want = parse_split(split);
  Corpus out;
  for (const auto& at : corpus)
    if (at.doc.split == want) out.push_back(at);
  return out;
}

const AlignedTopic& pick_topic(const Corpus& corpus, int topic_id, const std::string& split) {
  if (topic_id >= 0) {
    for (const auto& at : corpus)
      if (at.doc.topic_id == topic_id) return at;
    throw DataError("topic " + std::to_string(topic_id) + " not in the corpus");
  }
  const Corpus* scope = &corpus;
  Corpus scoped;
  if (split != "all") {
    scoped = topics_of_split(corpus, split);
    scope = &scoped;
  }
  if (scope->empty()) throw DataError("no topics in split '" + split + "'");
  // return a reference into `corpus`, not the local copy
  const int id = scope->front().doc.topic_id;
  for (const auto& at : corpus)
    if (at.doc.topic_id == id) return at;
  throw DataError("topic lookup failed");  // unreachable
}

std::vector<std::string> warmup_tokens(const Settings& s, const TopicDocument& doc) {
  std::vector<std::string> w = split_words(s.warmup);
  if (!w.empty()) return w;
  const std::size_t n = std::min<std::size_t>(2, doc.tokens.size());
  return {doc.tokens.begin(), doc.tokens.begin() + static_cast<std::ptrdiff_t>(n)};
}

TrainConfig train_config(const Settings& s) {
  TrainConfig tc;
  tc.unroll = static_cast<std::size_t>(s.unroll);
  tc.batch = static_cast<std::size_t>(s.batch);
  tc.lr0 = s.lr0 > 0.0 ? s.lr0 : (s.model == "rnnlm" ? 1.5 : 0.5);
  tc.decay = s.decay;
  tc.epochs = static_cast<std::size_t>(s.epochs);
  tc.clip = s.clip;
  tc.seed = s.seed;
  tc.ablation = s.ablation;
  tc.embedding_mode = s.embedding_mode;
  return tc;
}

NklmConfig nklm_config(const Settings& s) {
  NklmConfig mc;
  mc.word_dim = s.word_dim;
  mc.entity_dim = s.entity_dim;
  mc.position_dim = s.position_dim;
  mc.max_positions = s.max_positions;
  mc.hidden_dim = s.hidden_dim;
  mc.layers = s.layers;
  mc.dropout = s.dropout;
  mc.seed = s.seed;
  return mc;
}

// ---- per-command bodies -----------------------------------------------------

struct Ctx {
  const RunRequest& req;
  Settings s;
  std::map<std::string, std::string> outputs;  // path -> sha256
  std::ostringstream text;

  std::string out_path(const std::string& name) const {
    return (std::filesystem::path(req.out_dir) / name).string();
  }
  void emit(const std::string& path) { outputs[path] = sha256_file(path); }
};

void cmd_synth_corpus(Ctx& c) {
  SynthConfig sc;
  sc.topics = c.s.topics;
  sc.seed = c.s.seed;
  sc.min_facts = c.s.min_facts;
  sc.max_facts = c.s.max_facts;
  sc.min_sentences = c.s.min_sentences;
  sc.max_sentences = c.s.max_sentences;
  sc.anchor_prob = c.s.anchor_prob;
  const SynthResult res = synthesize_corpus(sc);

  const std::string corpus_path = c.out_path("corpus.jsonl");
  const std::string triples_path = c.out_path("triples.tsv");
  write_dataset(res.corpus, corpus_path);
  write_triples(res.kg, triples_path);
  c.emit(corpus_path);
  c.emit(triples_path);

  const CorpusStats st = corpus_stats(res.corpus);
  c.text << "synthesized " << st.topic_count << " topics, " << st.token_count << " tokens\n"
         << "avg facts/topic " << fixed4(st.avg_facts_per_topic) << ", avg knowledge words/fact "
         << fixed4(st.avg_knowledge_words_per_fact) << ", distinct words "
         << st.unique_word_count << "\n"
         << "entities " << res.kg.entity_count << ", relations " << res.kg.relation_count
         << ", triples " << res.kg.triples.size() << "\n";
}

void cmd_align(Ctx& c) {
  Corpus corpus = read_dataset(c.req.corpus_path);
  AliasTable aliases;
  if (!c.req.aliases_path.empty()) aliases = AliasTable::read(c.req.aliases_path);

  std::size_t tokens = 0, gold_tokens = 0, gold_hits = 0;
  for (auto& at : corpus) {
    std::vector<AugmentedToken> fresh = align(at.doc, aliases);
    tokens += fresh.size();
    if (at.alignment.size() == fresh.size() && !at.alignment.empty()) {
      for (std::size_t i = 0; i < fresh.size(); ++i) {
        ++gold_tokens;
        const AugmentedToken& a = at.alignment[i];
        const AugmentedToken& b = fresh[i];
        if (a.w == b.w && a.z == b.z && a.a == b.a && (!a.z || a.n == b.n)) ++gold_hits;
      }
    }
    at.alignment = std::move(fresh);
  }

  const std::string out = c.out_path("aligned.jsonl");
  write_dataset(corpus, out);
  c.emit(out);
  c.text << "aligned " << corpus.size() << " topics, " << tokens << " tokens\n";
  if (gold_tokens > 0)
    c.text << "gold agreement " << gold_hits << "/" << gold_tokens << " ("
           << fixed4(100.0 * static_cast<double>(gold_hits) / static_cast<double>(gold_tokens))
           << "%)\n";
}

void cmd_embed_kg(Ctx& c) {
  const TripleSet ts = read_triples(c.req.triples_path);
  EmbeddingStore store;
  if (c.s.embedding_mode == "random") {
    store = random_embeddings(ts.entity_count, ts.relation_count, c.s.kg_dim, c.s.seed,
                              ts.entity_names, ts.relation_names);
  } else if (c.s.embedding_mode == "trained") {
    store = train_translation_embeddings(ts, c.s.kg_dim, c.s.kg_epochs, c.s.kg_margin, c.s.kg_lr,
                                         c.s.seed);
  } else {
    throw ConfigError("embedding_mode must be trained or random, got '" + c.s.embedding_mode +
                      "'");
  }

  const std::string out = c.out_path("embeddings.tsv");
  write_embeddings(store, out);
  c.emit(out);
  c.text << (c.s.embedding_mode == "random" ? "random" : "translation-trained") << " embeddings, dim "
         << store.dim << ", " << store.entity_count() << " entities, " << store.relation_count()
         << " relations\n"
         << "hits@1 " << fixed4(hits_at_1(store, ts)) << ", mean tail rank "
         << fixed4(mean_tail_rank(store, ts)) << "\n";
}

void cmd_train(Ctx& c) {
  const Corpus corpus = read_dataset(c.req.corpus_path);
  const Corpus train_split = topics_of_split(corpus, "train");
  const Corpus valid_split = topics_of_split(corpus, "valid");
  const Vocabulary vocab = Vocabulary::build(train_split, static_cast<std::size_t>(c.s.vocab_size));
  const EvalContext ectx = make_eval_context(corpus, vocab);
  TrainConfig tc = train_config(c.s);

  const std::string ckpt_path = c.out_path("model.ckpt");
  const std::string metrics_path = c.out_path("metrics.csv");
  FitResult fr;
  Checkpoint ckpt;
  if (c.s.model == "nklm") {
    if (c.req.embeddings_path.empty())
      throw ConfigError("train needs --embeddings for the nklm model");
    NklmConfig mc = nklm_config(c.s);
    apply_ablation(tc.ablation, mc, tc.embedding_mode);
    EmbeddingStore store = read_embeddings(c.req.embeddings_path);
    if (tc.embedding_mode == "random")
      store = random_embeddings(static_cast<int>(store.entity_count()),
                                static_cast<int>(store.relation_count()),
                                static_cast<int>(store.dim), c.s.seed, store.entity_names,
                                store.relation_names);
    NklmModel model(mc, vocab, store);
    fr = fit(model, train_split, valid_split, tc, ectx);
    ckpt = make_checkpoint(model, tc, fr);
  } else if (c.s.model == "rnnlm") {
    if (tc.ablation != "none")
      throw ConfigError("ablations apply to the nklm model; got --ablation with model=rnnlm");
    RnnlmConfig rc;
    rc.word_dim = c.s.word_dim;
    rc.hidden_dim = c.s.hidden_dim;
    rc.layers = c.s.layers;
    rc.dropout = c.s.dropout;
    rc.seed = c.s.seed;
    RnnlmModel model(rc, vocab);
    fr = fit(model, train_split, valid_split, tc, ectx);
    ckpt = make_checkpoint(model, tc, fr);
  } else {
    throw ConfigError("model must be nklm or rnnlm, got '" + c.s.model + "'");
  }

  save_checkpoint(ckpt_path, ckpt);
  write_metrics_csv(metrics_path, fr.history);
  c.emit(ckpt_path);
  c.emit(metrics_path);

  c.text << "trained " << c.s.model << " (" << tc.ablation << ") for " << tc.epochs
         << " epochs on " << train_split.size() << " topics, vocab " << vocab.size() << "\n"
         << "best epoch " << fr.best_epoch << ", valid ppl " << fixed4(fr.best_valid_ppl) << "\n";
  if (!fr.history.empty()) {
    const MetricRow& last = fr.history[static_cast<std::size_t>(fr.best_epoch)];
    c.text << metric_row_text(c.s.model, last.split, last.report);
  }
}

void cmd_eval(Ctx& c) {
  const Checkpoint ckpt = load_checkpoint(c.req.checkpoint_path);
  const Corpus corpus = read_dataset(c.req.corpus_path);
  const Corpus topics = topics_of_split(corpus, c.s.split);
  if (topics.empty()) throw DataError("no topics in split '" + c.s.split + "'");

  MetricReport report;
  if (ckpt.kind == "nklm") {
    const NklmModel model = nklm_from_checkpoint(ckpt);
    const EvalContext ectx = make_eval_context(corpus, model.vocab());
    report = compute_metrics(score_tokens(model, topics, c.s.word_term_only), ectx);
  } else {
    const RnnlmModel model = rnnlm_from_checkpoint(ckpt);
    const EvalContext ectx = make_eval_context(corpus, model.vocab());
    report = compute_metrics(score_tokens(model, topics), ectx);
  }

  const std::string out = c.out_path("eval.csv");
  spit(out, metric_row_csv(ckpt.kind, c.s.split, report));
  c.emit(out);
  c.text << metric_row_text(ckpt.kind, c.s.split, report);
}

NklmModel nklm_model_from(const std::string& ckpt_path, const std::string& use) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.kind != "nklm") throw ConfigError(use + " needs an nklm checkpoint, got " + ckpt.kind);
  return nklm_from_checkpoint(ckpt);
}

void cmd_sample(Ctx& c) {
  const NklmModel model = nklm_model_from(c.req.checkpoint_path, "sample");
  const Corpus corpus = read_dataset(c.req.corpus_path);
  const AlignedTopic& at = pick_topic(corpus, c.s.topic, c.s.split);
  const std::vector<std::string> warmup = warmup_tokens(c.s, at.doc);

  DecodeMode mode;
  if (c.s.decode == "greedy") mode = DecodeMode::greedy;
  else if (c.s.decode == "stochastic") mode = DecodeMode::stochastic;
  else throw ConfigError("decode must be greedy or stochastic, got '" + c.s.decode + "'");

  const SampleResult res = sample_description(model, at.doc, warmup, c.s.max_len, mode, c.s.seed);

  std::ostringstream body;
  body << "topic " << at.doc.topic_id << "\n";
  body << "warmup:";
  for (const auto& w : warmup) body << ' ' << w;
  body << "\nrendered:";
  for (const auto& w : res.rendered) body << ' ' << w;
  body << "\nraw:";
  for (const auto& w : res.raw) body << ' ' << w;
  body << "\n";

  const std::string out = c.out_path("sample.txt");
  spit(out, body.str());
  c.emit(out);
  c.text << body.str();
}

void cmd_edit_probe(Ctx& c) {
  const NklmModel model = nklm_model_from(c.req.checkpoint_path, "edit-probe");
  const Corpus corpus = read_dataset(c.req.corpus_path);
  const AlignedTopic& at = pick_topic(corpus, c.s.topic, c.s.split);
  if (c.s.fact < 0) throw ConfigError("edit-probe needs --fact (the fact id to edit)");
  if (c.s.object_entity.empty()) throw ConfigError("edit-probe needs --object (an entity id)");
  int new_object = -1;
  try {
    new_object = std::stoi(c.s.object_entity);
  } catch (const std::exception&) {
    throw ConfigError("edit-probe --object must be an entity id, got '" + c.s.object_entity +
                      "'");
  }
  const std::vector<std::string> new_words = split_words(c.s.object_words);
  if (new_words.empty()) throw ConfigError("edit-probe needs --object-words");
  const std::vector<std::string> warmup = warmup_tokens(c.s, at.doc);

  const EditProbeResult res =
      knowledge_edit_probe(model, at.doc, c.s.fact, new_object, new_words, warmup, c.s.max_len);

  json jout{{"topic_id", res.topic_id},
            {"fact_id", c.s.fact},
            {"new_object", new_object},
            {"new_words", new_words},
            {"before", res.before},
            {"after", res.after},
            {"changed_positions", res.changed_positions},
            {"changed", res.changed},
            {"new_words_copied", res.new_words_copied},
            {"params_unchanged", res.params_unchanged}};
  const std::string out = c.out_path("probe.json");
  spit(out, jout.dump(2) + "\n");
  c.emit(out);

  c.text << "topic " << res.topic_id << ", fact " << c.s.fact << " -> entity " << new_object
         << "\nbefore:";
  for (const auto& w : res.before) c.text << ' ' << w;
  c.text << "\nafter:";
  for (const auto& w : res.after) c.text << ' ' << w;
  c.text << "\nchanged " << (res.changed ? "yes" : "no") << ", new words copied "
         << (res.new_words_copied ? "yes" : "no") << ", params unchanged "
         << (res.params_unchanged ? "yes" : "no") << "\n";
}

void cmd_trace(Ctx& c) {
  const NklmModel model = nklm_model_from(c.req.checkpoint_path, "trace");
  const Corpus corpus = read_dataset(c.req.corpus_path);
  const AlignedTopic& at = pick_topic(corpus, c.s.topic, c.s.split);

  const std::vector<std::string> csvs = trace_csvs(model, at);
  for (std::size_t i = 0; i < csvs.size(); ++i) {
    const std::string out =
        c.out_path("trace_topic" + std::to_string(at.doc.topic_id) + "_s" + std::to_string(i) +
                   ".csv");
    spit(out, csvs[i]);
    c.emit(out);
  }
  c.text << "wrote " << csvs.size() << " sentence traces for topic " << at.doc.topic_id << "\n";
}

}  // namespace

void apply_settings_json(Settings& s, const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("config (" + origin + "): " + e.what());
  }
  apply_settings(s, j, origin);
}

std::string settings_to_json(const Settings& s) { return settings_json(s).dump(); }

RunReport run_pipeline(const RunRequest& req) {
  RunReport report;

  Settings s;
  if (!req.config_path.empty()) apply_settings_json(s, slurp(req.config_path), req.config_path);
  apply_settings_json(s, req.overrides_json, "flags");
  report.settings = s;

  if (req.out_dir.empty()) throw ConfigError("an output directory is required");
  std::filesystem::create_directories(req.out_dir);

  for (const std::string* p : {&req.config_path, &req.corpus_path, &req.triples_path,
                               &req.embeddings_path, &req.checkpoint_path, &req.aliases_path})
    if (!p->empty()) report.inputs[*p] = sha256_file(*p);

  Ctx ctx{req, s, {}, {}};
  if (req.command == "synth-corpus") cmd_synth_corpus(ctx);
  else if (req.command == "align") cmd_align(ctx);
  else if (req.command == "embed-kg") cmd_embed_kg(ctx);
  else if (req.command == "train") cmd_train(ctx);
  else if (req.command == "eval") cmd_eval(ctx);
  else if (req.command == "sample") cmd_sample(ctx);
  else if (req.command == "edit-probe") cmd_edit_probe(ctx);
  else if (req.command == "trace") cmd_trace(ctx);
  else throw ConfigError("unknown command '" + req.command + "'");

  report.outputs = ctx.outputs;
  report.text = ctx.text.str();

  json manifest{{"command", req.command},
                {"argv", req.argv},
                {"seed", s.seed},
                {"config", settings_json(s)},
                {"inputs", report.inputs},
                {"outputs", report.outputs},
                {"timestamp", iso_utc_now()}};
  report.manifest_path =
      (std::filesystem::path(req.out_dir) / (req.command + ".manifest.json")).string();
  spit(report.manifest_path, manifest.dump(2) + "\n");
  return report;
}

}  // namespace nklm
