#include "nklm/train.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "nklm/errors.hpp"

namespace nklm {
namespace {

using json = nlohmann::json;

json nklm_config_json(const NklmConfig& c) {
  return {{"kind", "nklm"},
          {"word_dim", c.word_dim},
          {"entity_dim", c.entity_dim},
          {"position_dim", c.position_dim},
          {"max_positions", c.max_positions},
          {"hidden_dim", c.hidden_dim},
          {"layers", c.layers},
          {"dropout", c.dropout},
          {"no_copy", c.no_copy},
          {"no_fact", c.no_fact},
          {"seed", c.seed}};
}

NklmConfig nklm_config_from_json(const json& j) {
  NklmConfig c;
  c.word_dim = j.at("word_dim").get<int>();
  c.entity_dim = j.at("entity_dim").get<int>();
  c.position_dim = j.at("position_dim").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.layers = j.at("layers").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.no_copy = j.at("no_copy").get<bool>();
  c.no_fact = j.at("no_fact").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json rnnlm_config_json(const RnnlmConfig& c) {
  return {{"kind", "rnnlm"},
          {"word_dim", c.word_dim},
          {"hidden_dim", c.hidden_dim},
          {"layers", c.layers},
          {"dropout", c.dropout},
          {"seed", c.seed}};
}

RnnlmConfig rnnlm_config_from_json(const json& j) {
  RnnlmConfig c;
  c.word_dim = j.at("word_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.layers = j.at("layers").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json train_config_json(const TrainConfig& c) {
  return {{"unroll", c.unroll},   {"batch", c.batch},   {"lr0", c.lr0},
          {"decay", c.decay},     {"epochs", c.epochs}, {"clip", c.clip},
          {"seed", c.seed},       {"ablation", c.ablation},
          {"embedding_mode", c.embedding_mode}};
}

json history_json(const std::vector<MetricRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"epoch", r.epoch},
                   {"split", r.split},
                   {"ppl", r.report.ppl},
                   {"upp", r.report.upp},
                   {"upp_f", r.report.upp_f},
                   {"unk_count", r.report.unk_count},
                   {"tokens", r.report.tokens},
                   {"upp_divisor", r.report.upp_divisor}});
  return out;
}

std::vector<MetricRow> history_from_json(const json& j) {
  std::vector<MetricRow> rows;
  for (const auto& e : j) {
    MetricRow r;
    r.epoch = e.at("epoch").get<int>();
    r.split = e.at("split").get<std::string>();
    r.report.ppl = e.at("ppl").get<double>();
    r.report.upp = e.at("upp").get<double>();
    r.report.upp_f = e.at("upp_f").get<double>();
    r.report.unk_count = e.at("unk_count").get<std::size_t>();
    r.report.tokens = e.at("tokens").get<std::size_t>();
    r.report.upp_divisor = e.at("upp_divisor").get<std::size_t>();
    rows.push_back(std::move(r));
  }
  return rows;
}

void fisher_yates(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

// One training pass shared by both model kinds. `win` runs one BPTT window
// and accumulates gradients; `ev` scores the validation split.
FitResult fit_loop(ParamStore& params, const std::vector<std::size_t>& stream_lens,
                   const std::vector<int>& topic_ids, const TrainConfig& cfg, bool dropout_on,
                   const std::function<double(std::size_t, std::size_t, std::size_t, LstmState&,
                                              Rng*)>& win,
                   const std::function<LstmState()>& init,
                   const std::function<MetricReport()>& ev) {
  cfg.validate();
  if (stream_lens.empty()) throw DataError("fit: empty train split");

  Rng rng(cfg.seed);
  FitResult res;
  ParamStore best;
  double best_ppl = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(stream_lens.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(cfg, epoch);
    fisher_yates(order, rng);

    long double loss_sum = 0.0L;
    std::size_t token_sum = 0, batch_windows = 0, batch_tokens = 0;
    auto flush = [&] {
      if (batch_windows == 0) return;
      params.scale_grads(1.0 / static_cast<double>(batch_tokens));
      sgd_clipped_step(params, lr, cfg.clip);
      batch_windows = batch_tokens = 0;
    };

    for (std::size_t ti : order) {
      LstmState state = init();
      for (std::size_t b = 0; b < stream_lens[ti]; b += cfg.unroll) {
        const std::size_t e = std::min(b + cfg.unroll, stream_lens[ti]);
        double wl = 0.0;
        try {
          wl = win(ti, b, e, state, dropout_on ? &rng : nullptr);
        } catch (const TrainError& ex) {
          throw TrainError("fit: epoch " + std::to_string(epoch) + ", topic " +
                           std::to_string(topic_ids[ti]) + ", window at " + std::to_string(b) +
                           ": " + ex.what());
        }
        loss_sum += wl;
        token_sum += e - b;
        batch_tokens += e - b;
        if (++batch_windows == cfg.batch) flush();
      }
    }
    flush();

    res.train_loss.push_back(static_cast<double>(loss_sum / static_cast<long double>(token_sum)));
    MetricRow row{static_cast<int>(epoch), "valid", ev()};
    if (row.report.ppl < best_ppl) {
      best_ppl = row.report.ppl;
      best = params;
      res.best_epoch = static_cast<int>(epoch);
    }
    res.history.push_back(std::move(row));
  }

  if (res.best_epoch >= 0) {
    res.best_valid_ppl = best_ppl;
    params = best;
  }
  return res;
}

std::string be_name(const Tensor2& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

// Bounds-checked little-endian reader over the loaded file image.
struct Cursor {
  const std::string& buf;
  std::size_t pos = 0;
  const char* what = "header";

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw ParseError(std::string("checkpoint truncated in ") + what);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

Checkpoint checkpoint_common(const ParamStore& params, const std::string& kind, json model_cfg,
                             const TrainConfig& tc, const std::vector<std::string>& vocab_content,
                             const FitResult& fit) {
  Checkpoint c;
  c.kind = kind;
  c.config_json = json{{"model", std::move(model_cfg)}, {"train", train_config_json(tc)}}.dump();
  c.vocab_content = vocab_content;
  c.epoch = fit.best_epoch;
  c.history = fit.history;
  c.params = params;
  return c;
}

}  // namespace

void TrainConfig::validate() const {
  if (unroll < 1) throw ConfigError("TrainConfig: unroll must be >= 1");
  if (batch < 1) throw ConfigError("TrainConfig: batch must be >= 1");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("TrainConfig: decay must be in (0, 1]");
  if (!(clip > 0.0)) throw ConfigError("TrainConfig: clip must be positive");
  if (!(lr0 > 0.0)) throw ConfigError("TrainConfig: lr0 must be positive");
  if (ablation != "none" && ablation != "no-copy" && ablation != "no-fact-no-copy" &&
      ablation != "no-transe")
    throw ConfigError("TrainConfig: unknown ablation '" + ablation + "'");
  if (embedding_mode != "trained" && embedding_mode != "random")
    throw ConfigError("TrainConfig: unknown embedding mode '" + embedding_mode + "'");
}

void apply_ablation(const std::string& ablation, NklmConfig& model_cfg,
                    std::string& embedding_mode) {
  if (ablation == "none") return;
  if (ablation == "no-copy") {
    model_cfg.no_copy = true;
  } else if (ablation == "no-fact-no-copy") {
    model_cfg.no_copy = true;
    model_cfg.no_fact = true;
  } else if (ablation == "no-transe") {
    embedding_mode = "random";
  } else {
    throw ConfigError("apply_ablation: unknown ablation '" + ablation + "'");
  }
}

double lr_at(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(epoch));
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "epoch,split,ppl,upp,upp_f,unk_count\n";
  for (const auto& r : rows)
    out += std::to_string(r.epoch) + ',' + r.split + ',' + format_double(r.report.ppl) + ',' +
           format_double(r.report.upp) + ',' + format_double(r.report.upp_f) + ',' +
           std::to_string(r.report.unk_count) + '\n';
  return out;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_metrics_csv: cannot open " + path);
  const std::string body = metrics_csv(rows);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw IoError("write_metrics_csv: write failed for " + path);
}

FitResult fit(NklmModel& model, const Corpus& train_split, const Corpus& valid_split,
              const TrainConfig& cfg, const EvalContext& ectx) {
  if (valid_split.empty()) throw DataError("fit: empty valid split");
  struct TopicStream {
    const TopicDocument* doc;
    std::vector<AugmentedToken> stream;
  };
  std::vector<TopicStream> topics;
  std::vector<std::size_t> lens;
  std::vector<int> ids;
  for (const auto& t : train_split) {
    TopicStream ts{&t.doc, t.alignment};
    for (auto& tok : ts.stream) tok.w_id = model.vocab().id_or_unk(tok.w);
    ts.stream.push_back(model.eos_token(model.bind(t.doc)));
    lens.push_back(ts.stream.size());
    ids.push_back(t.doc.topic_id);
    topics.push_back(std::move(ts));
  }

  // NaF / Topic_Itself columns live in the parameters, so the memory is
  // rebound for every window to see the latest update.
  auto win = [&](std::size_t ti, std::size_t b, std::size_t e, LstmState& st, Rng* rng) {
    const BoundTopic bt = model.bind(*topics[ti].doc);
    return model.train_window(topics[ti].stream, b, e, bt, st, true, rng);
  };
  auto init = [&] { return model.initial_state(); };
  auto ev = [&] { return compute_metrics(score_tokens(model, valid_split), ectx); };
  return fit_loop(model.params(), lens, ids, cfg, model.config().dropout > 0.0, win, init, ev);
}

FitResult fit(RnnlmModel& model, const Corpus& train_split, const Corpus& valid_split,
              const TrainConfig& cfg, const EvalContext& ectx) {
  if (valid_split.empty()) throw DataError("fit: empty valid split");
  std::vector<std::vector<int>> streams;
  std::vector<std::size_t> lens;
  std::vector<int> ids;
  for (const auto& t : train_split) {
    std::vector<int> s;
    for (const auto& w : t.doc.tokens) s.push_back(model.vocab().id_or_unk(w));
    s.push_back(Vocabulary::kEosId);
    lens.push_back(s.size());
    ids.push_back(t.doc.topic_id);
    streams.push_back(std::move(s));
  }

  auto win = [&](std::size_t ti, std::size_t b, std::size_t e, LstmState& st, Rng* rng) {
    return model.train_window(streams[ti], b, e, st, true, rng);
  };
  auto init = [&] { return model.initial_state(); };
  auto ev = [&] { return compute_metrics(score_tokens(model, valid_split), ectx); };
  return fit_loop(model.params(), lens, ids, cfg, model.config().dropout > 0.0, win, init, ev);
}

Checkpoint make_checkpoint(const NklmModel& model, const TrainConfig& tc, const FitResult& fit) {
  return checkpoint_common(model.params(), "nklm", nklm_config_json(model.config()), tc,
                           model.vocab().content_words(), fit);
}

Checkpoint make_checkpoint(const RnnlmModel& model, const TrainConfig& tc, const FitResult& fit) {
  return checkpoint_common(model.params(), "rnnlm", rnnlm_config_json(model.config()), tc,
                           model.vocab().content_words(), fit);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const json header = {{"kind", ckpt.kind},
                       {"config", json::parse(ckpt.config_json)},
                       {"vocab", ckpt.vocab_content},
                       {"epoch", ckpt.epoch},
                       {"history", history_json(ckpt.history)}};
  const std::string header_text = header.dump();

  std::string out = "NKLMCKPT";
  put_u32(out, ckpt.version);
  put_u64(out, header_text.size());
  out += header_text;
  put_u64(out, ckpt.params.entries().size());
  for (const auto& [name, entry] : ckpt.params.entries()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    out.push_back(entry.trainable ? 1 : 0);
    put_u64(out, entry.value.rows());
    put_u64(out, entry.value.cols());
    const double* vals = entry.value.data();
    for (std::size_t k = 0; k < entry.value.rows() * entry.value.cols(); ++k)
      put_f64(out, vals[k]);
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_checkpoint: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Cursor cur{buf};
  cur.what = "magic";
  if (cur.bytes(8) != "NKLMCKPT") throw ParseError("load_checkpoint: not a checkpoint file");
  cur.what = "version";
  Checkpoint ckpt;
  ckpt.version = cur.u32();
  if (ckpt.version != 1)
    throw VersionError("load_checkpoint: version " + std::to_string(ckpt.version) +
                       ", expected 1");
  cur.what = "header";
  const std::uint64_t header_len = cur.u64();
  const std::string header_text = cur.bytes(header_len);
  json header;
  try {
    header = json::parse(header_text);
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.config_json = header.at("config").dump();
    ckpt.vocab_content = header.at("vocab").get<std::vector<std::string>>();
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.history = history_from_json(header.at("history"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("load_checkpoint: bad header: ") + e.what());
  }

  cur.what = "tensor table";
  const std::uint64_t count = cur.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    cur.what = "tensor table";
    const std::uint32_t name_len = cur.u32();
    const std::string name = cur.bytes(name_len);
    const std::string label = "tensor '" + name + "'";
    cur.what = label.c_str();
    const bool trainable = cur.bytes(1)[0] != 0;
    const std::uint64_t rows = cur.u64();
    const std::uint64_t cols = cur.u64();
    if (rows == 0 || cols == 0 || rows * cols > (1ull << 32))
      throw ParseError("load_checkpoint: implausible shape " + std::to_string(rows) + "x" +
                       std::to_string(cols) + " for " + label);
    Tensor2 t(rows, cols);
    double* vals = t.data();
    for (std::uint64_t k = 0; k < rows * cols; ++k) vals[k] = cur.f64();
    ckpt.params.add(name, std::move(t), trainable);
  }
  if (cur.pos != buf.size()) throw ParseError("load_checkpoint: trailing bytes after tensors");
  return ckpt;
}

namespace {

void transplant(ParamStore& dst, const ParamStore& src) {
  if (dst.entries().size() != src.entries().size())
    throw ParseError("checkpoint tensor set does not match the model architecture");
  for (const auto& [name, entry] : src.entries()) {
    if (!dst.has(name)) throw ParseError("checkpoint tensor '" + name + "' not in the model");
    Tensor2& t = dst.value(name);
    if (t.rows() != entry.value.rows() || t.cols() != entry.value.cols())
      throw ParseError("checkpoint tensor '" + name + "' has shape " + be_name(entry.value) +
                       ", model expects " + be_name(t));
    t = entry.value;
  }
}

}  // namespace

NklmModel nklm_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "nklm") throw ParseError("nklm_from_checkpoint: checkpoint kind '" + ckpt.kind + "'");
  json cfg;
  NklmConfig mc;
  TrainConfig tc;
  try {
    cfg = json::parse(ckpt.config_json);
    mc = nklm_config_from_json(cfg.at("model"));
    tc.embedding_mode = cfg.at("train").at("embedding_mode").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("nklm_from_checkpoint: bad config: ") + e.what());
  }
  if (!ckpt.params.has("kg.entity") || !ckpt.params.has("kg.relation"))
    throw ParseError("nklm_from_checkpoint: missing embedding tensors");
  EmbeddingStore kg;
  kg.entities = ckpt.params.value("kg.entity");
  kg.relations = ckpt.params.value("kg.relation");
  kg.dim = kg.entities.rows();
  kg.provenance = tc.embedding_mode == "random" ? EmbeddingStore::Provenance::random
                                                : EmbeddingStore::Provenance::trained;
  NklmModel model(mc, Vocabulary::from_content_words(ckpt.vocab_content), kg);
  transplant(model.params(), ckpt.params);
  return model;
}

RnnlmModel rnnlm_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "rnnlm")
    throw ParseError("rnnlm_from_checkpoint: checkpoint kind '" + ckpt.kind + "'");
  RnnlmConfig rc;
  try {
    rc = rnnlm_config_from_json(json::parse(ckpt.config_json).at("model"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("rnnlm_from_checkpoint: bad config: ") + e.what());
  }
  RnnlmModel model(rc, Vocabulary::from_content_words(ckpt.vocab_content));
  transplant(model.params(), ckpt.params);
  return model;
}

}  // namespace nklm
