#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "nklm/errors.hpp"
#include "nklm/grad_check.hpp"
#include "nklm/kg_embed.hpp"
#include "nklm/train.hpp"
#include "test_util.hpp"

using namespace nklm;

namespace {

struct GradWorld {
  NklmConfig cfg;
  Vocabulary vocab = Vocabulary::from_content_words({"was", "born", "in", "."});
  EmbeddingStore kg;
  std::vector<Fact> facts;
  std::vector<AugmentedToken> stream;

  GradWorld() {
    cfg.word_dim = 4;
    cfg.entity_dim = 3;
    cfg.position_dim = 3;
    cfg.max_positions = 3;
    cfg.hidden_dim = 4;
    cfg.layers = 2;
    cfg.seed = 5;
    kg = random_embeddings(4, 2, cfg.entity_dim, 17);
    facts = {
        make_fact(0, 3, 1, 3, {"Ada", "Vask"}, false, true),
        make_fact(1, 3, 0, 0, {"Korvik", "Bay"}),
        make_fact(2, 3, 1, 1, {"1928"}),
        make_fact(-1, -1, -1, -1, {}, true),
    };
    const int naf = 3;
    stream = {
        {"Ada", -1, true, 0, 0, 3},   {"Vask", -1, true, 0, 1, 3},
        {"was", -1, false, naf, 0, 3}, {"born", -1, false, naf, 0, 3},
        {"in", -1, false, naf, 0, 3},  {"Korvik", -1, true, 1, 0, 3},
        {"Bay", -1, true, 1, 1, 3},    {"1928", -1, true, 2, 0, 3},
        {".", -1, false, naf, 0, 3},   {"<eos>", Vocabulary::kEosId, false, naf, 0, 3},
    };
    for (auto& t : stream)
      if (t.w_id < 0) t.w_id = vocab.id_or_unk(t.w);
  }
};

// Twenty-topic synthetic slice with a corpus-built vocabulary; shared by the
// fit smoke tests.
struct FitWorld {
  Corpus train, valid;
  Vocabulary vocab;
  EmbeddingStore kg;
  EvalContext ectx;
  NklmConfig mc;

  explicit FitWorld(std::uint64_t seed = 303) {
    SynthConfig sc;
    sc.topics = 20;
    sc.seed = seed;
    sc.min_facts = 3;
    sc.max_facts = 5;
    const SynthResult synth = synthesize_corpus(sc);
    for (const auto& t : synth.corpus) {
      if (t.doc.split == Split::valid || t.doc.split == Split::test)
        valid.push_back(t);
      else
        train.push_back(t);
    }
    vocab = Vocabulary::build(synth.corpus, 80);
    mc.word_dim = 12;
    mc.entity_dim = 6;
    mc.position_dim = 4;
    mc.max_positions = 8;
    mc.hidden_dim = 16;
    mc.layers = 1;
    mc.seed = 11;
    kg = random_embeddings(synth.kg.entity_count, synth.kg.relation_count, mc.entity_dim, 23);
    ectx = make_eval_context(synth.corpus, vocab);
  }

  TrainConfig short_run() const {
    TrainConfig tc;
    tc.unroll = 16;
    tc.epochs = 15;
    tc.lr0 = 0.5;
    tc.seed = 7;
    return tc;
  }
};

std::string temp_path(const char* stem) {
  return std::string("/tmp/nklm_train_test_") + stem + "_" + std::to_string(::getpid());
}

}  // namespace

TEST_CASE("window-loss gradients pass finite differences") {
  GradWorld w;
  NklmModel m(w.cfg, w.vocab, w.kg);
  auto loss = [&](bool with_grad) {
    const BoundTopic bt = m.bind(w.facts, 3);
    LstmState state = m.initial_state();
    return m.train_window(w.stream, 0, w.stream.size(), bt, state, with_grad);
  };
  const GradCheckReport r = finite_diff_check(loss, m.params());
  CAPTURE(r.worst_param);
  CAPTURE(r.worst_index);
  CHECK(r.max_rel_err < 1e-4);
  CHECK(r.checked == m.params().trainable_scalar_count());
}

TEST_CASE("rnnlm window-loss gradients pass finite differences") {
  RnnlmConfig rc;
  rc.word_dim = 4;
  rc.hidden_dim = 4;
  rc.layers = 2;
  rc.seed = 3;
  Vocabulary vocab = Vocabulary::from_content_words({"was", "born", "in", "."});
  RnnlmModel m(rc, vocab);
  std::vector<int> ids;
  for (const char* word : {"was", "born", "in", "zz", "born", "."})
    ids.push_back(vocab.id_or_unk(word));
  ids.push_back(Vocabulary::kEosId);
  auto loss = [&](bool with_grad) {
    LstmState state = m.initial_state();
    return m.train_window(ids, 0, ids.size(), state, with_grad);
  };
  const GradCheckReport r = finite_diff_check(loss, m.params());
  CAPTURE(r.worst_param);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("ablated window losses stay differentiable") {
  GradWorld w;
  SUBCASE("no-copy") { w.cfg.no_copy = true; }
  SUBCASE("no-fact-no-copy") {
    w.cfg.no_copy = true;
    w.cfg.no_fact = true;
  }
  NklmModel m(w.cfg, w.vocab, w.kg);
  auto loss = [&](bool with_grad) {
    const BoundTopic bt = m.bind(w.facts, 3);
    LstmState state = m.initial_state();
    return m.train_window(w.stream, 0, w.stream.size(), bt, state, with_grad);
  };
  const GradCheckReport r = finite_diff_check(loss, m.params());
  CAPTURE(r.worst_param);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("learning-rate schedule decays by 0.98 per epoch") {
  TrainConfig tc;
  tc.lr0 = 0.5;
  CHECK(lr_at(tc, 0) == doctest::Approx(0.5));
  CHECK(lr_at(tc, 1) == doctest::Approx(0.5 * 0.98));
  CHECK(lr_at(tc, 10) == doctest::Approx(0.5 * std::pow(0.98, 10.0)).epsilon(1e-12));
}

TEST_CASE("train config validation and ablation mapping") {
  TrainConfig tc;
  CHECK_NOTHROW(tc.validate());
  SUBCASE("bad fields") {
    TrainConfig bad = tc;
    bad.unroll = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = tc;
    bad.decay = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = tc;
    bad.decay = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = tc;
    bad.clip = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = tc;
    bad.ablation = "no-everything";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = tc;
    bad.embedding_mode = "psychic";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
  SUBCASE("ablations set the right switches") {
    NklmConfig mc;
    std::string mode = "trained";
    apply_ablation("none", mc, mode);
    CHECK_FALSE(mc.no_copy);
    apply_ablation("no-copy", mc, mode);
    CHECK(mc.no_copy);
    CHECK_FALSE(mc.no_fact);
    NklmConfig mc2;
    apply_ablation("no-fact-no-copy", mc2, mode);
    CHECK(mc2.no_copy);
    CHECK(mc2.no_fact);
    CHECK(mode == "trained");
    apply_ablation("no-transe", mc2, mode);
    CHECK(mode == "random");
    CHECK_THROWS_AS(apply_ablation("bogus", mc, mode), ConfigError);
  }
}

TEST_CASE("metrics csv format") {
  MetricRow row;
  row.epoch = 3;
  row.split = "valid";
  row.report.ppl = 12.5;
  row.report.upp = 40.0;
  row.report.upp_f = 13.25;
  row.report.unk_count = 7;
  CHECK(metrics_csv({row}) == "epoch,split,ppl,upp,upp_f,unk_count\n3,valid,12.5,40,13.25,7\n");

  const std::string path = temp_path("metrics") + ".csv";
  write_metrics_csv(path, {row});
  std::ifstream in(path);
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(contents == metrics_csv({row}));
  std::remove(path.c_str());
  CHECK_THROWS_AS(write_metrics_csv("/nonexistent-dir/x.csv", {row}), IoError);
}

TEST_CASE("fit makes progress, keeps embeddings frozen, and is deterministic") {
  FitWorld w;
  NklmModel m(w.mc, w.vocab, w.kg);
  const Tensor2 frozen_entities = m.params().value("kg.entity");
  const Tensor2 frozen_relations = m.params().value("kg.relation");
  const TrainConfig tc = w.short_run();

  const FitResult res = fit(m, w.train, w.valid, tc, w.ectx);
  REQUIRE(res.history.size() == tc.epochs);
  REQUIRE(res.train_loss.size() == tc.epochs);
  REQUIRE(res.best_epoch >= 0);
  CHECK(res.best_valid_ppl == res.history[res.best_epoch].report.ppl);
  for (const auto& row : res.history) {
    CHECK(row.split == "valid");
    CHECK(std::isfinite(row.report.ppl));
    CHECK(row.report.upp >= row.report.ppl);
  }
  // monotone-progress smoke: best epoch improves on the first
  CHECK(res.train_loss[res.best_epoch] < res.train_loss[0]);
  CHECK(res.history[res.best_epoch].report.ppl < res.history[0].report.ppl * 1.0001);
  // the frozen knowledge tensors never moved
  CHECK(m.params().value("kg.entity") == frozen_entities);
  CHECK(m.params().value("kg.relation") == frozen_relations);

  SUBCASE("equal seeds reproduce the run bit for bit") {
    NklmModel m2(w.mc, w.vocab, w.kg);
    const FitResult res2 = fit(m2, w.train, w.valid, tc, w.ectx);
    CHECK(metrics_csv(res.history) == metrics_csv(res2.history));
    CHECK(param_fingerprint(m.params()) == param_fingerprint(m2.params()));
    CHECK(res2.best_epoch == res.best_epoch);
  }
  SUBCASE("the model is left at the best-validation snapshot") {
    NklmModel m3(w.mc, w.vocab, w.kg);
    TrainConfig prefix = tc;
    prefix.epochs = static_cast<std::size_t>(res.best_epoch) + 1;
    const FitResult res3 = fit(m3, w.train, w.valid, prefix, w.ectx);
    CHECK(res3.best_epoch == res.best_epoch);
    CHECK(param_fingerprint(m3.params()) == param_fingerprint(m.params()));
  }
  SUBCASE("a different seed takes a different path") {
    NklmModel m4(w.mc, w.vocab, w.kg);
    TrainConfig other = tc;
    other.seed = 8;
    const FitResult res4 = fit(m4, w.train, w.valid, other, w.ectx);
    CHECK(metrics_csv(res4.history) != metrics_csv(res.history));
  }
}

TEST_CASE("fit trains the rnnlm baseline too") {
  FitWorld w;
  RnnlmConfig rc;
  rc.word_dim = 12;
  rc.hidden_dim = 16;
  rc.layers = 1;
  rc.seed = 13;
  RnnlmModel m(rc, w.vocab);
  TrainConfig tc = w.short_run();
  tc.lr0 = 1.5;
  tc.epochs = 8;
  const FitResult res = fit(m, w.train, w.valid, tc, w.ectx);
  REQUIRE(res.history.size() == tc.epochs);
  CHECK(res.train_loss[res.best_epoch] < res.train_loss[0]);
  CHECK(res.history[res.best_epoch].report.ppl < res.history[0].report.ppl);
}

TEST_CASE("fit input validation") {
  FitWorld w;
  NklmModel m(w.mc, w.vocab, w.kg);
  TrainConfig tc = w.short_run();
  tc.epochs = 1;
  CHECK_THROWS_AS(fit(m, {}, w.valid, tc, w.ectx), DataError);
  CHECK_THROWS_AS(fit(m, w.train, {}, tc, w.ectx), DataError);
  TrainConfig bad = tc;
  bad.decay = 2.0;
  CHECK_THROWS_AS(fit(m, w.train, w.valid, bad, w.ectx), ConfigError);
}

TEST_CASE("checkpoints round-trip bitwise and reload into working models") {
  FitWorld w;
  NklmModel m(w.mc, w.vocab, w.kg);
  TrainConfig tc = w.short_run();
  tc.epochs = 2;
  const FitResult res = fit(m, w.train, w.valid, tc, w.ectx);
  const Checkpoint ckpt = make_checkpoint(m, tc, res);

  const std::string p1 = temp_path("ckpt1") + ".bin";
  const std::string p2 = temp_path("ckpt2") + ".bin";
  save_checkpoint(p1, ckpt);
  const Checkpoint loaded = load_checkpoint(p1);
  save_checkpoint(p2, loaded);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(!b1.empty());

  CHECK(loaded.kind == "nklm");
  CHECK(loaded.epoch == res.best_epoch);
  CHECK(loaded.vocab_content == w.vocab.content_words());
  CHECK(metrics_csv(loaded.history) == metrics_csv(res.history));
  CHECK(param_fingerprint(loaded.params) == param_fingerprint(m.params()));

  // the reloaded model scores identically
  NklmModel m2 = nklm_from_checkpoint(loaded);
  const MetricReport before = compute_metrics(score_tokens(m, w.valid), w.ectx);
  const MetricReport after = compute_metrics(score_tokens(m2, w.valid), w.ectx);
  CHECK(before.ppl == after.ppl);
  CHECK(before.upp == after.upp);
  CHECK(before.unk_count == after.unk_count);
  CHECK_THROWS_AS(rnnlm_from_checkpoint(loaded), ParseError);  // kind mismatch
}

TEST_CASE("checkpoint corruption is reported precisely") {
  FitWorld w;
  NklmModel m(w.mc, w.vocab, w.kg);
  const Checkpoint ckpt = make_checkpoint(m, w.short_run(), FitResult{});
  const std::string path = temp_path("ckpt_corrupt") + ".bin";
  save_checkpoint(path, ckpt);
  std::ifstream f(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  f.close();

  auto write_bytes = [&](const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
  };

  SUBCASE("bad magic") {
    std::string bad = bytes;
    bad[0] = 'X';
    write_bytes(bad);
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  }
  SUBCASE("future version") {
    std::string bad = bytes;
    bad[8] = 9;
    write_bytes(bad);
    CHECK_THROWS_AS(load_checkpoint(path), VersionError);
  }
  SUBCASE("truncation names the tensor it lands in") {
    write_bytes(bytes.substr(0, bytes.size() - 11));
    try {
      load_checkpoint(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      // the last tensor in sorted order is the vocabulary MLP bias chain
      CHECK(std::string(e.what()).find("tensor '") != std::string::npos);
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }
  SUBCASE("trailing bytes are rejected") {
    write_bytes(bytes + "x");
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint(path + ".nope"), IoError); }
  std::remove(path.c_str());
}

TEST_CASE("rnnlm checkpoints round-trip as well") {
  FitWorld w;
  RnnlmConfig rc;
  rc.word_dim = 8;
  rc.hidden_dim = 8;
  rc.layers = 1;
  RnnlmModel m(rc, w.vocab);
  const Checkpoint ckpt = make_checkpoint(m, w.short_run(), FitResult{});
  const std::string path = temp_path("ckpt_rnn") + ".bin";
  save_checkpoint(path, ckpt);
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.kind == "rnnlm");
  RnnlmModel m2 = rnnlm_from_checkpoint(loaded);
  CHECK(param_fingerprint(m2.params()) == param_fingerprint(m.params()));
  CHECK_THROWS_AS(nklm_from_checkpoint(loaded), ParseError);  // kind mismatch
  std::remove(path.c_str());
}
