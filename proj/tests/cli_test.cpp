#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "nklm/digest.hpp"
#include "nklm/train.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int status = -1;
  std::string out, err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shared scratch area; commands run with absolute paths, no cwd games.
struct CliWorld {
  std::string dir;

  CliWorld() {
    dir = "/tmp/nklm_cli_" + std::to_string(::getpid());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }

  std::string path(const std::string& rel) const { return dir + "/" + rel; }

  CmdResult run(const std::string& args) const {
    static int calls = 0;
    const std::string out_file = path("stdout." + std::to_string(calls));
    const std::string err_file = path("stderr." + std::to_string(calls));
    ++calls;
    const std::string cmd =
        std::string(NKLM_CLI_PATH) + " " + args + " >" + out_file + " 2>" + err_file;
    const int rc = std::system(cmd.c_str());
    CmdResult r;
    r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
  }
};

CliWorld& world() {
  static CliWorld w;
  return w;
}

// Tiny end-to-end artifacts shared by the later cases; built once.
struct Artifacts {
  std::string corpus, triples, embeddings, config;
  std::string nklm_dir, rnnlm_dir, nocopy_dir;

  Artifacts() {
    CliWorld& w = world();
    REQUIRE(w.run("synth-corpus --out " + w.path("synth") + " --topics 24 --seed 3").status == 0);
    corpus = w.path("synth/corpus.jsonl");
    triples = w.path("synth/triples.tsv");

    REQUIRE(w.run("embed-kg --triples " + triples + " --seed 3 --out " + w.path("kg")).status ==
            0);
    embeddings = w.path("kg/embeddings.tsv");

    config = w.path("tiny.json");
    std::ofstream(config) << R"({"word_dim": 12, "entity_dim": 16, "position_dim": 4,
      "hidden_dim": 16, "layers": 1, "epochs": 3, "vocab_size": 120, "unroll": 20})";

    nklm_dir = w.path("run_nklm");
    rnnlm_dir = w.path("run_rnnlm");
    nocopy_dir = w.path("run_nocopy");
    const std::string base = "train --corpus " + corpus + " --config " + config + " --seed 7 ";
    REQUIRE(w.run(base + "--embeddings " + embeddings + " --out " + nklm_dir).status == 0);
    REQUIRE(w.run(base + "--model rnnlm --out " + rnnlm_dir).status == 0);
    REQUIRE(w.run(base + "--embeddings " + embeddings + " --ablation no-copy --out " +
                  nocopy_dir)
                .status == 0);
  }
};

Artifacts& artifacts() {
  static Artifacts a;
  return a;
}

json manifest_of(const std::string& run_dir, const std::string& command) {
  return json::parse(slurp(run_dir + "/" + command + ".manifest.json"));
}

}  // namespace

using namespace nklm;

TEST_CASE("help exits 0 and lists every subcommand") {
  const CmdResult r = world().run("--help");
  CHECK(r.status == 0);
  for (const char* sub : {"synth-corpus", "align", "embed-kg", "train", "eval", "sample",
                          "edit-probe", "trace"})
    CHECK(r.out.find(sub) != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CliWorld& w = world();
  CHECK(w.run("").status == 2);                       // subcommand required
  CHECK(w.run("frobnicate --out x").status == 2);     // unknown subcommand
  CHECK(w.run("synth-corpus").status == 2);           // --out missing
  CHECK(w.run("synth-corpus --out x --bogus 1").status == 2);
  CHECK(w.run("train --corpus c --out x --ablation no-such").status == 2);
  CHECK(w.run("edit-probe --checkpoint c --corpus c --out x").status == 2);  // --fact et al
}

TEST_CASE("missing input file exits 1 and names the path") {
  const CmdResult r =
      world().run("align --corpus /nowhere/missing.jsonl --out " + world().path("x"));
  CHECK(r.status == 1);
  CHECK(r.err.find("/nowhere/missing.jsonl") != std::string::npos);
}

TEST_CASE("synth-corpus writes dataset, triples, and a complete manifest") {
  const Artifacts& a = artifacts();
  CHECK(fs::exists(a.corpus));
  CHECK(fs::exists(a.triples));

  const json m = manifest_of(world().path("synth"), "synth-corpus");
  CHECK(m.at("command") == "synth-corpus");
  CHECK(m.at("seed") == 3);
  CHECK(m.at("argv").is_array());
  CHECK(m.at("config").at("topics") == 24);
  CHECK(m.contains("timestamp"));
  // recorded hashes match the files on disk
  for (const auto& [path, hash] : m.at("outputs").items())
    CHECK(sha256_file(path) == hash.get<std::string>());
  CHECK(m.at("outputs").size() == 2);
}

TEST_CASE("same seed reproduces artifact hashes, another seed does not") {
  CliWorld& w = world();
  const Artifacts& a = artifacts();
  REQUIRE(w.run("synth-corpus --out " + w.path("synth_b") + " --topics 24 --seed 3").status == 0);
  REQUIRE(w.run("synth-corpus --out " + w.path("synth_c") + " --topics 24 --seed 4").status == 0);

  const json m1 = manifest_of(w.path("synth"), "synth-corpus");
  const json m2 = manifest_of(w.path("synth_b"), "synth-corpus");
  const json m3 = manifest_of(w.path("synth_c"), "synth-corpus");
  auto hashes = [](const json& m) {
    std::set<std::string> hs;
    for (const auto& [path, hash] : m.at("outputs").items()) hs.insert(hash.get<std::string>());
    return hs;
  };
  CHECK(hashes(m1) == hashes(m2));
  CHECK(hashes(m1) != hashes(m3));
  (void)a;
}

TEST_CASE("align on a gold corpus reports full agreement and reproduces it byte for byte") {
  CliWorld& w = world();
  const Artifacts& a = artifacts();
  const CmdResult r = w.run("align --corpus " + a.corpus + " --out " + w.path("aligned"));
  REQUIRE(r.status == 0);
  CHECK(r.out.find("gold agreement 1184/1184 (100.0000%)") != std::string::npos);
  CHECK(sha256_file(w.path("aligned/aligned.jsonl")) == sha256_file(a.corpus));
}

TEST_CASE("train --ablation no-copy reaches the checkpoint config") {
  const Artifacts& a = artifacts();
  const Checkpoint ck = load_checkpoint(a.nocopy_dir + "/model.ckpt");
  CHECK(ck.kind == "nklm");
  const json cfg = json::parse(ck.config_json);
  CHECK(cfg.at("model").at("no_copy") == true);
  CHECK(cfg.at("model").at("no_fact") == false);
  CHECK(cfg.at("train").at("ablation") == "no-copy");
  const NklmModel m = nklm_from_checkpoint(ck);
  CHECK(m.config().no_copy);
}

TEST_CASE("trained checkpoints load and carry their history") {
  const Artifacts& a = artifacts();
  const Checkpoint ck = load_checkpoint(a.nklm_dir + "/model.ckpt");
  CHECK(ck.kind == "nklm");
  CHECK(ck.history.size() == 3);
  CHECK(ck.epoch >= 0);

  const Checkpoint rk = load_checkpoint(a.rnnlm_dir + "/model.ckpt");
  CHECK(rk.kind == "rnnlm");

  // metrics.csv: header + one valid row per epoch
  const std::string csv = slurp(a.nklm_dir + "/metrics.csv");
  CHECK(csv.rfind("epoch,split,ppl,upp,upp_f,unk_count\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("eval prints the metric row and writes a parseable csv") {
  CliWorld& w = world();
  const Artifacts& a = artifacts();
  const CmdResult r = w.run("eval --checkpoint " + a.nklm_dir + "/model.ckpt --corpus " +
                            a.corpus + " --split test --out " + w.path("ev"));
  REQUIRE(r.status == 0);
  CHECK(r.out.find("model\tsplit\tppl\tupp\tupp_f\tunk\n") != std::string::npos);
  CHECK(r.out.find("nklm\ttest\t") != std::string::npos);

  const std::string csv = slurp(w.path("ev/eval.csv"));
  CHECK(csv.rfind("model,split,ppl,upp,upp_f,unk_count,tokens,upp_divisor\n", 0) == 0);
  std::istringstream lines(csv);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(row.rfind("nklm,test,", 0) == 0);

  // the rnnlm checkpoint evaluates through the same command
  const CmdResult r2 = w.run("eval --checkpoint " + a.rnnlm_dir + "/model.ckpt --corpus " +
                             a.corpus + " --split test --out " + w.path("ev_r"));
  REQUIRE(r2.status == 0);
  CHECK(r2.out.find("rnnlm\ttest\t") != std::string::npos);
}

TEST_CASE("every run is reproducible from its manifest argv") {
  CliWorld& w = world();
  const Artifacts& a = artifacts();
  const json before = manifest_of(a.nklm_dir, "train");

  // wipe the artifacts, then replay the recorded argv verbatim
  fs::remove(a.nklm_dir + "/model.ckpt");
  fs::remove(a.nklm_dir + "/metrics.csv");
  std::string argv;
  for (const auto& piece : before.at("argv")) argv += piece.get<std::string>() + " ";
  REQUIRE(w.run(argv).status == 0);

  const json after = manifest_of(a.nklm_dir, "train");
  CHECK(before.at("outputs") == after.at("outputs"));
  CHECK(before.at("inputs") == after.at("inputs"));
}

TEST_CASE("sample, trace and edit-probe emit their artifacts") {
  CliWorld& w = world();
  const Artifacts& a = artifacts();
  const std::string common =
      " --checkpoint " + a.nklm_dir + "/model.ckpt --corpus " + a.corpus + " --split test";

  const CmdResult s = w.run("sample" + common + " --max-len 20 --out " + w.path("samp"));
  REQUIRE(s.status == 0);
  CHECK(fs::exists(w.path("samp/sample.txt")));
  CHECK(s.out.find("rendered:") != std::string::npos);

  const CmdResult t = w.run("trace" + common + " --out " + w.path("tr"));
  REQUIRE(t.status == 0);
  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(w.path("tr")))
    if (e.path().filename().string().rfind("trace_topic", 0) == 0) ++csvs;
  CHECK(csvs >= 1);

  // edit a real fact of the probed topic; the probe must leave params alone
  const CmdResult p = w.run("edit-probe" + common +
                            " --fact 1 --object 1 --object-words \"Korvik Hollow\" --out " +
                            w.path("probe"));
  REQUIRE(p.status == 0);
  const json pr = json::parse(slurp(w.path("probe/probe.json")));
  CHECK(pr.at("params_unchanged") == true);
  CHECK(pr.at("new_words") == json::array({"Korvik", "Hollow"}));

  // sampling from an rnnlm checkpoint is a runtime error, not a crash
  const CmdResult bad = w.run("sample --checkpoint " + a.rnnlm_dir + "/model.ckpt --corpus " +
                              a.corpus + " --out " + w.path("samp_bad"));
  CHECK(bad.status == 1);
  CHECK(bad.err.find("nklm checkpoint") != std::string::npos);
}

TEST_CASE("flags override the config file") {
  CliWorld& w = world();
  const Artifacts& a = artifacts();
  // tiny.json says epochs 3; the flag forces 1
  const CmdResult r = w.run("train --corpus " + a.corpus + " --embeddings " + a.embeddings +
                            " --config " + a.config + " --epochs 1 --seed 7 --out " +
                            w.path("run_e1"));
  REQUIRE(r.status == 0);
  const Checkpoint ck = load_checkpoint(w.path("run_e1/model.ckpt"));
  CHECK(ck.history.size() == 1);
  const json m = manifest_of(w.path("run_e1"), "train");
  CHECK(m.at("config").at("epochs") == 1);
  CHECK(m.at("config").at("hidden_dim") == 16);  // from the file
}
