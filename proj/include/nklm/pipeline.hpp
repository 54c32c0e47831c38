#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nklm {

// Every tunable the pipeline reads, one flat namespace shared by all
// subcommands. A config file is a JSON object over these keys (documented in
// docs/config_keys.md); command-line flags override the file, the file
// overrides the defaults below.
struct Settings {
  // model
  std::string model = "nklm";  // nklm | rnnlm
  int word_dim = 32;
  int entity_dim = 16;
  int position_dim = 8;
  int max_positions = 16;
  int hidden_dim = 64;
  int layers = 2;
  double dropout = 0.0;
  // training
  int unroll = 30;
  int batch = 1;
  double lr0 = 0.0;  // 0 -> per-model default (0.5 nklm, 1.5 rnnlm)
  double decay = 0.98;
  int epochs = 25;
  double clip = 5.0;
  std::string ablation = "none";  // none | no-copy | no-fact-no-copy | no-transe
  std::uint64_t seed = 1;
  int vocab_size = 200;
  // synthetic corpus
  int topics = 240;
  int min_facts = 3;
  int max_facts = 10;
  int min_sentences = 3;
  int max_sentences = 5;
  double anchor_prob = 0.4;
  // knowledge-graph embeddings
  int kg_dim = 16;
  int kg_epochs = 100;
  double kg_margin = 1.0;
  double kg_lr = 0.01;
  std::string embedding_mode = "trained";  // trained | random
  // evaluation / decoding
  std::string split = "test";  // train | valid | test | all
  bool word_term_only = false;
  std::string decode = "greedy";  // greedy | stochastic
  int max_len = 40;
  int topic = -1;  // -1: first topic of --split
  int fact = -1;   // edit-probe target fact id
  std::string object_entity;  // edit-probe replacement entity id
  std::string object_words;   // space-separated replacement surface words
  std::string warmup;         // space-separated; empty: first two topic tokens
};

// Overlays a JSON object onto `s`. `origin` names the source in errors.
// Unknown keys and ill-typed values throw ConfigError.
void apply_settings_json(Settings& s, const std::string& json_text, const std::string& origin);
// Canonical JSON snapshot of every key (sorted, byte-deterministic).
std::string settings_to_json(const Settings& s);

struct RunRequest {
  std::string command;  // synth-corpus | align | embed-kg | train | eval |
                        // sample | edit-probe | trace
  std::string config_path;            // optional settings file
  std::string overrides_json = "{}";  // flag overrides, highest precedence
  std::string corpus_path;
  std::string triples_path;
  std::string embeddings_path;
  std::string checkpoint_path;
  std::string aliases_path;
  std::string out_dir;             // artifacts land here; created if absent
  std::vector<std::string> argv;   // recorded verbatim in the manifest
};

struct RunReport {
  Settings settings;                           // resolved
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  std::string manifest_path;
  std::string text;  // human-readable summary the CLI prints
};

// Executes one subcommand: resolves settings, hashes inputs, writes the
// artifacts and a <command>.manifest.json into out_dir, and returns the
// report. Throws the module errors unchanged (IoError on a missing input
// file, ConfigError on bad settings, ...).
RunReport run_pipeline(const RunRequest& req);

}  // namespace nklm
