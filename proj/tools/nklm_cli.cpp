#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nklm/errors.hpp"
#include "nklm/pipeline.hpp"

using json = nlohmann::json;

namespace {

// Flag storage; only flags the user actually passed land in the overrides
// object, so config-file values survive unless explicitly overridden.
struct FlagVals {
  std::uint64_t seed = 0;
  int epochs = 0, vocab_size = 0, topics = 0, topic = 0, fact = 0, max_len = 0;
  std::string ablation, model, split, decode, warmup, object_entity, object_words;
  bool word_term_only = false;
};

using Appenders = std::vector<std::function<void(json&)>>;

template <typename T>
void reg(CLI::App* cmd, Appenders& apps, const std::string& flag, T& var, const std::string& key,
         const std::string& desc) {
  CLI::Option* o = cmd->add_option(flag, var, desc);
  apps.push_back([o, &var, key](json& j) {
    if (o->count() > 0) j[key] = var;
  });
}

void reg_flag(CLI::App* cmd, Appenders& apps, const std::string& flag, bool& var,
              const std::string& key, const std::string& desc) {
  CLI::Option* o = cmd->add_flag(flag, var, desc);
  apps.push_back([o, &var, key](json& j) {
    if (o->count() > 0) j[key] = var;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural knowledge language model pipeline"};
  app.require_subcommand(1);

  nklm::RunRequest req;
  req.argv.assign(argv + 1, argv + argc);
  FlagVals fv;
  Appenders apps;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", req.config_path, "JSON settings file (docs/config_keys.md)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", req.out_dir, "output directory for artifacts and the manifest")
        ->required();
    reg(cmd, apps, "--seed", fv.seed, "seed", "master seed for all randomness");
  };

  CLI::App* synth = app.add_subcommand("synth-corpus", "generate a synthetic aligned corpus");
  common(synth);
  reg(synth, apps, "--topics", fv.topics, "topics", "number of topics to synthesize");

  CLI::App* align = app.add_subcommand("align", "recompute fact alignments for a dataset");
  common(align);
  align->add_option("--corpus", req.corpus_path, "dataset to align")->required();
  align->add_option("--aliases", req.aliases_path, "alias table (alias<tab>canonical)");

  CLI::App* embed = app.add_subcommand("embed-kg", "train knowledge-graph embeddings");
  common(embed);
  embed->add_option("--triples", req.triples_path, "triples file")->required();

  CLI::App* train = app.add_subcommand("train", "train a model on an aligned dataset");
  common(train);
  train->add_option("--corpus", req.corpus_path, "aligned dataset")->required();
  train->add_option("--embeddings", req.embeddings_path, "entity/relation embeddings (nklm)");
  reg(train, apps, "--model", fv.model, "model", "nklm or rnnlm");
  reg(train, apps, "--vocab-size", fv.vocab_size, "vocab_size", "vocabulary size incl. specials");
  reg(train, apps, "--epochs", fv.epochs, "epochs", "training epochs");
  train->add_option("--ablation", fv.ablation, "ablation switch")
      ->check(CLI::IsMember({"none", "no-copy", "no-fact-no-copy", "no-transe"}));
  apps.push_back([&](json& j) {
    if (train->count("--ablation") > 0) j["ablation"] = fv.ablation;
  });

  CLI::App* eval = app.add_subcommand("eval", "score a split and print the metric row");
  common(eval);
  eval->add_option("--checkpoint", req.checkpoint_path, "model checkpoint")->required();
  eval->add_option("--corpus", req.corpus_path, "aligned dataset")->required();
  reg(eval, apps, "--split", fv.split, "split", "train, valid, test or all");
  reg_flag(eval, apps, "--word-term-only", fv.word_term_only, "word_term_only",
           "score word likelihood only (drop fact/gate factors)");

  CLI::App* sample = app.add_subcommand("sample", "decode a description for one topic");
  CLI::App* probe = app.add_subcommand("edit-probe", "swap a fact's object and re-decode");
  CLI::App* trace = app.add_subcommand("trace", "write per-sentence copy/fact trace CSVs");
  for (CLI::App* cmd : {sample, probe, trace}) {
    common(cmd);
    cmd->add_option("--checkpoint", req.checkpoint_path, "nklm checkpoint")->required();
    cmd->add_option("--corpus", req.corpus_path, "aligned dataset")->required();
    reg(cmd, apps, "--split", fv.split, "split", "split searched when --topic is absent");
    reg(cmd, apps, "--topic", fv.topic, "topic", "topic id (default: first of --split)");
  }
  for (CLI::App* cmd : {sample, probe}) {
    reg(cmd, apps, "--warmup", fv.warmup, "warmup", "space-separated warmup tokens");
    reg(cmd, apps, "--max-len", fv.max_len, "max_len", "decode length limit");
  }
  reg(sample, apps, "--decode", fv.decode, "decode", "greedy or stochastic");
  probe->add_option("--fact", fv.fact, "fact id to edit")->required();
  apps.push_back([&](json& j) {
    if (probe->count("--fact") > 0) j["fact"] = fv.fact;
  });
  probe->add_option("--object", fv.object_entity, "replacement object entity id")->required();
  apps.push_back([&](json& j) {
    if (probe->count("--object") > 0) j["object_entity"] = fv.object_entity;
  });
  probe->add_option("--object-words", fv.object_words, "replacement surface words")->required();
  apps.push_back([&](json& j) {
    if (probe->count("--object-words") > 0) j["object_words"] = fv.object_words;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, returns 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the usage error
    return 2;
  }

  req.command = app.get_subcommands().front()->get_name();
  json overrides = json::object();
  for (const auto& append : apps) append(overrides);
  req.overrides_json = overrides.dump();

  try {
    const nklm::RunReport rep = nklm::run_pipeline(req);
    std::fputs(rep.text.c_str(), stdout);
    std::printf("manifest %s\n", rep.manifest_path.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
