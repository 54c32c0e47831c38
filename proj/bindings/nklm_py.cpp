#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nklm/corpus.hpp"
#include "nklm/digest.hpp"
#include "nklm/errors.hpp"
#include "nklm/eval.hpp"
#include "nklm/layers.hpp"
#include "nklm/pipeline.hpp"
#include "nklm/train.hpp"

namespace py = pybind11;
using namespace nklm;

namespace {

// The pipeline entry point with keyword-friendly paths; overrides is a JSON
// object rendered to text on the C++ side of the fence.
py::dict run(const std::string& command, const std::string& out_dir, const std::string& config,
             const std::string& corpus, const std::string& triples, const std::string& embeddings,
             const std::string& checkpoint, const std::string& aliases,
             const std::string& overrides_json) {
  RunRequest req;
  req.command = command;
  req.out_dir = out_dir;
  req.config_path = config;
  req.corpus_path = corpus;
  req.triples_path = triples;
  req.embeddings_path = embeddings;
  req.checkpoint_path = checkpoint;
  req.aliases_path = aliases;
  if (!overrides_json.empty()) req.overrides_json = overrides_json;
  req.argv = {command, "--out", out_dir};  // bindings run; argv is informational

  const RunReport rep = run_pipeline(req);
  py::dict out;
  out["settings"] = settings_to_json(rep.settings);
  out["inputs"] = rep.inputs;
  out["outputs"] = rep.outputs;
  out["manifest"] = rep.manifest_path;
  out["text"] = rep.text;
  return out;
}

py::dict eval_checkpoint(const std::string& checkpoint_path, const std::string& corpus_path,
                         const std::string& split, bool word_term_only) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Corpus corpus = read_dataset(corpus_path);
  Corpus topics;
  if (split == "all") {
    topics = corpus;
  } else {
    const Split want = parse_split(split);
    for (const auto& at : corpus)
      if (at.doc.split == want) topics.push_back(at);
  }
  if (topics.empty()) throw DataError("no topics in split '" + split + "'");

  MetricReport r;
  if (ckpt.kind == "nklm") {
    const NklmModel model = nklm_from_checkpoint(ckpt);
    r = compute_metrics(score_tokens(model, topics, word_term_only),
                        make_eval_context(corpus, model.vocab()));
  } else {
    const RnnlmModel model = rnnlm_from_checkpoint(ckpt);
    r = compute_metrics(score_tokens(model, topics), make_eval_context(corpus, model.vocab()));
  }
  py::dict out;
  out["model"] = ckpt.kind;
  out["split"] = split;
  out["ppl"] = r.ppl;
  out["upp"] = r.upp;
  out["upp_f"] = r.upp_f;
  out["unk_count"] = r.unk_count;
  out["tokens"] = r.tokens;
  out["upp_divisor"] = r.upp_divisor;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "neural knowledge language model core";
#ifdef NKLM_VERSION
  m.attr("__version__") = NKLM_VERSION;
#else
  m.attr("__version__") = "0.0.0";
#endif

  py::register_exception<Error>(m, "NklmError");

  m.def("run", &run, py::arg("command"), py::arg("out_dir"), py::arg("config") = "",
        py::arg("corpus") = "", py::arg("triples") = "", py::arg("embeddings") = "",
        py::arg("checkpoint") = "", py::arg("aliases") = "", py::arg("overrides") = "",
        "Run one pipeline subcommand; returns settings, artifact hashes, manifest path, text.");

  m.def("evaluate", &eval_checkpoint, py::arg("checkpoint"), py::arg("corpus"),
        py::arg("split") = "test", py::arg("word_term_only") = false,
        "Score a split with a trained checkpoint and return the metric dict.");

  m.def("softmax", [](const Vec& logits) { return softmax(logits); }, py::arg("logits"));
  m.def("fold_word", &fold_word, py::arg("word"));
  m.def("sha256_hex", [](const std::string& bytes) { return sha256_hex(bytes); },
        py::arg("bytes"));
}
