#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nklm/corpus.hpp"
#include "nklm/eval.hpp"
#include "nklm/model.hpp"

namespace nklm {

struct TrainConfig {
  std::size_t unroll = 30;
  std::size_t batch = 1;  // windows accumulated per parameter update
  double lr0 = 0.5;       // 0.5 for NKLM, 1.5 for the RNNLM baseline
  double decay = 0.98;    // multiplied in after every epoch
  std::size_t epochs = 25;
  double clip = 5.0;
  std::uint64_t seed = 1;
  std::string ablation = "none";  // none | no-copy | no-fact-no-copy | no-transe
  std::string embedding_mode = "trained";  // trained | random

  void validate() const;  // throws ConfigError
};

// Applies an ablation name to the model/embedding switches it controls.
void apply_ablation(const std::string& ablation, NklmConfig& model_cfg,
                    std::string& embedding_mode);

double lr_at(const TrainConfig& cfg, std::size_t epoch);

struct MetricRow {
  int epoch = 0;
  std::string split;
  MetricReport report;
};

// CSV with header epoch,split,ppl,upp,upp_f,unk_count.
std::string metrics_csv(const std::vector<MetricRow>& rows);
void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);

struct FitResult {
  std::vector<MetricRow> history;   // one valid row per epoch
  std::vector<double> train_loss;   // mean per-token training loss per epoch
  int best_epoch = -1;
  double best_valid_ppl = 0.0;
};

// Teacher-forced truncated BPTT with per-window gradient normalization,
// elementwise clipping, per-epoch lr decay and best-validation selection.
// The model is left holding the best-validation parameters. Deterministic
// given the config seed. Throws TrainError with epoch/topic context when a
// loss goes non-finite.
FitResult fit(NklmModel& model, const Corpus& train_split, const Corpus& valid_split,
              const TrainConfig& cfg, const EvalContext& ectx);
FitResult fit(RnnlmModel& model, const Corpus& train_split, const Corpus& valid_split,
              const TrainConfig& cfg, const EvalContext& ectx);

struct Checkpoint {
  std::uint32_t version = 1;
  std::string kind;  // "nklm" | "rnnlm"
  std::string config_json;  // model + train config snapshot, JSON text
  std::vector<std::string> vocab_content;
  int epoch = -1;
  std::vector<MetricRow> history;
  ParamStore params;
};

Checkpoint make_checkpoint(const NklmModel& model, const TrainConfig& tc, const FitResult& fit);
Checkpoint make_checkpoint(const RnnlmModel& model, const TrainConfig& tc, const FitResult& fit);

// Versioned binary container: magic, version, JSON header (config, vocab,
// epoch, history), then named little-endian float64 tensors.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds a runnable model from a checkpoint (including the frozen
// embedding tensors stored with it). Throws ParseError on any mismatch
// between the stored tensors and the reconstructed architecture.
NklmModel nklm_from_checkpoint(const Checkpoint& ckpt);
RnnlmModel rnnlm_from_checkpoint(const Checkpoint& ckpt);

}  // namespace nklm
