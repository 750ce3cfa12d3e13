#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "conner/evaluation.hpp"
#include "conner/prob_algebra.hpp"
#include "conner/rng.hpp"
#include "conner/tagger.hpp"
#include "conner/translation.hpp"
#include "conner/vocab.hpp"

namespace conner {

// Which loss terms are trained, mirroring the ablation rows of the method:
//   conner          CE + alpha*drop (labeled) + beta*trans (pairs)
//   vanilla         CE only
//   trans-unlabel   CE + beta*trans
//   dropout-label   CE + alpha*drop on labeled sentences
//   trans-label     CE + beta*trans on pairs built from labeled data
//   dropout-unlabel CE + alpha*drop on unlabeled target sentences
enum class RunMode {
  conner,
  vanilla,
  trans_unlabel,
  dropout_label,
  trans_label,
  dropout_unlabel,
};

const char* run_mode_name(RunMode mode);
RunMode parse_run_mode(const std::string& name);

bool mode_uses_dropout_loss(RunMode mode);
bool mode_uses_trans_loss(RunMode mode);
// True when the dropout-consistency stream is the unlabeled corpus rather
// than the labeled batch.
bool mode_dropout_on_unlabeled(RunMode mode);

struct TrainingConfig {
  double alpha = 0.5;
  double beta = 0.5;
  DivergenceMode divergence = DivergenceMode::bi_kl;
  RunMode mode = RunMode::conner;
  std::size_t labeled_batch_size = 16;
  std::size_t pair_batch_size = 16;
  std::size_t epochs = 10;
  double lr = 0.05;
  std::uint64_t seed = 0;
  std::size_t patience = 0;  // epochs without dev improvement; 0 disables
};

void validate_training_config(const TrainingConfig& config);

struct EpochStats {
  double ce = 0.0;
  double drop = 0.0;
  double trans = 0.0;
  double dev_f1 = 0.0;
};

struct TrainingReport {
  TrainingConfig config;  // the effective configuration, echoed verbatim
  std::vector<EpochStats> epochs;
  std::size_t selected_epoch = 0;  // 1-based index of the kept checkpoint
  double best_dev_f1 = 0.0;
  EvalResult test_result;
  DropCounts pipeline_drops;  // echoed from the pair file
  std::size_t pairs_used = 0;
};

// Two stochastic forward passes of the same sentence; per-token symmetric KL
// between the two emission distributions, averaged over tokens. Returns the
// unweighted loss and accumulates weight * d(loss)/d(params) into grads.
// Gradients flow through both passes. With dropout rate 0 the loss is
// exactly 0.
double dropout_consistency_loss(const Tagger& tagger,
                                std::span<const int> token_ids, Rng& rng,
                                double weight, TaggerGradients& grads);

// Span-level consistency between the two sides of a conjugate pair. Both
// forwards run with dropout off. Token distributions over each span are
// collapsed with token_to_span; the configured divergence couples them and
// decides which side receives gradients. Returns the unweighted loss and
// accumulates weight * d(loss)/d(params) into grads.
double translation_consistency_loss(const Tagger& tagger,
                                    const Vocabulary& vocab,
                                    const ConjugatePair& pair,
                                    DivergenceMode mode, double weight,
                                    TaggerGradients& grads);

// One sentence of CRF negative log-likelihood. Dropout is controlled by the
// caller via `dropout_on` (training passes true). Returns the unweighted
// loss and accumulates weight-scaled gradients.
double supervised_loss(const Tagger& tagger, std::span<const int> token_ids,
                       const std::vector<Tag>& gold, Rng* rng, bool dropout_on,
                       double weight, TaggerGradients& grads);

struct StepBatch {
  std::vector<const TaggedSentence*> labeled;
  std::vector<const ConjugatePair*> pairs;
  std::vector<const TaggedSentence*> unlabeled;
};

struct StepResult {
  double total = 0.0;
  double ce = 0.0;     // batch-mean CRF NLL
  double drop = 0.0;   // batch-mean dropout-consistency loss (before alpha)
  double trans = 0.0;  // batch-mean translation-consistency loss (before beta)
};

// Composes the configured loss terms over one step:
//   total = mean(CE) + alpha * mean(drop) + beta * mean(trans)
// with each mean over its own stream. Terms outside the run mode are skipped
// entirely. Accumulates gradients into `grads` (caller zeroes beforehand).
// Throws TrainingDivergedError on a non-finite total.
StepResult total_loss_step(const Tagger& tagger, const Vocabulary& vocab,
                           const StepBatch& batch, const TrainingConfig& config,
                           Rng& rng, TaggerGradients& grads);

// Viterbi predictions for one sentence (dropout off).
std::vector<Tag> predict_tags(const Tagger& tagger, const Vocabulary& vocab,
                              const std::vector<std::string>& tokens);

// Decodes the whole corpus and scores it against the gold tags.
EvalResult evaluate_tagger(const Tagger& tagger, const Vocabulary& vocab,
                           const std::vector<TaggedSentence>& corpus);

// Full training loop: shuffled labeled batches, cycled pair and unlabeled
// streams, one optimizer step per labeled batch, per-epoch dev scoring, and
// best-dev checkpointing (strict improvement; ties keep the earlier epoch so
// a dev plateau counts toward the patience budget). The tagger is left
// holding the selected parameters; test metrics are computed with them.
// Deterministic given config.seed.
TrainingReport train_run(Tagger& tagger, const Vocabulary& vocab,
                         const std::vector<TaggedSentence>& labeled,
                         const std::vector<ConjugatePair>& pairs,
                         const std::vector<TaggedSentence>& unlabeled,
                         const std::vector<TaggedSentence>& dev,
                         const std::vector<TaggedSentence>& test,
                         const TrainingConfig& config,
                         const DropCounts& pipeline_drops = {});

// Report I/O: a JSON document plus a plain-text per-epoch log.
void write_training_report(const TrainingReport& report,
                           const std::string& path);
void append_epoch_log(const TrainingReport& report, const std::string& path);

}  // namespace conner
