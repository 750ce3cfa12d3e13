#include "conner/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "conner/crf.hpp"
#include "conner/error.hpp"
#include "conner/logmath.hpp"

namespace conner {

namespace {

// Maps span-distribution gradients (with respect to token probabilities)
// through the emission softmax and the network for the tokens of one span.
void backprop_span_token_grads(const Tagger& tagger, const ForwardCache& cache,
                               const SpanBounds& span,
                               const std::vector<std::vector<double>>& d_probs,
                               double weight, TaggerGradients& grads) {
  const std::size_t num_tags = tagger.label_space().size();
  Mat d_logits(cache.token_ids.size(), num_tags);
  bool any = false;
  for (int u = span.start; u <= span.end; ++u) {
    const auto& dp = d_probs[static_cast<std::size_t>(u - span.start)];
    for (double v : dp) {
      if (v != 0.0) {
        any = true;
        break;
      }
    }
    softmax_backward(cache.dists.row(static_cast<std::size_t>(u)), dp.data(),
                     d_logits.row(static_cast<std::size_t>(u)), num_tags);
  }
  if (!any) return;
  if (weight != 1.0) {
    for (std::size_t i = 0; i < d_logits.size(); ++i) d_logits.data()[i] *= weight;
  }
  tagger.backward(cache, d_logits, grads);
}

std::vector<std::size_t> gold_indices(const LabelSpace& space,
                                      const std::vector<Tag>& tags) {
  std::vector<std::size_t> idx;
  idx.reserve(tags.size());
  for (const Tag& t : tags) idx.push_back(space.index_of(t));
  return idx;
}

}  // namespace

const char* run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::conner: return "conner";
    case RunMode::vanilla: return "vanilla";
    case RunMode::trans_unlabel: return "trans-unlabel";
    case RunMode::dropout_label: return "dropout-label";
    case RunMode::trans_label: return "trans-label";
    case RunMode::dropout_unlabel: return "dropout-unlabel";
  }
  return "?";
}

RunMode parse_run_mode(const std::string& name) {
  for (RunMode mode :
       {RunMode::conner, RunMode::vanilla, RunMode::trans_unlabel,
        RunMode::dropout_label, RunMode::trans_label,
        RunMode::dropout_unlabel}) {
    if (name == run_mode_name(mode)) return mode;
  }
  throw InvalidConfigError("unknown run mode: " + name);
}

bool mode_uses_dropout_loss(RunMode mode) {
  return mode == RunMode::conner || mode == RunMode::dropout_label ||
         mode == RunMode::dropout_unlabel;
}

bool mode_uses_trans_loss(RunMode mode) {
  return mode == RunMode::conner || mode == RunMode::trans_unlabel ||
         mode == RunMode::trans_label;
}

bool mode_dropout_on_unlabeled(RunMode mode) {
  return mode == RunMode::dropout_unlabel;
}

void validate_training_config(const TrainingConfig& config) {
  if (config.alpha < 0.0 || config.beta < 0.0) {
    throw InvalidConfigError("alpha and beta must be non-negative");
  }
  if (config.labeled_batch_size == 0 || config.pair_batch_size == 0) {
    throw InvalidConfigError("batch sizes must be >= 1");
  }
  if (config.epochs == 0) throw InvalidConfigError("epochs must be >= 1");
  if (config.lr <= 0.0) throw InvalidConfigError("learning rate must be positive");
}

double supervised_loss(const Tagger& tagger, std::span<const int> token_ids,
                       const std::vector<Tag>& gold, Rng* rng, bool dropout_on,
                       double weight, TaggerGradients& grads) {
  if (gold.size() != token_ids.size()) {
    throw InvalidInputError("gold tags do not match the sentence length");
  }
  const ForwardCache cache = tagger.forward(token_ids, dropout_on, rng);
  const CrfNllResult nll =
      crf_nll_and_gradient(cache.logits, tagger.params().transitions,
                           gold_indices(tagger.label_space(), gold),
                           tagger.label_space());
  Mat d_logits = nll.d_logits;
  for (std::size_t i = 0; i < d_logits.size(); ++i) d_logits.data()[i] *= weight;
  tagger.backward(cache, d_logits, grads);
  for (std::size_t i = 0; i < nll.d_transitions.size(); ++i) {
    grads.transitions.data()[i] += weight * nll.d_transitions.data()[i];
  }
  return nll.loss;
}

double dropout_consistency_loss(const Tagger& tagger,
                                std::span<const int> token_ids, Rng& rng,
                                double weight, TaggerGradients& grads) {
  const std::size_t n = token_ids.size();
  const std::size_t num_tags = tagger.label_space().size();
  const ForwardCache pass1 = tagger.forward(token_ids, true, &rng);
  const ForwardCache pass2 = tagger.forward(token_ids, true, &rng);

  const double inv_n = 1.0 / static_cast<double>(n);
  Mat d_probs1(n, num_tags);
  Mat d_probs2(n, num_tags);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* p1 = pass1.dists.row(i);
    const double* p2 = pass2.dists.row(i);
    loss += inv_n * bi_kl_divergence(std::span(p1, num_tags),
                                     std::span(p2, num_tags));
    // d/dx of ½[KL(p1‖p2) + KL(p2‖p1)]: each ordered KL contributes to both
    // of its arguments.
    add_kl_gradient(std::span(p1, num_tags), std::span(p2, num_tags),
                    0.5 * inv_n, d_probs1.row(i), d_probs2.row(i));
    add_kl_gradient(std::span(p2, num_tags), std::span(p1, num_tags),
                    0.5 * inv_n, d_probs2.row(i), d_probs1.row(i));
  }

  auto backprop = [&](const ForwardCache& cache, const Mat& d_probs) {
    Mat d_logits(n, num_tags);
    for (std::size_t i = 0; i < n; ++i) {
      softmax_backward(cache.dists.row(i), d_probs.row(i), d_logits.row(i),
                       num_tags);
    }
    for (std::size_t i = 0; i < d_logits.size(); ++i) {
      d_logits.data()[i] *= weight;
    }
    tagger.backward(cache, d_logits, grads);
  };
  backprop(pass1, d_probs1);
  backprop(pass2, d_probs2);
  return loss;
}

double translation_consistency_loss(const Tagger& tagger,
                                    const Vocabulary& vocab,
                                    const ConjugatePair& pair,
                                    DivergenceMode mode, double weight,
                                    TaggerGradients& grads) {
  const std::size_t num_tags = tagger.label_space().size();
  const std::vector<int> ids_a = vocab.encode(pair.original_tokens);
  const std::vector<int> ids_b = vocab.encode(pair.translated_tokens);
  const ForwardCache cache_a = tagger.forward(ids_a, false, nullptr);
  const ForwardCache cache_b = tagger.forward(ids_b, false, nullptr);

  auto span_dists = [&](const ForwardCache& cache, const SpanBounds& span) {
    std::vector<TokenDistribution> dists;
    dists.reserve(static_cast<std::size_t>(span.length()));
    for (int u = span.start; u <= span.end; ++u) {
      const double* row = cache.dists.row(static_cast<std::size_t>(u));
      dists.emplace_back(row, row + num_tags);
    }
    return dists;
  };
  const std::vector<TokenDistribution> dists_a =
      span_dists(cache_a, pair.original_span);
  const std::vector<TokenDistribution> dists_b =
      span_dists(cache_b, pair.translated_span);

  const SpanConsistencyResult res =
      span_loss_gradient(dists_a, dists_b, tagger.label_space(), mode);
  backprop_span_token_grads(tagger, cache_a, pair.original_span, res.grad_a,
                            weight, grads);
  backprop_span_token_grads(tagger, cache_b, pair.translated_span, res.grad_b,
                            weight, grads);
  return res.loss;
}

StepResult total_loss_step(const Tagger& tagger, const Vocabulary& vocab,
                           const StepBatch& batch, const TrainingConfig& config,
                           Rng& rng, TaggerGradients& grads) {
  StepResult result;
  const bool use_drop =
      mode_uses_dropout_loss(config.mode) && config.alpha > 0.0 &&
      tagger.config().dropout > 0.0;
  const bool use_trans =
      mode_uses_trans_loss(config.mode) && config.beta > 0.0;

  if (!batch.labeled.empty()) {
    const double w = 1.0 / static_cast<double>(batch.labeled.size());
    for (const TaggedSentence* sentence : batch.labeled) {
      const std::vector<int> ids = vocab.encode(sentence->tokens);
      result.ce += w * supervised_loss(tagger, ids, sentence->tags, &rng, true,
                                       w, grads);
    }
  }

  if (use_drop) {
    const auto& stream = mode_dropout_on_unlabeled(config.mode)
                             ? batch.unlabeled
                             : batch.labeled;
    if (!stream.empty()) {
      const double w = 1.0 / static_cast<double>(stream.size());
      for (const TaggedSentence* sentence : stream) {
        const std::vector<int> ids = vocab.encode(sentence->tokens);
        result.drop += w * dropout_consistency_loss(tagger, ids, rng,
                                                    config.alpha * w, grads);
      }
    }
  }

  if (use_trans && !batch.pairs.empty()) {
    const double w = 1.0 / static_cast<double>(batch.pairs.size());
    for (const ConjugatePair* pair : batch.pairs) {
      result.trans += w * translation_consistency_loss(
                              tagger, vocab, *pair, config.divergence,
                              config.beta * w, grads);
    }
  }

  result.total =
      result.ce + config.alpha * result.drop + config.beta * result.trans;
  if (!std::isfinite(result.total)) {
    throw TrainingDivergedError("non-finite loss");
  }
  return result;
}

std::vector<Tag> predict_tags(const Tagger& tagger, const Vocabulary& vocab,
                              const std::vector<std::string>& tokens) {
  const std::vector<int> ids = vocab.encode(tokens);
  const ForwardCache cache = tagger.forward(ids, false, nullptr);
  return viterbi_decode(cache.logits, tagger.params().transitions,
                        tagger.label_space());
}

EvalResult evaluate_tagger(const Tagger& tagger, const Vocabulary& vocab,
                           const std::vector<TaggedSentence>& corpus) {
  std::vector<std::vector<EntitySpan>> gold;
  std::vector<std::vector<EntitySpan>> pred;
  gold.reserve(corpus.size());
  pred.reserve(corpus.size());
  for (const TaggedSentence& sentence : corpus) {
    if (!sentence.labeled()) {
      throw InvalidInputError("cannot evaluate on an unlabeled corpus");
    }
    gold.push_back(decode_tags(sentence.tags, DecodeMode::strict));
    pred.push_back(decode_tags(predict_tags(tagger, vocab, sentence.tokens),
                               DecodeMode::strict));
  }
  return micro_f1(gold, pred, tagger.label_space().num_types());
}

TrainingReport train_run(Tagger& tagger, const Vocabulary& vocab,
                         const std::vector<TaggedSentence>& labeled,
                         const std::vector<ConjugatePair>& pairs,
                         const std::vector<TaggedSentence>& unlabeled,
                         const std::vector<TaggedSentence>& dev,
                         const std::vector<TaggedSentence>& test,
                         const TrainingConfig& config,
                         const DropCounts& pipeline_drops) {
  validate_training_config(config);
  if (labeled.empty()) throw InvalidInputError("labeled corpus is empty");
  if (dev.empty()) throw InvalidInputError("dev corpus is empty");
  if (test.empty()) throw InvalidInputError("test corpus is empty");

  TrainingReport report;
  report.config = config;
  report.pipeline_drops = pipeline_drops;
  report.pairs_used = mode_uses_trans_loss(config.mode) ? pairs.size() : 0;

  AdamWConfig opt;
  opt.lr = config.lr;
  AdamW optimizer(tagger.config(), tagger.label_space().size(), opt);
  Rng rng(config.seed);

  std::vector<std::size_t> order(labeled.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t pair_cursor = 0;
  std::size_t unlabeled_cursor = 0;
  const std::size_t steps_per_epoch =
      (labeled.size() + config.labeled_batch_size - 1) /
      config.labeled_batch_size;

  TaggerGradients grads = TaggerParameters::zeros_like(
      tagger.config(), tagger.label_space().size());
  TaggerParameters best_params = tagger.params();
  double best_f1 = -1.0;
  std::size_t best_epoch = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    EpochStats stats;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      StepBatch batch;
      const std::size_t lo = step * config.labeled_batch_size;
      const std::size_t hi =
          std::min(lo + config.labeled_batch_size, labeled.size());
      for (std::size_t i = lo; i < hi; ++i) {
        batch.labeled.push_back(&labeled[order[i]]);
      }
      if (mode_uses_trans_loss(config.mode) && !pairs.empty()) {
        for (std::size_t k = 0; k < config.pair_batch_size; ++k) {
          batch.pairs.push_back(&pairs[pair_cursor]);
          pair_cursor = (pair_cursor + 1) % pairs.size();
        }
      }
      if (mode_dropout_on_unlabeled(config.mode) && !unlabeled.empty()) {
        for (std::size_t k = 0; k < config.labeled_batch_size; ++k) {
          batch.unlabeled.push_back(&unlabeled[unlabeled_cursor]);
          unlabeled_cursor = (unlabeled_cursor + 1) % unlabeled.size();
        }
      }

      grads.fill(0.0);
      StepResult step_result;
      try {
        step_result = total_loss_step(tagger, vocab, batch, config, rng, grads);
        optimizer.step(tagger.params(), grads);
      } catch (const TrainingDivergedError& e) {
        throw TrainingDivergedError(std::string(e.what()) + " at epoch " +
                                    std::to_string(epoch) + ", step " +
                                    std::to_string(step + 1));
      }
      stats.ce += step_result.ce;
      stats.drop += step_result.drop;
      stats.trans += step_result.trans;
    }
    const double inv_steps = 1.0 / static_cast<double>(steps_per_epoch);
    stats.ce *= inv_steps;
    stats.drop *= inv_steps;
    stats.trans *= inv_steps;
    stats.dev_f1 = evaluate_tagger(tagger, vocab, dev).f1;
    report.epochs.push_back(stats);

    // Strict improvement only: a plateau leaves best_epoch in place so
    // patience can fire, and ties keep the earliest (cheapest) checkpoint.
    if (stats.dev_f1 > best_f1) {
      best_f1 = stats.dev_f1;
      best_epoch = epoch;
      best_params = tagger.params();
    } else if (config.patience > 0 && epoch - best_epoch >= config.patience) {
      break;
    }
  }

  tagger.params() = best_params;
  report.selected_epoch = best_epoch;
  report.best_dev_f1 = best_f1;
  report.test_result = evaluate_tagger(tagger, vocab, test);
  return report;
}

void write_training_report(const TrainingReport& report,
                           const std::string& path) {
  nlohmann::json j;
  j["config"] = {
      {"alpha", report.config.alpha},
      {"beta", report.config.beta},
      {"divergence", divergence_mode_name(report.config.divergence)},
      {"mode", run_mode_name(report.config.mode)},
      {"labeled_batch_size", report.config.labeled_batch_size},
      {"pair_batch_size", report.config.pair_batch_size},
      {"epochs", report.config.epochs},
      {"lr", report.config.lr},
      {"seed", report.config.seed},
      {"patience", report.config.patience},
  };
  j["epochs"] = nlohmann::json::array();
  for (const EpochStats& e : report.epochs) {
    j["epochs"].push_back({{"ce", e.ce},
                           {"drop", e.drop},
                           {"trans", e.trans},
                           {"dev_f1", e.dev_f1}});
  }
  j["selected_epoch"] = report.selected_epoch;
  j["best_dev_f1"] = report.best_dev_f1;
  j["test"] = {{"precision", report.test_result.precision},
               {"recall", report.test_result.recall},
               {"f1", report.test_result.f1},
               {"gold", report.test_result.num_gold},
               {"predicted", report.test_result.num_pred},
               {"correct", report.test_result.num_correct}};
  j["pipeline_drops"] = {
      {"placeholder_lost", report.pipeline_drops.placeholder_lost},
      {"empty_translation", report.pipeline_drops.empty_translation},
      {"engine_error", report.pipeline_drops.engine_error}};
  j["pairs_used"] = report.pairs_used;

  std::ofstream out(path);
  if (!out) throw IoError("cannot open report file for writing: " + path);
  out << j.dump(2) << '\n';
}

void append_epoch_log(const TrainingReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open log file for appending: " + path);
  out << "# mode=" << run_mode_name(report.config.mode)
      << " divergence=" << divergence_mode_name(report.config.divergence)
      << " seed=" << report.config.seed << '\n';
  for (std::size_t i = 0; i < report.epochs.size(); ++i) {
    const EpochStats& e = report.epochs[i];
    char line[160];
    std::snprintf(line, sizeof(line),
                  "epoch %2zu  ce %.6f  drop %.6f  trans %.6f  dev_f1 %.4f",
                  i + 1, e.ce, e.drop, e.trans, e.dev_f1);
    out << line << '\n';
  }
  out << "selected_epoch " << report.selected_epoch << "  test_f1 "
      << report.test_result.f1 << '\n';
}

}  // namespace conner
