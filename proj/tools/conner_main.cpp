#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "conner/checkpoint.hpp"
#include "conner/error.hpp"
#include "conner/evaluation.hpp"
#include "conner/label_space.hpp"
#include "conner/rng.hpp"
#include "conner/synth_corpus.hpp"
#include "conner/tagger.hpp"
#include "conner/training.hpp"
#include "conner/translation.hpp"
#include "conner/vocab.hpp"

namespace {

using namespace conner;

// Post-parse problems that are the user's fault (bad flag combinations,
// malformed config files). Mapped to exit code 1 like CLI11 parse errors.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

LabelSpace space_from_types(const std::string& csv) {
  return LabelSpace::build(EntityTypeSet{split_csv(csv)});
}

// ---- synth ----

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 7;
  std::uint64_t lexicon_seed = 2024;
  std::size_t source_train = 2000;
  std::size_t source_dev = 500;
  std::size_t target_train = 2000;
  std::size_t target_test = 500;
  double overlap = 0.0;
  std::string reorder = "reverse";
  std::string spec = "default";
};

int run_synth(const SynthArgs& args) {
  if (args.spec != "default") {
    throw UsageError("--spec: only the 'default' spec is built in");
  }
  SyntheticLanguageSpec spec = SyntheticLanguageSpec::default_spec();
  spec.lexicon_seed = args.lexicon_seed;
  spec.overlap = args.overlap;
  spec.reorder_rule = args.reorder;

  SplitSizes sizes;
  sizes.source_train = args.source_train;
  sizes.source_dev = args.source_dev;
  sizes.target_train = args.target_train;
  sizes.target_test = args.target_test;

  const CorpusBundle bundle = generate_bundle(spec, sizes, args.seed);
  write_bundle(bundle, args.out);
  std::printf(
      "synth: wrote %s (source_train=%zu source_dev=%zu target_train=%zu "
      "target_test=%zu lexicon=%zu reorder=%s seed=%llu)\n",
      args.out.c_str(), bundle.source_train.size(), bundle.source_dev.size(),
      bundle.target_train.size(), bundle.target_test.size(),
      bundle.lexicon.size(), bundle.reorder_rule.c_str(),
      static_cast<unsigned long long>(bundle.seed));
  return 0;
}

// ---- engine construction shared by prepare-pairs ----

struct EngineArgs {
  std::string engine = "lexicon";  // lexicon | cached | external
  std::string lexicon_path;
  std::string cache_path;
  std::string direction = "tgt2src";  // tgt2src | src2tgt
  double rho = 0.0;
  std::string engine_id;  // for cached replay with several recorded engines
};

std::unique_ptr<TranslationEngine> build_engine(const EngineArgs& args) {
  std::shared_ptr<TranslationCache> cache;
  if (!args.cache_path.empty()) {
    cache = std::make_shared<TranslationCache>(args.cache_path);
  }

  if (args.engine == "cached") {
    if (!cache) throw UsageError("--engine cached requires --cache");
    return std::make_unique<CacheOnlyEngine>(cache, args.engine_id);
  }

  std::shared_ptr<TranslationEngine> inner;
  if (args.engine == "lexicon") {
    if (args.lexicon_path.empty()) {
      throw UsageError("--engine lexicon requires --lexicon");
    }
    LexiconFile file = read_lexicon(args.lexicon_path);
    std::string from = "tgt";
    std::string to = "src";
    if (args.direction == "tgt2src") {
      for (auto& [src, tgt] : file.entries) std::swap(src, tgt);
    } else {
      from = "src";
      to = "tgt";
    }
    inner = std::make_shared<LexiconEngine>(std::move(file.entries),
                                            file.reorder_rule, args.rho, from,
                                            to);
  } else if (args.engine == "external") {
    const char* url = std::getenv("CONNER_EXTERNAL_ENGINE_URL");
    if (url == nullptr || *url == '\0') {
      throw UsageError(
          "--engine external requires CONNER_EXTERNAL_ENGINE_URL to be set");
    }
    inner = std::make_shared<ExternalEngine>(url);
  } else {
    throw UsageError("--engine: unknown engine '" + args.engine + "'");
  }

  if (cache) return std::make_unique<CachedEngine>(inner, cache);
  // Wrap in a pass-through unique_ptr while keeping shared ownership alive.
  struct Holder : TranslationEngine {
    std::shared_ptr<TranslationEngine> e;
    explicit Holder(std::shared_ptr<TranslationEngine> inner)
        : e(std::move(inner)) {}
    std::string id() const override { return e->id(); }
    std::string from_language() const override { return e->from_language(); }
    std::string to_language() const override { return e->to_language(); }
    std::string translate(const std::string& text) override {
      return e->translate(text);
    }
  };
  return std::make_unique<Holder>(inner);
}

// ---- prepare-pairs ----

struct PreparePairsArgs {
  std::string in;
  std::string checkpoint;
  std::string out;
  EngineArgs engine;
  bool gold_spans = false;
  std::string types = "PER,LOC,ORG,MISC";
};

int run_prepare_pairs(const PreparePairsArgs& args) {
  auto engine = build_engine(args.engine);
  PreparePairsResult result;
  if (args.gold_spans) {
    const LabelSpace space = space_from_types(args.types);
    const auto corpus = read_conll(args.in, true, space);
    result = prepare_pairs_gold(corpus, *engine);
  } else {
    if (args.checkpoint.empty()) {
      throw UsageError("--checkpoint is required unless --gold-spans is set");
    }
    Checkpoint ckpt = load_checkpoint(args.checkpoint);
    const auto corpus = read_conll(args.in, false, ckpt.tagger.label_space());
    result = prepare_pairs(corpus, ckpt.tagger, ckpt.vocab, *engine);
  }
  write_pairs(result, engine->id(), args.out);
  std::printf(
      "prepare-pairs: wrote %s (sentences=%zu candidates=%zu pairs=%zu "
      "dropped=%zu engine=%s)\n",
      args.out.c_str(), result.sentences_processed, result.candidate_spans,
      result.pairs.size(), result.dropped.total(), engine->id().c_str());
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string train;
  std::string dev;
  std::string test;
  std::string pairs;
  std::string unlabeled;
  std::string out;
  std::string report;
  std::string log;
  std::string config_file;
  std::string types = "PER,LOC,ORG,MISC";
  std::string mode = "conner";
  std::string divergence = "bi-kl";
  double alpha = 0.5;
  double beta = 0.5;
  double lr = 0.05;
  double dropout = 0.1;
  std::uint64_t seed = 7;
  std::size_t epochs = 10;
  std::size_t patience = 0;
  std::size_t batch = 16;
  std::size_t pair_batch = 16;
  std::size_t d_emb = 24;
  std::size_t d_hid = 32;
  std::size_t window = 1;
};

// Flags override config-file values: a file value is applied only when the
// flag was not given on the command line.
void apply_config_file(const CLI::App* cmd, TrainArgs& args) {
  std::ifstream in(args.config_file);
  if (!in) throw IoError("cannot open config file: " + args.config_file);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("--config: invalid json: " + std::string(e.what()));
  }
  if (!j.is_object()) throw UsageError("--config: expected a json object");

  auto unseen = [&](const char* flag) {
    return cmd->get_option(flag)->count() == 0;
  };
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "mode") {
        if (unseen("--mode")) args.mode = value.get<std::string>();
      } else if (key == "divergence") {
        if (unseen("--divergence")) args.divergence = value.get<std::string>();
      } else if (key == "alpha") {
        if (unseen("--alpha")) args.alpha = value.get<double>();
      } else if (key == "beta") {
        if (unseen("--beta")) args.beta = value.get<double>();
      } else if (key == "lr") {
        if (unseen("--lr")) args.lr = value.get<double>();
      } else if (key == "dropout") {
        if (unseen("--dropout")) args.dropout = value.get<double>();
      } else if (key == "seed") {
        if (unseen("--seed")) args.seed = value.get<std::uint64_t>();
      } else if (key == "epochs") {
        if (unseen("--epochs")) args.epochs = value.get<std::size_t>();
      } else if (key == "patience") {
        if (unseen("--patience")) args.patience = value.get<std::size_t>();
      } else if (key == "batch") {
        if (unseen("--batch")) args.batch = value.get<std::size_t>();
      } else if (key == "pair_batch") {
        if (unseen("--pair-batch")) args.pair_batch = value.get<std::size_t>();
      } else if (key == "d_emb") {
        if (unseen("--d-emb")) args.d_emb = value.get<std::size_t>();
      } else if (key == "d_hid") {
        if (unseen("--d-hid")) args.d_hid = value.get<std::size_t>();
      } else if (key == "window") {
        if (unseen("--window")) args.window = value.get<std::size_t>();
      } else if (key == "types") {
        if (unseen("--types")) args.types = value.get<std::string>();
      } else {
        throw UsageError("--config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("--config: bad value type: " + std::string(e.what()));
  }
}

int run_train(const TrainArgs& args) {
  const LabelSpace space = space_from_types(args.types);
  const auto labeled = read_conll(args.train, true, space, "src");
  const auto dev = read_conll(args.dev, true, space, "src");
  const auto test = read_conll(args.test, true, space, "tgt");

  std::vector<TaggedSentence> unlabeled;
  if (!args.unlabeled.empty()) {
    unlabeled = read_conll(args.unlabeled, false, space, "tgt");
  }
  PairFile pair_file;
  if (!args.pairs.empty()) pair_file = read_pairs(args.pairs);

  // The vocabulary covers every stream the run can see, so runs that differ
  // only in mode or loss weights share identical token ids.
  Vocabulary vocab;
  for (const auto& s : labeled) {
    for (const auto& tok : s.tokens) vocab.add(tok);
  }
  for (const auto& s : unlabeled) {
    for (const auto& tok : s.tokens) vocab.add(tok);
  }
  for (const auto& p : pair_file.pairs) {
    for (const auto& tok : p.original_tokens) vocab.add(tok);
    for (const auto& tok : p.translated_tokens) vocab.add(tok);
  }

  TaggerConfig tagger_config;
  tagger_config.vocab_size = vocab.size();
  tagger_config.d_emb = args.d_emb;
  tagger_config.d_hid = args.d_hid;
  tagger_config.window = args.window;
  tagger_config.dropout = args.dropout;
  tagger_config.seed = Rng(args.seed).derive(1).next_u64();
  Tagger tagger(tagger_config, space);

  TrainingConfig config;
  config.alpha = args.alpha;
  config.beta = args.beta;
  config.divergence = parse_divergence_mode(args.divergence);
  config.mode = parse_run_mode(args.mode);
  config.labeled_batch_size = args.batch;
  config.pair_batch_size = args.pair_batch;
  config.epochs = args.epochs;
  config.lr = args.lr;
  config.seed = args.seed;
  config.patience = args.patience;

  const TrainingReport report =
      train_run(tagger, vocab, labeled, pair_file.pairs, unlabeled, dev, test,
                config, pair_file.dropped);

  if (!args.out.empty()) save_checkpoint(args.out, tagger, vocab);
  if (!args.report.empty()) write_training_report(report, args.report);
  if (!args.log.empty()) append_epoch_log(report, args.log);

  std::printf(
      "train: mode=%s divergence=%s seed=%llu epochs=%zu selected=%zu "
      "dev_f1=%.4f test_f1=%.4f pairs=%zu\n",
      run_mode_name(config.mode), divergence_mode_name(config.divergence),
      static_cast<unsigned long long>(config.seed), report.epochs.size(),
      report.selected_epoch, report.best_dev_f1, report.test_result.f1,
      report.pairs_used);
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint;
  std::string test;
  std::string out;
};

int run_eval(const EvalArgs& args) {
  Checkpoint ckpt = load_checkpoint(args.checkpoint);
  const auto corpus = read_conll(args.test, true, ckpt.tagger.label_space());
  const EvalResult result = evaluate_tagger(ckpt.tagger, ckpt.vocab, corpus);
  if (!args.out.empty()) {
    nlohmann::json j;
    j["precision"] = result.precision;
    j["recall"] = result.recall;
    j["f1"] = result.f1;
    j["gold"] = result.num_gold;
    j["predicted"] = result.num_pred;
    j["correct"] = result.num_correct;
    std::ofstream out(args.out);
    if (!out) throw IoError("cannot open output file: " + args.out);
    out << j.dump(2) << '\n';
  }
  std::printf("eval: sentences=%zu P=%.4f R=%.4f F1=%.4f (gold=%zu pred=%zu correct=%zu)\n",
              corpus.size(), result.precision, result.recall, result.f1,
              result.num_gold, result.num_pred, result.num_correct);
  return 0;
}

// ---- tag ----

struct TagArgs {
  std::string checkpoint;
  std::string in;
  std::string out;
};

int run_tag(const TagArgs& args) {
  Checkpoint ckpt = load_checkpoint(args.checkpoint);
  const LabelSpace& space = ckpt.tagger.label_space();
  auto corpus = read_conll(args.in, false, space);
  for (TaggedSentence& sentence : corpus) {
    sentence.tags = predict_tags(ckpt.tagger, ckpt.vocab, sentence.tokens);
  }
  write_conll(corpus, args.out, space);
  std::printf("tag: wrote %s (sentences=%zu)\n", args.out.c_str(),
              corpus.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual sequence tagging with consistency training"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* cmd_synth = app.add_subcommand(
      "synth", "Generate a parallel synthetic corpus bundle");
  cmd_synth->add_option("--out", synth.out, "Output directory")->required();
  cmd_synth->add_option("--seed", synth.seed, "Sampling seed");
  cmd_synth->add_option("--lexicon-seed", synth.lexicon_seed, "Lexicon seed");
  cmd_synth->add_option("--source-train", synth.source_train, "Sentences");
  cmd_synth->add_option("--source-dev", synth.source_dev, "Sentences");
  cmd_synth->add_option("--target-train", synth.target_train, "Sentences");
  cmd_synth->add_option("--target-test", synth.target_test, "Sentences");
  cmd_synth->add_option("--overlap", synth.overlap,
                        "Fraction of lexicon entries shared across languages");
  cmd_synth->add_option("--reorder", synth.reorder, "Word-order rule")
      ->check(CLI::IsMember({"reverse", "identity"}));
  cmd_synth->add_option("--spec", synth.spec, "Language spec name");

  PreparePairsArgs pp;
  CLI::App* cmd_pp = app.add_subcommand(
      "prepare-pairs", "Build conjugate pairs for consistency training");
  cmd_pp->add_option("--in", pp.in, "Input corpus")->required();
  cmd_pp->add_option("--out", pp.out, "Output pair file")->required();
  cmd_pp->add_option("--checkpoint", pp.checkpoint, "Weak tagger checkpoint");
  cmd_pp->add_option("--engine", pp.engine.engine, "Translation engine")
      ->check(CLI::IsMember({"lexicon", "cached", "external"}));
  cmd_pp->add_option("--lexicon", pp.engine.lexicon_path, "Lexicon TSV");
  cmd_pp->add_option("--cache", pp.engine.cache_path, "Translation cache file");
  cmd_pp->add_option("--direction", pp.engine.direction, "Lexicon direction")
      ->check(CLI::IsMember({"tgt2src", "src2tgt"}));
  cmd_pp->add_option("--rho", pp.engine.rho,
                     "Placeholder corruption probability (test knob)");
  cmd_pp->add_option("--engine-id", pp.engine.engine_id,
                     "Engine id for cached replay");
  cmd_pp->add_flag("--gold-spans", pp.gold_spans,
                   "Use gold entity boundaries from a labeled corpus");
  cmd_pp->add_option("--types", pp.types, "Comma-separated entity types");

  TrainArgs train;
  CLI::App* cmd_train = app.add_subcommand("train", "Train a tagger");
  cmd_train->add_option("--train", train.train, "Labeled training corpus")
      ->required();
  cmd_train->add_option("--dev", train.dev, "Labeled dev corpus")->required();
  cmd_train->add_option("--test", train.test, "Labeled test corpus")
      ->required();
  cmd_train->add_option("--pairs", train.pairs, "Conjugate-pair file");
  cmd_train->add_option("--unlabeled", train.unlabeled, "Unlabeled corpus");
  cmd_train->add_option("--out", train.out, "Checkpoint output path");
  cmd_train->add_option("--report", train.report, "Training report path");
  cmd_train->add_option("--log", train.log, "Per-epoch log path (appended)");
  cmd_train->add_option("--config", train.config_file, "Run-config json file");
  cmd_train->add_option("--types", train.types, "Comma-separated entity types");
  cmd_train->add_option("--mode", train.mode, "Run mode")
      ->check(CLI::IsMember({"conner", "vanilla", "trans-unlabel",
                             "dropout-label", "trans-label",
                             "dropout-unlabel"}));
  cmd_train->add_option("--divergence", train.divergence, "Divergence mode")
      ->check(CLI::IsMember({"bi-kl", "kl-unlabel", "kl-trans"}));
  cmd_train->add_option("--alpha", train.alpha, "Dropout-consistency weight");
  cmd_train->add_option("--beta", train.beta,
                        "Translation-consistency weight");
  cmd_train->add_option("--lr", train.lr, "Learning rate");
  cmd_train->add_option("--dropout", train.dropout, "Dropout rate");
  cmd_train->add_option("--seed", train.seed, "Training seed");
  cmd_train->add_option("--epochs", train.epochs, "Epochs");
  cmd_train->add_option("--patience", train.patience,
                        "Early-stopping patience (0 disables)");
  cmd_train->add_option("--batch", train.batch, "Labeled batch size");
  cmd_train->add_option("--pair-batch", train.pair_batch, "Pair batch size");
  cmd_train->add_option("--d-emb", train.d_emb, "Embedding width");
  cmd_train->add_option("--d-hid", train.d_hid, "Hidden width");
  cmd_train->add_option("--window", train.window, "Context half-width");

  EvalArgs eval;
  CLI::App* cmd_eval = app.add_subcommand("eval", "Score a checkpoint");
  cmd_eval->add_option("--checkpoint", eval.checkpoint, "Checkpoint")
      ->required();
  cmd_eval->add_option("--test", eval.test, "Labeled test corpus")->required();
  cmd_eval->add_option("--out", eval.out, "Metrics output json");

  TagArgs tag;
  CLI::App* cmd_tag = app.add_subcommand("tag", "Tag an unlabeled corpus");
  cmd_tag->add_option("--checkpoint", tag.checkpoint, "Checkpoint")
      ->required();
  cmd_tag->add_option("--in", tag.in, "Unlabeled input corpus")->required();
  cmd_tag->add_option("--out", tag.out, "CoNLL output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (cmd_synth->parsed()) return run_synth(synth);
    if (cmd_pp->parsed()) return run_prepare_pairs(pp);
    if (cmd_train->parsed()) {
      if (!train.config_file.empty()) apply_config_file(cmd_train, train);
      return run_train(train);
    }
    if (cmd_eval->parsed()) return run_eval(eval);
    if (cmd_tag->parsed()) return run_tag(tag);
    std::cerr << "usage error: no subcommand given\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const conner::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
