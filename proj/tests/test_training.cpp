#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "conner/crf.hpp"
#include "conner/error.hpp"
#include "conner/synth_corpus.hpp"
#include "conner/training.hpp"

using namespace conner;

namespace {

struct World {
  CorpusBundle bundle;
  Vocabulary vocab;
  std::vector<ConjugatePair> pairs;
  LabelSpace space = LabelSpace::build({{"PER"}});
};

// A miniature end-to-end data world shared by the integration tests.
World make_world(std::size_t train = 24, std::size_t unlabeled = 24) {
  World w;
  const auto spec = SyntheticLanguageSpec::default_spec();
  SplitSizes sizes;
  sizes.source_train = train;
  sizes.source_dev = 12;
  sizes.target_train = unlabeled;
  sizes.target_test = 12;
  w.bundle = generate_bundle(spec, sizes, 77);
  w.space = LabelSpace::build(w.bundle.entity_types);

  std::vector<std::pair<std::string, std::string>> inverse;
  for (const auto& [src, tgt] : w.bundle.lexicon) inverse.push_back({tgt, src});
  LexiconEngine engine(inverse, w.bundle.reorder_rule);
  w.pairs = prepare_pairs_gold(w.bundle.target_train_hidden, engine).pairs;

  auto feed = [&w](const std::vector<TaggedSentence>& sents) {
    for (const auto& s : sents) {
      for (const auto& tok : s.tokens) w.vocab.add(tok);
    }
  };
  feed(w.bundle.source_train);
  feed(w.bundle.target_train);
  for (const auto& p : w.pairs) {
    for (const auto& tok : p.original_tokens) w.vocab.add(tok);
    for (const auto& tok : p.translated_tokens) w.vocab.add(tok);
  }
  return w;
}

Tagger make_tagger(const World& w, double dropout = 0.1,
                   std::uint64_t seed = 5) {
  TaggerConfig c;
  c.vocab_size = w.vocab.size();
  c.d_emb = 8;
  c.d_hid = 10;
  c.window = 1;
  c.dropout = dropout;
  c.seed = seed;
  return Tagger(c, w.space);
}

bool same_params(const TaggerParameters& a, const TaggerParameters& b) {
  return a.embeddings == b.embeddings && a.hidden_w == b.hidden_w &&
         a.hidden_b == b.hidden_b && a.emission_w == b.emission_w &&
         a.emission_b == b.emission_b && a.transitions == b.transitions;
}

bool all_zero(const TaggerParameters& g) {
  for (double v : g.embeddings.storage()) {
    if (v != 0.0) return false;
  }
  for (double v : g.hidden_w.storage()) {
    if (v != 0.0) return false;
  }
  for (double v : g.hidden_b) {
    if (v != 0.0) return false;
  }
  for (double v : g.emission_w.storage()) {
    if (v != 0.0) return false;
  }
  for (double v : g.emission_b) {
    if (v != 0.0) return false;
  }
  for (double v : g.transitions.storage()) {
    if (v != 0.0) return false;
  }
  return true;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("run mode names round-trip") {
  for (RunMode mode :
       {RunMode::conner, RunMode::vanilla, RunMode::trans_unlabel,
        RunMode::dropout_label, RunMode::trans_label,
        RunMode::dropout_unlabel}) {
    CHECK(parse_run_mode(run_mode_name(mode)) == mode);
  }
  CHECK(std::string(run_mode_name(RunMode::trans_unlabel)) ==
        "trans-unlabel");
  CHECK(std::string(run_mode_name(RunMode::dropout_unlabel)) ==
        "dropout-unlabel");
  CHECK_THROWS_AS(parse_run_mode("squiggle"), InvalidConfigError);

  CHECK(mode_uses_dropout_loss(RunMode::conner));
  CHECK(mode_uses_dropout_loss(RunMode::dropout_label));
  CHECK(mode_uses_dropout_loss(RunMode::dropout_unlabel));
  CHECK_FALSE(mode_uses_dropout_loss(RunMode::vanilla));
  CHECK_FALSE(mode_uses_dropout_loss(RunMode::trans_unlabel));
  CHECK(mode_uses_trans_loss(RunMode::conner));
  CHECK(mode_uses_trans_loss(RunMode::trans_unlabel));
  CHECK(mode_uses_trans_loss(RunMode::trans_label));
  CHECK_FALSE(mode_uses_trans_loss(RunMode::dropout_label));
  CHECK(mode_dropout_on_unlabeled(RunMode::dropout_unlabel));
  CHECK_FALSE(mode_dropout_on_unlabeled(RunMode::conner));
}

TEST_CASE("training config validation") {
  TrainingConfig c;
  CHECK_NOTHROW(validate_training_config(c));
  c.alpha = -0.1;
  CHECK_THROWS_AS(validate_training_config(c), InvalidConfigError);
  c = TrainingConfig{};
  c.beta = -1.0;
  CHECK_THROWS_AS(validate_training_config(c), InvalidConfigError);
  c = TrainingConfig{};
  c.labeled_batch_size = 0;
  CHECK_THROWS_AS(validate_training_config(c), InvalidConfigError);
  c = TrainingConfig{};
  c.epochs = 0;
  CHECK_THROWS_AS(validate_training_config(c), InvalidConfigError);
  c = TrainingConfig{};
  c.lr = 0.0;
  CHECK_THROWS_AS(validate_training_config(c), InvalidConfigError);
}

TEST_CASE("supervised loss wraps the crf nll") {
  const World w = make_world(6, 6);
  const Tagger tagger = make_tagger(w, 0.0);
  const auto& sent = w.bundle.source_train[0];
  const auto ids = w.vocab.encode(sent.tokens);

  auto grads = TaggerParameters::zeros_like(tagger.config(), w.space.size());
  const double loss =
      supervised_loss(tagger, ids, sent.tags, nullptr, false, 1.0, grads);

  const auto cache = tagger.forward(ids, false, nullptr);
  std::vector<std::size_t> gold;
  for (const auto& tag : sent.tags) gold.push_back(w.space.index_of(tag));
  const auto res = crf_nll_and_gradient(
      cache.logits, tagger.params().transitions, gold, w.space);
  CHECK(loss == doctest::Approx(res.loss).epsilon(1e-12));
  CHECK(loss > 0.0);

  // Weight scales the gradient, not the reported loss.
  auto grads2 = TaggerParameters::zeros_like(tagger.config(), w.space.size());
  const double loss2 =
      supervised_loss(tagger, ids, sent.tags, nullptr, false, 2.0, grads2);
  CHECK(loss2 == doctest::Approx(loss));
  for (std::size_t i = 0; i < grads.emission_b.size(); ++i) {
    CHECK(grads2.emission_b[i] ==
          doctest::Approx(2.0 * grads.emission_b[i]));
  }
}

TEST_CASE("dropout consistency loss vanishes without dropout") {
  const World w = make_world(6, 6);
  const Tagger tagger = make_tagger(w, 0.0);
  const auto ids = w.vocab.encode(w.bundle.source_train[0].tokens);
  auto grads = TaggerParameters::zeros_like(tagger.config(), w.space.size());
  Rng rng(3);
  const double loss = dropout_consistency_loss(tagger, ids, rng, 1.0, grads);
  CHECK(loss == 0.0);
  CHECK(all_zero(grads));
}

TEST_CASE("dropout consistency loss is positive and differentiable") {
  const World w = make_world(6, 6);
  Tagger tagger = make_tagger(w, 0.4);
  const auto ids = w.vocab.encode(w.bundle.source_train[1].tokens);

  auto grads = TaggerParameters::zeros_like(tagger.config(), w.space.size());
  Rng rng(11);
  const double loss = dropout_consistency_loss(tagger, ids, rng, 1.0, grads);
  CHECK(loss > 0.0);
  CHECK_FALSE(all_zero(grads));

  // Finite differences with the mask stream pinned: each evaluation replays
  // the same rng, so the loss is a smooth function of the parameters.
  auto loss_at = [&]() {
    auto sink = TaggerParameters::zeros_like(tagger.config(), w.space.size());
    Rng replay(11);
    return dropout_consistency_loss(tagger, ids, replay, 1.0, sink);
  };
  const double h = 1e-6;
  auto check = [](double analytic, double fd) {
    const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-6});
    CHECK(std::abs(analytic - fd) / scale <= 2e-3);
  };
  auto& p = tagger.params();
  // Probe a spread of parameters from each block.
  for (std::size_t i = 0; i < p.emission_b.size(); ++i) {
    const double saved = p.emission_b[i];
    p.emission_b[i] = saved + h;
    const double up = loss_at();
    p.emission_b[i] = saved - h;
    const double down = loss_at();
    p.emission_b[i] = saved;
    check(grads.emission_b[i], (up - down) / (2.0 * h));
  }
  for (std::size_t i = 0; i < p.hidden_w.size(); i += 7) {
    const double saved = p.hidden_w.data()[i];
    p.hidden_w.data()[i] = saved + h;
    const double up = loss_at();
    p.hidden_w.data()[i] = saved - h;
    const double down = loss_at();
    p.hidden_w.data()[i] = saved;
    check(grads.hidden_w.data()[i], (up - down) / (2.0 * h));
  }
}

TEST_CASE("translation consistency loss is zero for identical sides") {
  const World w = make_world(6, 6);
  const Tagger tagger = make_tagger(w, 0.0);
  ConjugatePair pair;
  pair.original_tokens = w.bundle.source_train[0].tokens;
  pair.translated_tokens = pair.original_tokens;
  pair.original_span = {1, 2};
  pair.translated_span = {1, 2};
  auto grads = TaggerParameters::zeros_like(tagger.config(), w.space.size());
  const double loss = translation_consistency_loss(
      tagger, w.vocab, pair, DivergenceMode::bi_kl, 1.0, grads);
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
  for (double v : grads.emission_b) {
    CHECK(std::abs(v) < 1e-9);
  }
}

TEST_CASE("translation consistency gradients match finite differences") {
  const double h = 1e-6;
  auto check = [](double analytic, double fd) {
    const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-6});
    CHECK(std::abs(analytic - fd) / scale <= 2e-3);
  };

  SUBCASE("bi-kl: shared parameters, both sides differentiated") {
    const World w = make_world(8, 8);
    REQUIRE(!w.pairs.empty());
    const ConjugatePair& pair = w.pairs[0];
    Tagger tagger = make_tagger(w, 0.0);
    auto grads =
        TaggerParameters::zeros_like(tagger.config(), w.space.size());
    const double loss = translation_consistency_loss(
        tagger, w.vocab, pair, DivergenceMode::bi_kl, 1.0, grads);
    CHECK(loss >= 0.0);
    CHECK(std::isfinite(loss));

    auto loss_at = [&]() {
      auto sink =
          TaggerParameters::zeros_like(tagger.config(), w.space.size());
      return translation_consistency_loss(tagger, w.vocab, pair,
                                          DivergenceMode::bi_kl, 1.0, sink);
    };
    auto& p = tagger.params();
    for (std::size_t i = 0; i < p.emission_b.size(); ++i) {
      const double saved = p.emission_b[i];
      p.emission_b[i] = saved + h;
      const double up = loss_at();
      p.emission_b[i] = saved - h;
      const double down = loss_at();
      p.emission_b[i] = saved;
      check(grads.emission_b[i], (up - down) / (2.0 * h));
    }
    for (std::size_t i = 0; i < p.hidden_b.size(); i += 3) {
      const double saved = p.hidden_b[i];
      p.hidden_b[i] = saved + h;
      const double up = loss_at();
      p.hidden_b[i] = saved - h;
      const double down = loss_at();
      p.hidden_b[i] = saved;
      check(grads.hidden_b[i], (up - down) / (2.0 * h));
    }
  }

  // A one-sided mode holds the reference side constant even though the loss
  // value still moves with it, so finite differences of the raw value only
  // agree with the analytic gradient on parameters the reference side never
  // touches. A token-disjoint pair makes each side's embedding rows exactly
  // such parameters.
  SUBCASE("one-sided modes: learnable side's embedding rows") {
    World w = make_world(6, 6);
    ConjugatePair pair;
    pair.original_tokens = {"fd-a0", "fd-a1", "fd-a2"};
    pair.translated_tokens = {"fd-b0", "fd-b1", "fd-b2"};
    pair.original_span = {0, 1};
    pair.translated_span = {1, 2};
    std::vector<int> a_rows, b_rows;
    for (const auto& tok : pair.original_tokens) {
      a_rows.push_back(w.vocab.add(tok));
    }
    for (const auto& tok : pair.translated_tokens) {
      b_rows.push_back(w.vocab.add(tok));
    }

    for (DivergenceMode mode :
         {DivergenceMode::kl_unlabel, DivergenceMode::kl_trans}) {
      INFO("mode = " << divergence_mode_name(mode));
      Tagger tagger = make_tagger(w, 0.0);
      auto grads =
          TaggerParameters::zeros_like(tagger.config(), w.space.size());
      const double loss =
          translation_consistency_loss(tagger, w.vocab, pair, mode, 1.0,
                                       grads);
      CHECK(std::isfinite(loss));

      auto loss_at = [&]() {
        auto sink =
            TaggerParameters::zeros_like(tagger.config(), w.space.size());
        return translation_consistency_loss(tagger, w.vocab, pair, mode, 1.0,
                                            sink);
      };
      const auto& rows =
          mode == DivergenceMode::kl_unlabel ? b_rows : a_rows;
      auto& p = tagger.params();
      for (int row : rows) {
        for (std::size_t c = 0; c < p.embeddings.cols(); ++c) {
          double& cell = p.embeddings.at(static_cast<std::size_t>(row), c);
          const double saved = cell;
          cell = saved + h;
          const double up = loss_at();
          cell = saved - h;
          const double down = loss_at();
          cell = saved;
          check(grads.embeddings.at(static_cast<std::size_t>(row), c),
                (up - down) / (2.0 * h));
        }
      }
    }
  }
}

TEST_CASE("one-sided divergences leave the reference side untouched") {
  // A pair whose two sides share no vocabulary isolates each side's
  // embedding rows, making "which side got gradients" directly observable.
  World w = make_world(6, 6);
  ConjugatePair pair;
  pair.original_tokens = {"left-a", "left-b", "left-c"};
  pair.translated_tokens = {"right-a", "right-b", "right-c"};
  pair.original_span = {0, 1};
  pair.translated_span = {1, 2};
  std::set<int> a_rows, b_rows;
  for (const auto& tok : pair.original_tokens) {
    a_rows.insert(w.vocab.add(tok));
  }
  for (const auto& tok : pair.translated_tokens) {
    b_rows.insert(w.vocab.add(tok));
  }

  const Tagger tagger = make_tagger(w, 0.0);
  auto row_touched = [&](const TaggerGradients& g, int row) {
    for (std::size_t j = 0; j < g.embeddings.cols(); ++j) {
      if (g.embeddings.at(static_cast<std::size_t>(row), j) != 0.0) {
        return true;
      }
    }
    return false;
  };

  auto grads_for = [&](DivergenceMode mode) {
    auto g = TaggerParameters::zeros_like(tagger.config(), w.space.size());
    translation_consistency_loss(tagger, w.vocab, pair, mode, 1.0, g);
    return g;
  };

  // Original side is the reference when the target copy learns from it.
  const auto g_unlabel = grads_for(DivergenceMode::kl_unlabel);
  for (int row : a_rows) CHECK_FALSE(row_touched(g_unlabel, row));
  bool any_b = false;
  for (int row : b_rows) any_b = any_b || row_touched(g_unlabel, row);
  CHECK(any_b);

  // Translated side is the reference in the reverse mode.
  const auto g_trans = grads_for(DivergenceMode::kl_trans);
  for (int row : b_rows) CHECK_FALSE(row_touched(g_trans, row));
  bool any_a = false;
  for (int row : a_rows) any_a = any_a || row_touched(g_trans, row);
  CHECK(any_a);

  // The symmetric mode reaches both sides.
  const auto g_bi = grads_for(DivergenceMode::bi_kl);
  bool bi_a = false, bi_b = false;
  for (int row : a_rows) bi_a = bi_a || row_touched(g_bi, row);
  for (int row : b_rows) bi_b = bi_b || row_touched(g_bi, row);
  CHECK(bi_a);
  CHECK(bi_b);
}

TEST_CASE("total loss composes the weighted terms") {
  const World w = make_world(12, 12);
  const Tagger tagger = make_tagger(w, 0.2);

  StepBatch batch;
  for (std::size_t i = 0; i < 4; ++i) {
    batch.labeled.push_back(&w.bundle.source_train[i]);
  }
  REQUIRE(w.pairs.size() >= 3);
  for (std::size_t i = 0; i < 3; ++i) batch.pairs.push_back(&w.pairs[i]);

  TrainingConfig config;
  config.alpha = 0.5;
  config.beta = 0.25;
  Rng rng(9);
  auto grads = TaggerParameters::zeros_like(tagger.config(), w.space.size());
  const StepResult r = total_loss_step(tagger, w.vocab, batch, config, rng,
                                       grads);
  CHECK(r.ce > 0.0);
  CHECK(r.drop > 0.0);
  CHECK(r.trans > 0.0);
  CHECK(r.total == doctest::Approx(r.ce + 0.5 * r.drop + 0.25 * r.trans)
                       .epsilon(1e-12));
}

TEST_CASE("vanilla ignores the consistency streams entirely") {
  const World w = make_world(12, 12);
  const Tagger tagger = make_tagger(w, 0.2);

  StepBatch with_pairs;
  for (std::size_t i = 0; i < 4; ++i) {
    with_pairs.labeled.push_back(&w.bundle.source_train[i]);
  }
  for (const auto& p : w.pairs) with_pairs.pairs.push_back(&p);
  for (const auto& s : w.bundle.target_train) {
    with_pairs.unlabeled.push_back(&s);
  }
  StepBatch without;
  without.labeled = with_pairs.labeled;

  TrainingConfig vanilla;
  vanilla.mode = RunMode::vanilla;

  Rng rng1(4);
  auto g1 = TaggerParameters::zeros_like(tagger.config(), w.space.size());
  const StepResult r1 =
      total_loss_step(tagger, w.vocab, with_pairs, vanilla, rng1, g1);
  Rng rng2(4);
  auto g2 = TaggerParameters::zeros_like(tagger.config(), w.space.size());
  const StepResult r2 =
      total_loss_step(tagger, w.vocab, without, vanilla, rng2, g2);
  CHECK(r1.total == r2.total);
  CHECK(r1.drop == 0.0);
  CHECK(r1.trans == 0.0);
  CHECK(same_params(g1, g2));

  // conner with both weights at zero degenerates to the same computation.
  TrainingConfig zeroed;
  zeroed.mode = RunMode::conner;
  zeroed.alpha = 0.0;
  zeroed.beta = 0.0;
  Rng rng3(4);
  auto g3 = TaggerParameters::zeros_like(tagger.config(), w.space.size());
  const StepResult r3 =
      total_loss_step(tagger, w.vocab, with_pairs, zeroed, rng3, g3);
  CHECK(r3.total == r1.total);
  CHECK(same_params(g3, g1));
}

TEST_CASE("train_run is deterministic and reports a coherent summary") {
  const World w = make_world(24, 24);
  TrainingConfig config;
  config.epochs = 3;
  config.labeled_batch_size = 8;
  config.pair_batch_size = 8;
  config.seed = 42;

  Tagger t1 = make_tagger(w);
  const TrainingReport r1 =
      train_run(t1, w.vocab, w.bundle.source_train, w.pairs,
                w.bundle.target_train, w.bundle.source_dev,
                w.bundle.target_test, config);
  Tagger t2 = make_tagger(w);
  const TrainingReport r2 =
      train_run(t2, w.vocab, w.bundle.source_train, w.pairs,
                w.bundle.target_train, w.bundle.source_dev,
                w.bundle.target_test, config);

  REQUIRE(r1.epochs.size() == 3);
  REQUIRE(r2.epochs.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(r1.epochs[e].ce == r2.epochs[e].ce);
    CHECK(r1.epochs[e].drop == r2.epochs[e].drop);
    CHECK(r1.epochs[e].trans == r2.epochs[e].trans);
    CHECK(r1.epochs[e].dev_f1 == r2.epochs[e].dev_f1);
  }
  CHECK(same_params(t1.params(), t2.params()));
  CHECK(r1.test_result.f1 == r2.test_result.f1);

  // The selected epoch is the first one attaining the best dev score.
  REQUIRE(r1.selected_epoch >= 1);
  REQUIRE(r1.selected_epoch <= r1.epochs.size());
  double best = 0.0;
  for (const auto& e : r1.epochs) best = std::max(best, e.dev_f1);
  CHECK(r1.best_dev_f1 == best);
  CHECK(r1.epochs[r1.selected_epoch - 1].dev_f1 == best);
  for (std::size_t e = 0; e + 1 < r1.selected_epoch; ++e) {
    CHECK(r1.epochs[e].dev_f1 < best);
  }
  CHECK(r1.pairs_used == w.pairs.size());

  // The tagger holds the selected parameters: re-scoring dev reproduces the
  // reported best.
  const EvalResult dev_again =
      evaluate_tagger(t1, w.vocab, w.bundle.source_dev);
  CHECK(dev_again.f1 == r1.best_dev_f1);
}

TEST_CASE("patience stops training early") {
  const World w = make_world(24, 24);
  TrainingConfig config;
  config.mode = RunMode::vanilla;
  config.epochs = 50;
  config.labeled_batch_size = 8;
  config.seed = 1;
  config.patience = 2;

  Tagger tagger = make_tagger(w);
  const TrainingReport report =
      train_run(tagger, w.vocab, w.bundle.source_train, {}, {},
                w.bundle.source_dev, w.bundle.target_test, config);
  // The tiny corpus saturates fast; the run must terminate well short of 50.
  CHECK(report.epochs.size() < 50);
  CHECK(report.epochs.size() >=
        report.selected_epoch);
  CHECK(report.epochs.size() - report.selected_epoch <= 2);
}

TEST_CASE("every mode and divergence trains to a finite result") {
  const World w = make_world(12, 12);
  for (RunMode mode :
       {RunMode::conner, RunMode::vanilla, RunMode::trans_unlabel,
        RunMode::dropout_label, RunMode::trans_label,
        RunMode::dropout_unlabel}) {
    for (DivergenceMode divergence :
         {DivergenceMode::bi_kl, DivergenceMode::kl_unlabel,
          DivergenceMode::kl_trans}) {
      INFO("mode = " << run_mode_name(mode)
                     << ", divergence = " << divergence_mode_name(divergence));
      TrainingConfig config;
      config.mode = mode;
      config.divergence = divergence;
      config.epochs = 2;
      config.labeled_batch_size = 8;
      config.pair_batch_size = 4;
      config.seed = 13;
      Tagger tagger = make_tagger(w);
      const TrainingReport report =
          train_run(tagger, w.vocab, w.bundle.source_train, w.pairs,
                    w.bundle.target_train, w.bundle.source_dev,
                    w.bundle.target_test, config);
      for (const auto& e : report.epochs) {
        CHECK(std::isfinite(e.ce));
        CHECK(std::isfinite(e.drop));
        CHECK(std::isfinite(e.trans));
        CHECK(e.dev_f1 >= 0.0);
        CHECK(e.dev_f1 <= 1.0);
      }
      CHECK(tagger.params().all_finite());
      const bool wants_trans = mode_uses_trans_loss(mode);
      const bool has_trans = report.epochs[0].trans != 0.0;
      CHECK(wants_trans == has_trans);
    }
  }
}

TEST_CASE("report and epoch log serialization") {
  const World w = make_world(12, 12);
  TrainingConfig config;
  config.epochs = 2;
  config.labeled_batch_size = 8;
  config.alpha = 0.75;
  config.beta = 0.3;
  config.divergence = DivergenceMode::kl_unlabel;
  Tagger tagger = make_tagger(w);
  DropCounts drops;
  drops.placeholder_lost = 4;
  const TrainingReport report =
      train_run(tagger, w.vocab, w.bundle.source_train, w.pairs,
                w.bundle.target_train, w.bundle.source_dev,
                w.bundle.target_test, config, drops);

  const auto report_path = temp_file("conner_report.json");
  write_training_report(report, report_path.string());
  std::ifstream in(report_path);
  const auto doc = nlohmann::json::parse(in);
  CHECK(doc.at("config").at("alpha").get<double>() == 0.75);
  CHECK(doc.at("config").at("beta").get<double>() == 0.3);
  CHECK(doc.at("config").at("divergence").get<std::string>() == "kl-unlabel");
  CHECK(doc.at("config").at("mode").get<std::string>() == "conner");
  CHECK(doc.at("epochs").size() == report.epochs.size());
  CHECK(doc.at("selected_epoch").get<std::size_t>() ==
        report.selected_epoch);
  CHECK(doc.at("test").at("f1").get<double>() ==
        doctest::Approx(report.test_result.f1));
  CHECK(doc.at("pipeline_drops").at("placeholder_lost").get<std::size_t>() ==
        4);

  const auto log_path = temp_file("conner_epochs.log");
  std::filesystem::remove(log_path);
  append_epoch_log(report, log_path.string());
  append_epoch_log(report, log_path.string());  // append-only
  std::ifstream log(log_path);
  std::string line;
  std::size_t epoch_lines = 0;
  while (std::getline(log, line)) {
    if (line.find("epoch") != std::string::npos &&
        line.find("dev_f1") != std::string::npos) {
      ++epoch_lines;
    }
  }
  CHECK(epoch_lines == 2 * report.epochs.size());
  std::filesystem::remove(report_path);
  std::filesystem::remove(log_path);
}
