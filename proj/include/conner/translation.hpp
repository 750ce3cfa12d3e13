#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "conner/evaluation.hpp"
#include "conner/label_space.hpp"
#include "conner/tagger.hpp"
#include "conner/vocab.hpp"

namespace conner {

// A translation engine maps text in `from_language` to text in
// `to_language`. For a fixed instance, translate must be a pure function of
// its input text — the cache relies on it.
class TranslationEngine {
 public:
  virtual ~TranslationEngine() = default;
  virtual std::string id() const = 0;
  virtual std::string from_language() const = 0;
  virtual std::string to_language() const = 0;
  // Throws EngineError (carrying the request text) on failure.
  virtual std::string translate(const std::string& text) = 0;
};

// Whitespace tokenization used at the engine boundary.
std::vector<std::string> split_tokens(const std::string& text);
std::string join_tokens(const std::vector<std::string>& tokens);

// What one lexicon-engine call did to each token; the ground truth the
// pipeline tests verify span boundaries against.
struct AlignmentRecord {
  std::vector<std::string> input;
  std::vector<std::string> output;
  std::vector<int> output_pos_of_input;  // -1 for deleted tokens
};

// Deterministic mock engine: word-for-word inverse lexicon lookup followed
// by a reorder rule ("reverse" or "identity"). Unknown tokens pass through
// unchanged, which is what lets placeholder tokens survive. The corruption
// knob rho deletes placeholder tokens from a request with probability rho;
// the decision is a pure hash of the request text, so the engine stays
// deterministic. Every call is logged to an alignment ledger.
class LexiconEngine : public TranslationEngine {
 public:
  // `entries` map from-language words to to-language words (must be
  // bijective). For the bundled corpora this is the tgt->src direction, i.e.
  // the inverse of the generator's lexicon.
  LexiconEngine(std::vector<std::pair<std::string, std::string>> entries,
                std::string reorder_rule, double rho = 0.0,
                std::string from_language = "tgt",
                std::string to_language = "src");

  std::string id() const override { return id_; }
  std::string from_language() const override { return from_; }
  std::string to_language() const override { return to_; }
  std::string translate(const std::string& text) override;

  const std::vector<AlignmentRecord>& ledger() const { return ledger_; }
  void clear_ledger() { ledger_.clear(); }

 private:
  std::unordered_map<std::string, std::string> table_;
  std::string rule_;
  double rho_;
  std::string from_;
  std::string to_;
  std::string id_;
  std::vector<AlignmentRecord> ledger_;
};

// Append-only persistent map from (engine id, request text) to response
// text. Records are JSON lines keyed by the FNV-1a hash of the request.
class TranslationCache {
 public:
  TranslationCache() = default;  // in-memory only
  explicit TranslationCache(std::string path);  // loads, then appends on put

  std::optional<std::string> get(const std::string& engine_id,
                                 const std::string& text) const;
  void put(const std::string& engine_id, const std::string& text,
           const std::string& translation);
  std::size_t size() const { return entries_.size(); }
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

  // Engine ids seen in the cache, deduplicated, in first-seen order.
  std::vector<std::string> engine_ids() const;

  static std::uint64_t fnv1a(std::string_view text);

 private:
  std::string path_;
  std::unordered_map<std::string, std::string> entries_;
  std::vector<std::string> engine_order_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

// Write-through wrapper: consult the cache, fall back to the inner engine
// and persist its answer.
class CachedEngine : public TranslationEngine {
 public:
  CachedEngine(std::shared_ptr<TranslationEngine> inner,
               std::shared_ptr<TranslationCache> cache);

  std::string id() const override { return inner_->id(); }
  std::string from_language() const override { return inner_->from_language(); }
  std::string to_language() const override { return inner_->to_language(); }
  std::string translate(const std::string& text) override;

 private:
  std::shared_ptr<TranslationEngine> inner_;
  std::shared_ptr<TranslationCache> cache_;
};

// Replays a previously recorded cache with no backing engine; a miss is an
// EngineError. Lets training-time tooling run fully offline.
class CacheOnlyEngine : public TranslationEngine {
 public:
  // With an empty engine_id, the cache must contain exactly one engine id.
  CacheOnlyEngine(std::shared_ptr<TranslationCache> cache,
                  std::string engine_id = "");

  std::string id() const override { return engine_id_; }
  std::string from_language() const override { return "tgt"; }
  std::string to_language() const override { return "src"; }
  std::string translate(const std::string& text) override;

 private:
  std::shared_ptr<TranslationCache> cache_;
  std::string engine_id_;
};

// Plumbing-only client for a remote engine speaking JSON over HTTP:
// POST {"text": ...} to `url`, response {"translation": ...}. Retries with
// a fixed backoff. Excluded from the acceptance suite by design.
class ExternalEngine : public TranslationEngine {
 public:
  explicit ExternalEngine(std::string url, std::string from_language = "tgt",
                          std::string to_language = "src", int max_retries = 3,
                          int retry_delay_ms = 200);

  std::string id() const override;
  std::string from_language() const override { return from_; }
  std::string to_language() const override { return to_; }
  std::string translate(const std::string& text) override;

 private:
  std::string url_;
  std::string from_;
  std::string to_;
  int max_retries_;
  int retry_delay_ms_;
};

// ---- Pipeline steps ----

// "SPANX" + zero-padded 3-digit ordinal (ordinal taken modulo 1000).
std::string placeholder_token(int ordinal);

// Replaces tokens [span.start, span.end] with a single placeholder token.
// Throws InvalidInputError if the span is out of bounds.
std::vector<std::string> mask_span(const std::vector<std::string>& tokens,
                                   const SpanBounds& span, int ordinal);

// Finds the placeholder in translated output, tolerating case changes and
// one attached leading or trailing punctuation character. Returns nullopt
// when there are zero or multiple matches.
std::optional<std::size_t> locate_placeholder(
    const std::vector<std::string>& tokens, int ordinal);

struct ConjugatePair {
  std::size_t sentence_id = 0;
  std::vector<std::string> original_tokens;
  SpanBounds original_span;
  std::vector<std::string> translated_tokens;
  SpanBounds translated_span;
  std::string engine_id;
};

struct DropCounts {
  std::size_t placeholder_lost = 0;
  std::size_t empty_translation = 0;
  std::size_t engine_error = 0;

  std::size_t total() const {
    return placeholder_lost + empty_translation + engine_error;
  }
};

struct PairBuildResult {
  std::vector<ConjugatePair> pairs;
  DropCounts dropped;
};

// For each candidate span independently: mask it (ordinal = span start),
// translate the masked sentence, locate the placeholder, translate the raw
// span text alone, and splice the translated span in at the placeholder
// position. Spans whose placeholder is lost or duplicated, or whose span
// translation comes back empty, are dropped and counted. Engine failures
// propagate as EngineError. Candidate spans must be non-overlapping.
PairBuildResult build_conjugate_pairs(
    const std::vector<std::string>& tokens,
    const std::vector<SpanBounds>& candidate_spans, std::size_t sentence_id,
    TranslationEngine& engine);

// Viterbi-decodes the sentence with the frozen tagger and returns the
// predicted entity boundaries, types discarded.
std::vector<SpanBounds> select_candidate_spans(
    const Tagger& tagger, const Vocabulary& vocab,
    const std::vector<std::string>& tokens);

struct PreparePairsResult {
  std::vector<ConjugatePair> pairs;
  DropCounts dropped;
  std::size_t sentences_processed = 0;
  std::size_t sentences_failed = 0;  // aborted by an engine error
  std::size_t candidate_spans = 0;
};

// Runs candidate selection and pair building over a whole corpus. An engine
// error aborts the offending sentence, not the run. Output is ordered by
// sentence id, then span start.
PreparePairsResult prepare_pairs(const std::vector<TaggedSentence>& corpus,
                                 const Tagger& weak_tagger,
                                 const Vocabulary& vocab,
                                 TranslationEngine& engine);

// Same pipeline, but candidates are the gold entity boundaries of a labeled
// corpus (types discarded). Used to build pairs from labeled source data.
PreparePairsResult prepare_pairs_gold(const std::vector<TaggedSentence>& corpus,
                                      TranslationEngine& engine);

// Conjugate-pair file: a JSON-lines file with a versioned header record
// carrying the engine id and drop counts, then one record per pair.
void write_pairs(const PreparePairsResult& result, const std::string& engine_id,
                 const std::string& path);
struct PairFile {
  std::vector<ConjugatePair> pairs;
  DropCounts dropped;
  std::string engine_id;
};
PairFile read_pairs(const std::string& path);

}  // namespace conner
