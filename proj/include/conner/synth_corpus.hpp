#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "conner/evaluation.hpp"
#include "conner/label_space.hpp"

namespace conner {

// One element of a sentence template: either a single plain word or an
// entity span of the given type with a length drawn from [min_len, max_len].
struct SlotSpec {
  bool is_entity = false;
  int type_index = -1;
  int min_len = 1;
  int max_len = 1;
};

struct TemplateSpec {
  std::vector<SlotSpec> slots;
};

// Recipe for a pair of parallel synthetic languages. The target language is
// the word-for-word lexicon image of the source with `reorder_rule` applied,
// so a lexicon-backed translation engine can reconstruct source surface
// forms exactly.
struct SyntheticLanguageSpec {
  std::vector<std::string> entity_types;
  std::vector<std::size_t> name_vocab_sizes;  // one per entity type
  std::size_t plain_vocab_size = 0;
  std::vector<TemplateSpec> templates;
  std::uint64_t lexicon_seed = 0;
  std::string reorder_rule = "reverse";  // "reverse" or "identity"
  double overlap = 0.0;  // fraction of lexicon entries shared verbatim

  // 4 entity types, 60 words per class, 12 templates.
  static SyntheticLanguageSpec default_spec();
};

struct SplitSizes {
  std::size_t source_train = 2000;
  std::size_t source_dev = 500;
  std::size_t target_train = 2000;
  std::size_t target_test = 500;
};

struct CorpusBundle {
  EntityTypeSet entity_types;
  std::vector<TaggedSentence> source_train;
  std::vector<TaggedSentence> source_dev;
  std::vector<TaggedSentence> target_train;  // labels stripped
  std::vector<TaggedSentence> target_train_hidden;  // same text, gold kept
  std::vector<TaggedSentence> target_test;
  std::vector<std::pair<std::string, std::string>> lexicon;  // src -> tgt
  std::string reorder_rule;
  std::uint64_t seed = 0;
};

// Throws InvalidConfigError when the spec is inconsistent (unknown reorder
// rule, entity slot referencing an undefined type, empty vocabularies, ...).
void validate_spec(const SyntheticLanguageSpec& spec);

// Deterministic in (spec, sizes, seed). Target sentences are sampled in the
// source language, mapped through the lexicon and reordered; their gold
// spans are relocated through the same permutation.
CorpusBundle generate_bundle(const SyntheticLanguageSpec& spec,
                             const SplitSizes& sizes, std::uint64_t seed);

// Applies a reorder rule to a sentence, relocating spans accordingly.
// "reverse" flips the token order; "identity" is a no-op.
void apply_reorder(const std::string& rule, std::vector<std::string>& tokens,
                   std::vector<EntitySpan>& spans);

// Writes the bundle into `dir`: source_train.conll, source_dev.conll,
// target_train.txt (unlabeled), target_train_hidden.conll,
// target_test.conll, lexicon.tsv and manifest.json. Creates `dir` if needed.
void write_bundle(const CorpusBundle& bundle, const std::string& dir);

// Lexicon TSV I/O. The file carries a "# reorder=<rule>" header comment so a
// translation engine can be rebuilt from the file alone.
void write_lexicon(const std::vector<std::pair<std::string, std::string>>& entries,
                   const std::string& reorder_rule, const std::string& path);
struct LexiconFile {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string reorder_rule;
};
LexiconFile read_lexicon(const std::string& path);

}  // namespace conner
