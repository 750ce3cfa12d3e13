#include "conner/synth_corpus.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "conner/error.hpp"
#include "conner/rng.hpp"

namespace conner {

namespace {

const std::vector<std::string> kSourceSyllables = {
    "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du",
    "ka", "ke", "ki", "ko", "ku", "ma", "me", "mi", "mo", "mu",
    "ra", "re", "ri", "ro", "ru", "sa", "se", "si", "so", "su"};

const std::vector<std::string> kTargetSyllables = {
    "ab", "eb", "ib", "ob", "ub", "ad", "ed", "id", "od", "ud",
    "ag", "eg", "ig", "og", "ug", "al", "el", "il", "ol", "ul",
    "an", "en", "in", "on", "un", "ar", "er", "ir", "or", "ur"};

// index -> unique word: two or more base-30 digits rendered as syllables.
// Source words always start with a consonant, target words with a vowel, so
// the two surface vocabularies are disjoint by construction.
std::string make_word(std::size_t index, const std::vector<std::string>& syl,
                      bool capitalize) {
  const std::size_t base = syl.size();
  std::vector<std::size_t> digits;
  std::size_t v = index;
  while (v > 0) {
    digits.push_back(v % base);
    v /= base;
  }
  while (digits.size() < 2) digits.push_back(0);
  std::string word;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) word += syl[*it];
  if (capitalize) word[0] = static_cast<char>(std::toupper(word[0]));
  return word;
}

struct WordBanks {
  std::vector<std::vector<std::string>> names;  // per entity type
  std::vector<std::string> plain;
};

WordBanks build_banks(const SyntheticLanguageSpec& spec,
                      const std::vector<std::string>& syllables) {
  WordBanks banks;
  std::size_t next = 0;
  banks.plain.reserve(spec.plain_vocab_size);
  for (std::size_t i = 0; i < spec.plain_vocab_size; ++i) {
    banks.plain.push_back(make_word(next++, syllables, false));
  }
  banks.names.resize(spec.entity_types.size());
  for (std::size_t t = 0; t < spec.entity_types.size(); ++t) {
    for (std::size_t i = 0; i < spec.name_vocab_sizes[t]; ++i) {
      banks.names[t].push_back(make_word(next++, syllables, true));
    }
  }
  return banks;
}

struct Sample {
  std::vector<std::string> tokens;
  std::vector<EntitySpan> spans;
};

Sample sample_sentence(const SyntheticLanguageSpec& spec,
                       const WordBanks& banks, Rng& rng) {
  const TemplateSpec& tpl = spec.templates[rng.next_index(spec.templates.size())];
  Sample s;
  for (const SlotSpec& slot : tpl.slots) {
    if (!slot.is_entity) {
      s.tokens.push_back(banks.plain[rng.next_index(banks.plain.size())]);
      continue;
    }
    const int len =
        slot.min_len +
        static_cast<int>(rng.next_index(
            static_cast<std::size_t>(slot.max_len - slot.min_len + 1)));
    const int start = static_cast<int>(s.tokens.size());
    const auto& bank = banks.names[static_cast<std::size_t>(slot.type_index)];
    for (int k = 0; k < len; ++k) {
      s.tokens.push_back(bank[rng.next_index(bank.size())]);
    }
    s.spans.push_back(EntitySpan{start, start + len - 1, slot.type_index});
  }
  return s;
}

TaggedSentence to_tagged(const Sample& s, const std::string& language) {
  TaggedSentence out;
  out.tokens = s.tokens;
  out.tags = encode_entities(s.tokens.size(), s.spans);
  out.language = language;
  return out;
}

}  // namespace

SyntheticLanguageSpec SyntheticLanguageSpec::default_spec() {
  SyntheticLanguageSpec spec;
  spec.entity_types = {"PER", "LOC", "ORG", "MISC"};
  spec.name_vocab_sizes = {60, 60, 60, 60};
  spec.plain_vocab_size = 60;
  spec.lexicon_seed = 2024;
  spec.reorder_rule = "reverse";
  spec.overlap = 0.0;

  auto word = [] { return SlotSpec{false, -1, 1, 1}; };
  auto entity = [](int type, int lo, int hi) {
    return SlotSpec{true, type, lo, hi};
  };
  spec.templates = {
      {{entity(0, 1, 2), word(), entity(1, 1, 2), word(), word()}},
      {{word(), entity(0, 1, 3), word(), word(), entity(2, 1, 2)}},
      {{entity(2, 1, 3), word(), word(), entity(1, 1, 1), word(),
        entity(3, 1, 2)}},
      {{word(), entity(1, 1, 2), word(), entity(3, 1, 3)}},
      {{entity(0, 2, 3), word(), entity(0, 1, 2), word(), word(),
        entity(1, 1, 2)}},
      {{word(), word(), entity(2, 2, 3), word()}},
      {{entity(3, 1, 1), word(), entity(0, 1, 2), word(), entity(2, 1, 3)}},
      {{word(), entity(1, 2, 3), word(), word()}},
      {{entity(0, 1, 2), entity(1, 1, 2), word(), word()}},
      {{word(), entity(3, 2, 2), entity(2, 1, 1), word(), word()}},
      {{entity(1, 1, 3), word(), entity(3, 1, 2), word(), entity(0, 1, 2),
        word()}},
      {{word(), word(), entity(0, 1, 2), word(), entity(1, 1, 1)}},
  };
  return spec;
}

void validate_spec(const SyntheticLanguageSpec& spec) {
  if (spec.entity_types.empty()) {
    throw InvalidConfigError("spec needs at least one entity type");
  }
  if (spec.name_vocab_sizes.size() != spec.entity_types.size()) {
    throw InvalidConfigError(
        "name_vocab_sizes must have one entry per entity type");
  }
  for (std::size_t size : spec.name_vocab_sizes) {
    if (size == 0) throw InvalidConfigError("name vocabularies must be non-empty");
  }
  if (spec.plain_vocab_size == 0) {
    throw InvalidConfigError("plain vocabulary must be non-empty");
  }
  if (spec.templates.empty()) {
    throw InvalidConfigError("spec needs at least one template");
  }
  if (spec.reorder_rule != "reverse" && spec.reorder_rule != "identity") {
    throw InvalidConfigError("unknown reorder rule: " + spec.reorder_rule);
  }
  if (!(spec.overlap >= 0.0 && spec.overlap <= 1.0)) {
    throw InvalidConfigError("overlap must lie in [0, 1]");
  }
  bool any_entity = false;
  for (const TemplateSpec& tpl : spec.templates) {
    if (tpl.slots.empty()) {
      throw InvalidConfigError("templates must have at least one slot");
    }
    for (const SlotSpec& slot : tpl.slots) {
      if (!slot.is_entity) continue;
      any_entity = true;
      if (slot.type_index < 0 ||
          static_cast<std::size_t>(slot.type_index) >=
              spec.entity_types.size()) {
        throw InvalidConfigError("entity slot references an undefined type");
      }
      if (slot.min_len < 1 || slot.min_len > slot.max_len) {
        throw InvalidConfigError("entity slot has an invalid length range");
      }
    }
  }
  if (!any_entity) {
    throw InvalidConfigError("no template produces an entity");
  }
}

void apply_reorder(const std::string& rule, std::vector<std::string>& tokens,
                   std::vector<EntitySpan>& spans) {
  if (rule == "identity") return;
  if (rule != "reverse") throw InvalidConfigError("unknown reorder rule: " + rule);
  std::reverse(tokens.begin(), tokens.end());
  const int n = static_cast<int>(tokens.size());
  for (EntitySpan& span : spans) {
    const int s = n - 1 - span.end;
    const int e = n - 1 - span.start;
    span.start = s;
    span.end = e;
  }
}

CorpusBundle generate_bundle(const SyntheticLanguageSpec& spec,
                             const SplitSizes& sizes, std::uint64_t seed) {
  validate_spec(spec);
  if (sizes.source_train == 0 || sizes.source_dev == 0 ||
      sizes.target_train == 0 || sizes.target_test == 0) {
    throw InvalidConfigError("every split needs at least one sentence");
  }

  const WordBanks src_banks = build_banks(spec, kSourceSyllables);
  const WordBanks tgt_banks = build_banks(spec, kTargetSyllables);

  // Bijective lexicon, with an optional fraction of entries shared verbatim
  // between the languages (picked by shuffle so the overlap is spread over
  // all word classes).
  std::vector<std::pair<std::string, std::string>> lexicon;
  auto add_entries = [&](const std::vector<std::string>& src,
                         const std::vector<std::string>& tgt) {
    for (std::size_t i = 0; i < src.size(); ++i) lexicon.emplace_back(src[i], tgt[i]);
  };
  add_entries(src_banks.plain, tgt_banks.plain);
  for (std::size_t t = 0; t < spec.entity_types.size(); ++t) {
    add_entries(src_banks.names[t], tgt_banks.names[t]);
  }
  Rng lex_rng(spec.lexicon_seed);
  if (spec.overlap > 0.0) {
    std::vector<std::size_t> order(lexicon.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    lex_rng.shuffle(order);
    const auto shared = static_cast<std::size_t>(
        spec.overlap * static_cast<double>(lexicon.size()));
    for (std::size_t i = 0; i < shared; ++i) {
      lexicon[order[i]].second = lexicon[order[i]].first;
    }
  }
  std::unordered_map<std::string, std::string> src2tgt;
  for (const auto& [s, t] : lexicon) src2tgt[s] = t;

  CorpusBundle bundle;
  bundle.entity_types = EntityTypeSet{spec.entity_types};
  bundle.lexicon = lexicon;
  bundle.reorder_rule = spec.reorder_rule;
  bundle.seed = seed;

  Rng base(seed);
  auto sample_split = [&](std::size_t count, std::uint64_t tag,
                          bool as_target) {
    Rng rng = base.derive(tag);
    std::vector<TaggedSentence> labeled;
    labeled.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      Sample s = sample_sentence(spec, src_banks, rng);
      if (as_target) {
        for (std::string& tok : s.tokens) tok = src2tgt.at(tok);
        apply_reorder(spec.reorder_rule, s.tokens, s.spans);
      }
      labeled.push_back(to_tagged(s, as_target ? "tgt" : "src"));
    }
    return labeled;
  };

  bundle.source_train = sample_split(sizes.source_train, 1, false);
  bundle.source_dev = sample_split(sizes.source_dev, 2, false);
  bundle.target_train_hidden = sample_split(sizes.target_train, 3, true);
  bundle.target_test = sample_split(sizes.target_test, 4, true);

  bundle.target_train.reserve(bundle.target_train_hidden.size());
  for (const TaggedSentence& s : bundle.target_train_hidden) {
    TaggedSentence stripped;
    stripped.tokens = s.tokens;
    stripped.language = s.language;
    bundle.target_train.push_back(std::move(stripped));
  }
  return bundle;
}

void write_lexicon(const std::vector<std::pair<std::string, std::string>>& entries,
                   const std::string& reorder_rule, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open lexicon file for writing: " + path);
  out << "# source->target word table\n";
  out << "# reorder=" << reorder_rule << '\n';
  for (const auto& [src, tgt] : entries) out << src << '\t' << tgt << '\n';
  if (!out) throw IoError("failed while writing lexicon: " + path);
}

LexiconFile read_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon file: " + path);
  LexiconFile file;
  file.reorder_rule = "identity";
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen_src;
  std::set<std::string> seen_tgt;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# reorder=";
      if (line.rfind(key, 0) == 0) file.reorder_rule = line.substr(key.size());
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw ParseError("expected 'source<TAB>target'", line_no);
    }
    std::string src = line.substr(0, tab);
    std::string tgt = line.substr(tab + 1);
    if (!seen_src.insert(src).second || !seen_tgt.insert(tgt).second) {
      throw ParseError("lexicon mapping is not bijective", line_no);
    }
    file.entries.emplace_back(std::move(src), std::move(tgt));
  }
  return file;
}

void write_bundle(const CorpusBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);

  const LabelSpace space = LabelSpace::build(bundle.entity_types);
  const fs::path base(dir);
  write_conll(bundle.source_train, (base / "source_train.conll").string(), space);
  write_conll(bundle.source_dev, (base / "source_dev.conll").string(), space);
  write_conll(bundle.target_train, (base / "target_train.txt").string(), space);
  write_conll(bundle.target_train_hidden,
              (base / "target_train_hidden.conll").string(), space);
  write_conll(bundle.target_test, (base / "target_test.conll").string(), space);
  write_lexicon(bundle.lexicon, bundle.reorder_rule,
                (base / "lexicon.tsv").string());

  nlohmann::json manifest;
  manifest["entity_types"] = bundle.entity_types.types;
  manifest["reorder_rule"] = bundle.reorder_rule;
  manifest["seed"] = bundle.seed;
  manifest["lexicon_entries"] = bundle.lexicon.size();
  manifest["counts"] = {{"source_train", bundle.source_train.size()},
                        {"source_dev", bundle.source_dev.size()},
                        {"target_train", bundle.target_train.size()},
                        {"target_test", bundle.target_test.size()}};
  std::ofstream out(base / "manifest.json");
  if (!out) throw IoError("cannot write manifest.json in " + dir);
  out << manifest.dump(2) << '\n';
}

}  // namespace conner
