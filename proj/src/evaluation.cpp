#include "conner/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

#include "conner/error.hpp"

namespace conner {

namespace {

double safe_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double r) {
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

EvalResult micro_f1(const std::vector<std::vector<EntitySpan>>& gold,
                    const std::vector<std::vector<EntitySpan>>& pred,
                    std::size_t num_types) {
  if (gold.size() != pred.size()) {
    throw InvalidInputError("gold and predicted corpora differ in length");
  }

  EvalResult result;
  result.per_type.resize(num_types);
  using Key = std::tuple<int, int, int>;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::set<Key> gold_set;
    for (const EntitySpan& e : gold[s]) {
      gold_set.emplace(e.start, e.end, e.type_index);
      result.num_gold++;
      result.per_type[static_cast<std::size_t>(e.type_index)].num_gold++;
    }
    for (const EntitySpan& e : pred[s]) {
      result.num_pred++;
      auto& tc = result.per_type[static_cast<std::size_t>(e.type_index)];
      tc.num_pred++;
      if (gold_set.count({e.start, e.end, e.type_index}) > 0) {
        result.num_correct++;
        tc.num_correct++;
      }
    }
  }

  result.precision = safe_ratio(result.num_correct, result.num_pred);
  result.recall = safe_ratio(result.num_correct, result.num_gold);
  result.f1 = f1_of(result.precision, result.recall);
  return result;
}

std::vector<TaggedSentence> read_conll(const std::string& path,
                                       bool has_labels,
                                       const LabelSpace& space,
                                       const std::string& language) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);

  std::vector<TaggedSentence> sentences;
  TaggedSentence current;
  current.language = language;
  std::size_t line_no = 0;

  auto flush = [&]() {
    if (current.tokens.empty()) return;
    if (has_labels) {
      try {
        decode_tags(current.tags, DecodeMode::strict);
      } catch (const IllegalSequenceError& e) {
        throw IllegalSequenceError("sentence " +
                                       std::to_string(sentences.size()) +
                                       " of " + path + ": " + e.what(),
                                   e.position());
      }
    }
    sentences.push_back(std::move(current));
    current = TaggedSentence{};
    current.language = language;
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    const std::size_t sep = line.find_first_of(" \t");
    if (!has_labels) {
      if (sep != std::string::npos) {
        throw ParseError("unexpected second column in unlabeled corpus", line_no);
      }
      current.tokens.push_back(line);
      continue;
    }
    if (sep == std::string::npos) {
      throw ParseError("expected 'token tag' but found one column", line_no);
    }
    const std::string token = line.substr(0, sep);
    const std::size_t tag_start = line.find_first_not_of(" \t", sep);
    if (token.empty() || tag_start == std::string::npos) {
      throw ParseError("empty token or tag column", line_no);
    }
    const std::string tag_text = line.substr(tag_start);
    if (tag_text.find_first_of(" \t") != std::string::npos) {
      throw ParseError("more than two columns", line_no);
    }
    Tag tag;
    try {
      tag = space.parse_tag(tag_text);
    } catch (const InvalidInputError& e) {
      throw ParseError(e.what(), line_no);
    }
    current.tokens.push_back(token);
    current.tags.push_back(tag);
  }
  flush();
  return sentences;
}

void write_conll(const std::vector<TaggedSentence>& sentences,
                 const std::string& path, const LabelSpace& space) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open corpus file for writing: " + path);
  for (const TaggedSentence& sentence : sentences) {
    if (sentence.labeled() &&
        sentence.tags.size() != sentence.tokens.size()) {
      throw InvalidInputError("sentence has mismatched token and tag counts");
    }
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      out << sentence.tokens[i];
      if (sentence.labeled()) out << '\t' << space.tag_name(sentence.tags[i]);
      out << '\n';
    }
    out << '\n';
  }
  if (!out) throw IoError("failed while writing corpus: " + path);
}

}  // namespace conner
