#pragma once

#include <string>
#include <vector>

#include "conner/label_space.hpp"

namespace conner {

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<Tag> tags;  // empty for unlabeled data
  std::string language;

  bool labeled() const { return !tags.empty(); }
};

struct TypeCounts {
  std::size_t num_gold = 0;
  std::size_t num_pred = 0;
  std::size_t num_correct = 0;
};

struct EvalResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t num_gold = 0;
  std::size_t num_pred = 0;
  std::size_t num_correct = 0;
  std::vector<TypeCounts> per_type;  // indexed by entity type
};

// Entity-level micro-F1: an entity is correct iff its boundaries and type
// both match exactly. Counts are pooled over the whole corpus. Precision is
// 0 when nothing is predicted, recall is 0 when there is no gold, and F1 is
// 0 when P + R = 0. Throws InvalidInputError on a sentence-count mismatch.
EvalResult micro_f1(const std::vector<std::vector<EntitySpan>>& gold,
                    const std::vector<std::vector<EntitySpan>>& pred,
                    std::size_t num_types);

// Two-column CoNLL reader: "token<sep>tag" with a single tab or a run of
// spaces as separator, blank line terminating each sentence. With
// `has_labels` off, one token per line. Tag sequences are validated with a
// strict decode. Malformed lines raise ParseError with the 1-based line
// number; illegal tag sequences raise IllegalSequenceError.
std::vector<TaggedSentence> read_conll(const std::string& path,
                                       bool has_labels,
                                       const LabelSpace& space,
                                       const std::string& language = "");

// Inverse of read_conll: tab-separated when tags are present, one token per
// line otherwise. Round-trips byte-identically modulo one trailing newline.
void write_conll(const std::vector<TaggedSentence>& sentences,
                 const std::string& path, const LabelSpace& space);

}  // namespace conner
