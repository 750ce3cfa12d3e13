#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "conner/error.hpp"

namespace conner {

// Ordered set of entity-type names (PER, LOC, ...). Names must be unique and
// non-empty; at least one type is required.
struct EntityTypeSet {
  std::vector<std::string> types;

  std::size_t count() const { return types.size(); }
};

enum class TagKind : std::uint8_t { B, I, E, S, O };

// One BIOES tag. type_index is -1 exactly when kind == O.
struct Tag {
  TagKind kind = TagKind::O;
  int type_index = -1;

  bool operator==(const Tag&) const = default;

  static Tag outside() { return Tag{TagKind::O, -1}; }
};

// A contiguous, typed entity. Token indices are inclusive on both ends.
struct EntitySpan {
  int start = 0;
  int end = 0;
  int type_index = 0;

  bool operator==(const EntitySpan&) const = default;
  int length() const { return end - start + 1; }
};

// Boundaries without a type; what candidate-span selection hands to the
// translation pipeline.
struct SpanBounds {
  int start = 0;
  int end = 0;

  bool operator==(const SpanBounds&) const = default;
  int length() const { return end - start + 1; }
};

enum class DecodeMode { strict, lenient };

// The full tag inventory over an entity-type set: for each type, the four
// prefixes B, I, E, S in that order, then a single O tag last. Size is
// always 4N+1 and the ordering is deterministic given the types.
class LabelSpace {
 public:
  // Throws InvalidInputError on empty, duplicate, or blank type names.
  static LabelSpace build(EntityTypeSet types);

  std::size_t size() const { return tags_.size(); }
  std::size_t num_types() const { return types_.types.size(); }
  const EntityTypeSet& entity_types() const { return types_; }
  const std::vector<Tag>& tags() const { return tags_; }

  const Tag& tag_at(std::size_t index) const { return tags_[index]; }
  std::size_t index_of(const Tag& tag) const;
  std::size_t index_of(TagKind kind, int type_index) const;
  std::size_t outside_index() const { return tags_.size() - 1; }

  // "B-PER", "O", ...
  std::string tag_name(const Tag& tag) const;
  // Inverse of tag_name; throws InvalidInputError on unknown names.
  Tag parse_tag(const std::string& name) const;

  // BIOES bigram legality, used by Viterbi masking and strict decoding.
  bool legal_from_start(const Tag& t) const;
  bool legal_transition(const Tag& prev, const Tag& next) const;
  bool legal_to_stop(const Tag& t) const;

 private:
  EntityTypeSet types_;
  std::vector<Tag> tags_;
};

// Renders non-overlapping spans as a BIOES tag sequence of the given length.
// Throws InvalidInputError on out-of-bounds or overlapping spans.
std::vector<Tag> encode_entities(std::size_t sentence_length,
                                 const std::vector<EntitySpan>& spans);

// Inverse of encode_entities. Strict mode throws IllegalSequenceError at the
// first offending position; lenient mode drops ill-formed fragments and is
// meant for diagnostics only.
std::vector<EntitySpan> decode_tags(const std::vector<Tag>& tags,
                                    DecodeMode mode);

// The unique legal tag sequence realizing one entity of one class over a span
// of the given length: [S], [B,E], or [B, I..., E].
std::vector<Tag> span_tag_sequence(int type_index, std::size_t length);

}  // namespace conner
