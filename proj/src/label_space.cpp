#include "conner/label_space.hpp"

#include <algorithm>
#include <unordered_set>

namespace conner {

namespace {

constexpr TagKind kPrefixOrder[4] = {TagKind::B, TagKind::I, TagKind::E,
                                     TagKind::S};

int prefix_offset(TagKind kind) {
  switch (kind) {
    case TagKind::B: return 0;
    case TagKind::I: return 1;
    case TagKind::E: return 2;
    case TagKind::S: return 3;
    case TagKind::O: return -1;
  }
  return -1;
}

char prefix_char(TagKind kind) {
  switch (kind) {
    case TagKind::B: return 'B';
    case TagKind::I: return 'I';
    case TagKind::E: return 'E';
    case TagKind::S: return 'S';
    case TagKind::O: return 'O';
  }
  return '?';
}

}  // namespace

LabelSpace LabelSpace::build(EntityTypeSet types) {
  if (types.types.empty())
    throw InvalidInputError("label space requires at least one entity type");
  std::unordered_set<std::string> seen;
  for (const auto& name : types.types) {
    if (name.empty())
      throw InvalidInputError("entity type names must be non-empty");
    if (!seen.insert(name).second)
      throw InvalidInputError("duplicate entity type name: " + name);
  }
  LabelSpace space;
  space.types_ = std::move(types);
  space.tags_.reserve(4 * space.types_.types.size() + 1);
  for (int t = 0; t < static_cast<int>(space.types_.types.size()); ++t)
    for (TagKind kind : kPrefixOrder) space.tags_.push_back(Tag{kind, t});
  space.tags_.push_back(Tag::outside());
  return space;
}

std::size_t LabelSpace::index_of(const Tag& tag) const {
  return index_of(tag.kind, tag.type_index);
}

std::size_t LabelSpace::index_of(TagKind kind, int type_index) const {
  if (kind == TagKind::O) return outside_index();
  if (type_index < 0 || type_index >= static_cast<int>(num_types()))
    throw InvalidInputError("tag type index out of range");
  return static_cast<std::size_t>(4 * type_index + prefix_offset(kind));
}

std::string LabelSpace::tag_name(const Tag& tag) const {
  if (tag.kind == TagKind::O) return "O";
  if (tag.type_index < 0 || tag.type_index >= static_cast<int>(num_types()))
    throw InvalidInputError("tag type index out of range");
  return std::string(1, prefix_char(tag.kind)) + "-" +
         types_.types[tag.type_index];
}

Tag LabelSpace::parse_tag(const std::string& name) const {
  if (name == "O") return Tag::outside();
  if (name.size() < 3 || name[1] != '-')
    throw InvalidInputError("malformed tag name: '" + name + "'");
  TagKind kind;
  switch (name[0]) {
    case 'B': kind = TagKind::B; break;
    case 'I': kind = TagKind::I; break;
    case 'E': kind = TagKind::E; break;
    case 'S': kind = TagKind::S; break;
    default:
      throw InvalidInputError("unknown tag prefix in '" + name + "'");
  }
  const std::string type = name.substr(2);
  auto it = std::find(types_.types.begin(), types_.types.end(), type);
  if (it == types_.types.end())
    throw InvalidInputError("unknown entity type in tag '" + name + "'");
  return Tag{kind, static_cast<int>(it - types_.types.begin())};
}

bool LabelSpace::legal_from_start(const Tag& t) const {
  return t.kind == TagKind::B || t.kind == TagKind::S || t.kind == TagKind::O;
}

bool LabelSpace::legal_transition(const Tag& prev, const Tag& next) const {
  const bool prev_open = prev.kind == TagKind::B || prev.kind == TagKind::I;
  if (prev_open) {
    // An open entity may only continue or close with the same type.
    return (next.kind == TagKind::I || next.kind == TagKind::E) &&
           next.type_index == prev.type_index;
  }
  // O, E, S all close; anything that starts fresh may follow.
  return legal_from_start(next);
}

bool LabelSpace::legal_to_stop(const Tag& t) const {
  return t.kind == TagKind::O || t.kind == TagKind::E || t.kind == TagKind::S;
}

std::vector<Tag> encode_entities(std::size_t sentence_length,
                                 const std::vector<EntitySpan>& spans) {
  std::vector<Tag> tags(sentence_length, Tag::outside());
  std::vector<bool> taken(sentence_length, false);
  for (const auto& span : spans) {
    if (span.start < 0 || span.end < span.start ||
        span.end >= static_cast<int>(sentence_length))
      throw InvalidInputError("entity span out of bounds");
    for (int i = span.start; i <= span.end; ++i) {
      if (taken[i]) throw InvalidInputError("overlapping entity spans");
      taken[i] = true;
    }
    const auto seq = span_tag_sequence(span.type_index, span.length());
    for (int i = span.start; i <= span.end; ++i) tags[i] = seq[i - span.start];
  }
  return tags;
}

std::vector<EntitySpan> decode_tags(const std::vector<Tag>& tags,
                                    DecodeMode mode) {
  std::vector<EntitySpan> spans;
  int open_start = -1;  // start of a pending B.../I... run, -1 if none
  int open_type = -1;

  auto fail = [&](std::size_t pos, const char* what) {
    if (mode == DecodeMode::strict)
      throw IllegalSequenceError(std::string("illegal tag sequence: ") + what,
                                 pos);
    // lenient: drop the pending fragment and carry on
    open_start = -1;
    open_type = -1;
  };

  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Tag& t = tags[i];
    const bool inside = open_start >= 0;
    switch (t.kind) {
      case TagKind::O:
        if (inside) fail(i, "O interrupts an open entity");
        break;
      case TagKind::S:
        if (inside) fail(i, "S interrupts an open entity");
        spans.push_back(
            EntitySpan{static_cast<int>(i), static_cast<int>(i), t.type_index});
        break;
      case TagKind::B:
        if (inside) {
          fail(i, "B interrupts an open entity");
          if (mode == DecodeMode::lenient) {
            open_start = static_cast<int>(i);
            open_type = t.type_index;
          }
          break;
        }
        open_start = static_cast<int>(i);
        open_type = t.type_index;
        break;
      case TagKind::I:
        if (!inside || t.type_index != open_type)
          fail(i, "I without a matching open entity");
        break;
      case TagKind::E:
        if (!inside || t.type_index != open_type) {
          fail(i, "E without a matching open entity");
          break;
        }
        spans.push_back(
            EntitySpan{open_start, static_cast<int>(i), open_type});
        open_start = -1;
        open_type = -1;
        break;
    }
  }
  if (open_start >= 0 && !tags.empty())
    fail(tags.size() - 1, "entity left open at end of sequence");
  return spans;
}

std::vector<Tag> span_tag_sequence(int type_index, std::size_t length) {
  if (length == 0)
    throw InvalidInputError("span_tag_sequence requires length >= 1");
  std::vector<Tag> seq;
  seq.reserve(length);
  if (length == 1) {
    seq.push_back(Tag{TagKind::S, type_index});
    return seq;
  }
  seq.push_back(Tag{TagKind::B, type_index});
  for (std::size_t i = 0; i + 2 < length; ++i)
    seq.push_back(Tag{TagKind::I, type_index});
  seq.push_back(Tag{TagKind::E, type_index});
  return seq;
}

}  // namespace conner
