#include "conner/translation.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "conner/crf.hpp"
#include "conner/error.hpp"

namespace conner {

namespace {

using nlohmann::json;

std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_placeholder_shape(const std::string& token) {
  // "SPANX" + exactly three digits, case-insensitive.
  if (token.size() != 8) return false;
  const std::string low = to_lower(token);
  if (low.compare(0, 5, "spanx") != 0) return false;
  return std::isdigit(static_cast<unsigned char>(low[5])) &&
         std::isdigit(static_cast<unsigned char>(low[6])) &&
         std::isdigit(static_cast<unsigned char>(low[7]));
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string cache_key(const std::string& engine_id, const std::string& text) {
  return engine_id + ":" + hex16(TranslationCache::fnv1a(text));
}

}  // namespace

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

// ---- LexiconEngine ----

LexiconEngine::LexiconEngine(
    std::vector<std::pair<std::string, std::string>> entries,
    std::string reorder_rule, double rho, std::string from_language,
    std::string to_language)
    : rule_(std::move(reorder_rule)),
      rho_(rho),
      from_(std::move(from_language)),
      to_(std::move(to_language)) {
  if (rule_ != "reverse" && rule_ != "identity") {
    throw InvalidConfigError("unknown reorder rule: " + rule_);
  }
  if (!(rho_ >= 0.0 && rho_ <= 1.0)) {
    throw InvalidConfigError("rho must lie in [0, 1]");
  }
  std::set<std::string> seen_to;
  std::uint64_t table_hash = 14695981039346656037ull;
  auto mix = [&table_hash](const std::string& s) {
    for (char c : s) {
      table_hash ^= static_cast<unsigned char>(c);
      table_hash *= 1099511628211ull;
    }
    table_hash ^= 0x1f;
    table_hash *= 1099511628211ull;
  };
  for (auto& [from, to] : entries) {
    if (!table_.emplace(from, to).second || !seen_to.insert(to).second) {
      throw InvalidConfigError("lexicon mapping is not bijective: " + from);
    }
    mix(from);
    mix(to);
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "lexicon(%s,rho=%.2f,table=%s)",
                rule_.c_str(), rho_, hex16(table_hash).c_str());
  id_ = buf;
}

std::string LexiconEngine::translate(const std::string& text) {
  // The corruption decision is a pure function of the request text, so a
  // fixed instance stays cache-compatible.
  const double u = static_cast<double>(TranslationCache::fnv1a("rho#" + text) >> 11) *
                   0x1.0p-53;
  const bool corrupt = u < rho_;

  const std::vector<std::string> input = split_tokens(text);
  AlignmentRecord record;
  record.input = input;
  record.output_pos_of_input.assign(input.size(), -1);

  std::vector<std::pair<std::string, std::size_t>> kept;  // text, input index
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (is_placeholder_shape(input[i])) {
      if (corrupt) continue;  // the engine "lost" the placeholder
      kept.emplace_back(input[i], i);
      continue;
    }
    auto it = table_.find(input[i]);
    kept.emplace_back(it == table_.end() ? input[i] : it->second, i);
  }
  if (rule_ == "reverse") std::reverse(kept.begin(), kept.end());

  record.output.reserve(kept.size());
  for (std::size_t pos = 0; pos < kept.size(); ++pos) {
    record.output.push_back(kept[pos].first);
    record.output_pos_of_input[kept[pos].second] = static_cast<int>(pos);
  }
  ledger_.push_back(record);
  return join_tokens(record.output);
}

// ---- TranslationCache ----

std::uint64_t TranslationCache::fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

TranslationCache::TranslationCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;  // a fresh cache file is created on first put
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      const auto engine = j.at("engine").get<std::string>();
      const auto request = j.at("request").get<std::string>();
      const auto response = j.at("response").get<std::string>();
      if (entries_.emplace(cache_key(engine, request), response).second) {
        if (std::find(engine_order_.begin(), engine_order_.end(), engine) ==
            engine_order_.end()) {
          engine_order_.push_back(engine);
        }
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad cache record: ") + e.what(), line_no);
    }
  }
}

std::optional<std::string> TranslationCache::get(const std::string& engine_id,
                                                 const std::string& text) const {
  auto it = entries_.find(cache_key(engine_id, text));
  if (it == entries_.end()) {
    ++misses_;
    return std::nullopt;
  }
  ++hits_;
  return it->second;
}

void TranslationCache::put(const std::string& engine_id,
                           const std::string& text,
                           const std::string& translation) {
  const std::string key = cache_key(engine_id, text);
  if (!entries_.emplace(key, translation).second) return;  // append-only
  if (std::find(engine_order_.begin(), engine_order_.end(), engine_id) ==
      engine_order_.end()) {
    engine_order_.push_back(engine_id);
  }
  if (path_.empty()) return;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("cannot append to cache file: " + path_);
  json j;
  j["engine"] = engine_id;
  j["hash"] = hex16(fnv1a(text));
  j["request"] = text;
  j["response"] = translation;
  out << j.dump() << '\n';
}

std::vector<std::string> TranslationCache::engine_ids() const {
  return engine_order_;
}

// ---- CachedEngine ----

CachedEngine::CachedEngine(std::shared_ptr<TranslationEngine> inner,
                           std::shared_ptr<TranslationCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

std::string CachedEngine::translate(const std::string& text) {
  if (auto hit = cache_->get(inner_->id(), text)) return *hit;
  const std::string out = inner_->translate(text);
  cache_->put(inner_->id(), text, out);
  return out;
}

// ---- CacheOnlyEngine ----

CacheOnlyEngine::CacheOnlyEngine(std::shared_ptr<TranslationCache> cache,
                                 std::string engine_id)
    : cache_(std::move(cache)), engine_id_(std::move(engine_id)) {
  if (engine_id_.empty()) {
    const auto ids = cache_->engine_ids();
    if (ids.size() != 1) {
      throw InvalidConfigError(
          "cache holds " + std::to_string(ids.size()) +
          " engine ids; pass the wanted engine id explicitly");
    }
    engine_id_ = ids.front();
  }
}

std::string CacheOnlyEngine::translate(const std::string& text) {
  if (auto hit = cache_->get(engine_id_, text)) return *hit;
  throw EngineError("translation not found in cache", text);
}

// ---- ExternalEngine ----

ExternalEngine::ExternalEngine(std::string url, std::string from_language,
                               std::string to_language, int max_retries,
                               int retry_delay_ms)
    : url_(std::move(url)),
      from_(std::move(from_language)),
      to_(std::move(to_language)),
      max_retries_(max_retries),
      retry_delay_ms_(retry_delay_ms) {
  if (url_.empty()) throw InvalidConfigError("external engine url is empty");
}

std::string ExternalEngine::id() const { return "external(" + url_ + ")"; }

std::string ExternalEngine::translate(const std::string& text) {
  // Split "http://host:port/path" into client base and request path.
  const std::size_t scheme = url_.find("://");
  const std::size_t path_start =
      url_.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  const std::string base =
      path_start == std::string::npos ? url_ : url_.substr(0, path_start);
  const std::string path =
      path_start == std::string::npos ? "/" : url_.substr(path_start);

  json request;
  request["text"] = text;
  const std::string body = request.dump();

  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(retry_delay_ms_));
    }
    httplib::Client client(base);
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    try {
      return json::parse(res->body).at("translation").get<std::string>();
    } catch (const json::exception& e) {
      last_error = std::string("bad response body: ") + e.what();
    }
  }
  throw EngineError("external engine failed (" + last_error + ")", text);
}

// ---- Pipeline ----

std::string placeholder_token(int ordinal) {
  const int wrapped = ((ordinal % 1000) + 1000) % 1000;
  char buf[9];
  std::snprintf(buf, sizeof(buf), "SPANX%03d", wrapped);
  return buf;
}

std::vector<std::string> mask_span(const std::vector<std::string>& tokens,
                                   const SpanBounds& span, int ordinal) {
  const int n = static_cast<int>(tokens.size());
  if (span.start < 0 || span.end < span.start || span.end >= n) {
    throw InvalidInputError("span out of bounds");
  }
  std::vector<std::string> masked;
  masked.reserve(tokens.size() - static_cast<std::size_t>(span.length()) + 1);
  masked.insert(masked.end(), tokens.begin(), tokens.begin() + span.start);
  masked.push_back(placeholder_token(ordinal));
  masked.insert(masked.end(), tokens.begin() + span.end + 1, tokens.end());
  return masked;
}

std::optional<std::size_t> locate_placeholder(
    const std::vector<std::string>& tokens, int ordinal) {
  const std::string want = to_lower(placeholder_token(ordinal));
  std::optional<std::size_t> found;
  bool leading_punct = false;
  bool trailing_punct = false;
  std::size_t matches = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string low = to_lower(tokens[i]);
    bool lead = false;
    bool trail = false;
    if (low.size() == want.size() + 1) {
      // Tolerate one attached punctuation character, front or back.
      if (std::ispunct(static_cast<unsigned char>(low.front()))) {
        low.erase(low.begin());
        lead = true;
      } else if (std::ispunct(static_cast<unsigned char>(low.back()))) {
        low.pop_back();
        trail = true;
      }
    }
    if (low == want) {
      ++matches;
      found = i;
      leading_punct = lead;
      trailing_punct = trail;
    }
  }
  (void)leading_punct;
  (void)trailing_punct;
  return matches == 1 ? found : std::nullopt;
}

PairBuildResult build_conjugate_pairs(
    const std::vector<std::string>& tokens,
    const std::vector<SpanBounds>& candidate_spans, std::size_t sentence_id,
    TranslationEngine& engine) {
  std::vector<SpanBounds> spans = candidate_spans;
  std::sort(spans.begin(), spans.end(),
            [](const SpanBounds& a, const SpanBounds& b) {
              return a.start < b.start;
            });
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].start <= spans[i - 1].end) {
      throw InvalidInputError("candidate spans overlap");
    }
  }

  PairBuildResult result;
  for (const SpanBounds& span : spans) {
    const int ordinal = span.start;
    const std::vector<std::string> masked = mask_span(tokens, span, ordinal);
    const std::string masked_translation = engine.translate(join_tokens(masked));
    std::vector<std::string> out_tokens = split_tokens(masked_translation);

    const auto loc = locate_placeholder(out_tokens, ordinal);
    if (!loc) {
      result.dropped.placeholder_lost++;
      continue;
    }

    const std::vector<std::string> span_tokens(
        tokens.begin() + span.start, tokens.begin() + span.end + 1);
    const std::string span_translation =
        engine.translate(join_tokens(span_tokens));
    std::vector<std::string> span_out = split_tokens(span_translation);
    if (span_out.empty()) {
      result.dropped.empty_translation++;
      continue;
    }

    // Keep punctuation that a real engine may have glued to the placeholder.
    const std::string& ph = out_tokens[*loc];
    if (ph.size() == 9) {
      if (std::ispunct(static_cast<unsigned char>(ph.front()))) {
        span_out.front().insert(span_out.front().begin(), ph.front());
      } else if (std::ispunct(static_cast<unsigned char>(ph.back()))) {
        span_out.back().push_back(ph.back());
      }
    }

    ConjugatePair pair;
    pair.sentence_id = sentence_id;
    pair.original_tokens = tokens;
    pair.original_span = span;
    pair.translated_span =
        SpanBounds{static_cast<int>(*loc),
                   static_cast<int>(*loc + span_out.size() - 1)};
    out_tokens.erase(out_tokens.begin() + static_cast<std::ptrdiff_t>(*loc));
    out_tokens.insert(out_tokens.begin() + static_cast<std::ptrdiff_t>(*loc),
                      span_out.begin(), span_out.end());
    pair.translated_tokens = std::move(out_tokens);
    pair.engine_id = engine.id();
    result.pairs.push_back(std::move(pair));
  }
  return result;
}

std::vector<SpanBounds> select_candidate_spans(
    const Tagger& tagger, const Vocabulary& vocab,
    const std::vector<std::string>& tokens) {
  const std::vector<int> ids = vocab.encode(tokens);
  const ForwardCache cache = tagger.forward(ids, false, nullptr);
  const std::vector<Tag> tags = viterbi_decode(
      cache.logits, tagger.params().transitions, tagger.label_space());
  const std::vector<EntitySpan> spans = decode_tags(tags, DecodeMode::strict);
  std::vector<SpanBounds> bounds;
  bounds.reserve(spans.size());
  for (const EntitySpan& e : spans) bounds.push_back(SpanBounds{e.start, e.end});
  return bounds;
}

PreparePairsResult prepare_pairs(const std::vector<TaggedSentence>& corpus,
                                 const Tagger& weak_tagger,
                                 const Vocabulary& vocab,
                                 TranslationEngine& engine) {
  PreparePairsResult result;
  for (std::size_t sid = 0; sid < corpus.size(); ++sid) {
    const std::vector<SpanBounds> spans =
        select_candidate_spans(weak_tagger, vocab, corpus[sid].tokens);
    result.candidate_spans += spans.size();
    result.sentences_processed++;
    if (spans.empty()) continue;
    try {
      PairBuildResult built =
          build_conjugate_pairs(corpus[sid].tokens, spans, sid, engine);
      result.dropped.placeholder_lost += built.dropped.placeholder_lost;
      result.dropped.empty_translation += built.dropped.empty_translation;
      for (ConjugatePair& p : built.pairs) result.pairs.push_back(std::move(p));
    } catch (const EngineError&) {
      // The sentence is abandoned; the run continues.
      result.sentences_failed++;
      result.dropped.engine_error += spans.size();
    }
  }
  return result;
}

PreparePairsResult prepare_pairs_gold(const std::vector<TaggedSentence>& corpus,
                                      TranslationEngine& engine) {
  PreparePairsResult result;
  for (std::size_t sid = 0; sid < corpus.size(); ++sid) {
    if (!corpus[sid].labeled()) {
      throw InvalidInputError("gold-span pair building needs a labeled corpus");
    }
    const std::vector<EntitySpan> entities =
        decode_tags(corpus[sid].tags, DecodeMode::strict);
    std::vector<SpanBounds> spans;
    spans.reserve(entities.size());
    for (const EntitySpan& e : entities) {
      spans.push_back(SpanBounds{e.start, e.end});
    }
    result.candidate_spans += spans.size();
    result.sentences_processed++;
    if (spans.empty()) continue;
    try {
      PairBuildResult built =
          build_conjugate_pairs(corpus[sid].tokens, spans, sid, engine);
      result.dropped.placeholder_lost += built.dropped.placeholder_lost;
      result.dropped.empty_translation += built.dropped.empty_translation;
      for (ConjugatePair& p : built.pairs) result.pairs.push_back(std::move(p));
    } catch (const EngineError&) {
      result.sentences_failed++;
      result.dropped.engine_error += spans.size();
    }
  }
  return result;
}

void write_pairs(const PreparePairsResult& result, const std::string& engine_id,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open pair file for writing: " + path);
  json header;
  header["format"] = "conner-pairs-v1";
  header["engine_id"] = engine_id;
  header["pairs"] = result.pairs.size();
  header["candidate_spans"] = result.candidate_spans;
  header["dropped"] = {{"placeholder_lost", result.dropped.placeholder_lost},
                       {"empty_translation", result.dropped.empty_translation},
                       {"engine_error", result.dropped.engine_error}};
  out << header.dump() << '\n';
  for (const ConjugatePair& p : result.pairs) {
    json j;
    j["sentence_id"] = p.sentence_id;
    j["original_tokens"] = p.original_tokens;
    j["original_span"] = {p.original_span.start, p.original_span.end};
    j["translated_tokens"] = p.translated_tokens;
    j["translated_span"] = {p.translated_span.start, p.translated_span.end};
    j["engine_id"] = p.engine_id;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed while writing pair file: " + path);
}

PairFile read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pair file: " + path);
  PairFile file;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      if (!have_header) {
        if (j.at("format").get<std::string>() != "conner-pairs-v1") {
          throw ParseError("unrecognised pair-file format", line_no);
        }
        file.engine_id = j.at("engine_id").get<std::string>();
        const json& d = j.at("dropped");
        file.dropped.placeholder_lost = d.at("placeholder_lost").get<std::size_t>();
        file.dropped.empty_translation = d.at("empty_translation").get<std::size_t>();
        file.dropped.engine_error = d.at("engine_error").get<std::size_t>();
        have_header = true;
        continue;
      }
      ConjugatePair p;
      p.sentence_id = j.at("sentence_id").get<std::size_t>();
      p.original_tokens = j.at("original_tokens").get<std::vector<std::string>>();
      p.translated_tokens =
          j.at("translated_tokens").get<std::vector<std::string>>();
      const auto os = j.at("original_span").get<std::vector<int>>();
      const auto ts = j.at("translated_span").get<std::vector<int>>();
      if (os.size() != 2 || ts.size() != 2) {
        throw ParseError("span fields must be [start, end]", line_no);
      }
      p.original_span = SpanBounds{os[0], os[1]};
      p.translated_span = SpanBounds{ts[0], ts[1]};
      p.engine_id = j.at("engine_id").get<std::string>();
      const int on = static_cast<int>(p.original_tokens.size());
      const int tn = static_cast<int>(p.translated_tokens.size());
      if (p.original_span.start < 0 || p.original_span.end < p.original_span.start ||
          p.original_span.end >= on || p.translated_span.start < 0 ||
          p.translated_span.end < p.translated_span.start ||
          p.translated_span.end >= tn) {
        throw ParseError("span out of bounds", line_no);
      }
      file.pairs.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad pair record: ") + e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("pair file is missing its header record");
  return file;
}

}  // namespace conner
