#include "conner/checkpoint.hpp"

#include <fstream>
#include <vector>

#include <json.hpp>

#include "conner/error.hpp"

namespace conner {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "conner-checkpoint-v1";

json mat_to_json(const Mat& m) {
  return json(std::vector<double>(m.data(), m.data() + m.size()));
}

void mat_from_json(const json& j, Mat& m, const char* field) {
  const auto values = j.get<std::vector<double>>();
  if (values.size() != m.size()) {
    throw ParseError(std::string("checkpoint field '") + field +
                     "' has the wrong number of values");
  }
  std::copy(values.begin(), values.end(), m.data());
}

}  // namespace

void save_checkpoint(const std::string& path, const Tagger& tagger,
                     const Vocabulary& vocab) {
  const TaggerConfig& c = tagger.config();
  const TaggerParameters& p = tagger.params();

  json j;
  j["format"] = kFormatTag;
  j["config"] = {{"vocab_size", c.vocab_size}, {"d_emb", c.d_emb},
                 {"d_hid", c.d_hid},           {"window", c.window},
                 {"dropout", c.dropout},       {"seed", c.seed}};
  j["entity_types"] = tagger.label_space().entity_types().types;
  j["vocab"] = vocab.words();
  j["params"] = {{"embeddings", mat_to_json(p.embeddings)},
                 {"hidden_w", mat_to_json(p.hidden_w)},
                 {"hidden_b", p.hidden_b},
                 {"emission_w", mat_to_json(p.emission_w)},
                 {"emission_b", p.emission_b},
                 {"transitions", mat_to_json(p.transitions)}};

  std::ofstream out(path);
  if (!out) throw IoError("cannot open checkpoint file for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed while writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint file: " + path);

  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid checkpoint json: ") + e.what());
  }

  try {
    if (j.at("format").get<std::string>() != kFormatTag) {
      throw ParseError("unrecognised checkpoint format tag");
    }
    const json& jc = j.at("config");
    TaggerConfig config;
    config.vocab_size = jc.at("vocab_size").get<std::size_t>();
    config.d_emb = jc.at("d_emb").get<std::size_t>();
    config.d_hid = jc.at("d_hid").get<std::size_t>();
    config.window = jc.at("window").get<std::size_t>();
    config.dropout = jc.at("dropout").get<double>();
    config.seed = jc.at("seed").get<std::uint64_t>();

    EntityTypeSet types{j.at("entity_types").get<std::vector<std::string>>()};
    Tagger tagger(config, LabelSpace::build(types));

    const json& jp = j.at("params");
    TaggerParameters& p = tagger.params();
    mat_from_json(jp.at("embeddings"), p.embeddings, "embeddings");
    mat_from_json(jp.at("hidden_w"), p.hidden_w, "hidden_w");
    p.hidden_b = jp.at("hidden_b").get<std::vector<double>>();
    mat_from_json(jp.at("emission_w"), p.emission_w, "emission_w");
    p.emission_b = jp.at("emission_b").get<std::vector<double>>();
    mat_from_json(jp.at("transitions"), p.transitions, "transitions");
    if (p.hidden_b.size() != config.d_hid ||
        p.emission_b.size() != tagger.label_space().size()) {
      throw ParseError("checkpoint bias vectors have the wrong length");
    }

    Vocabulary vocab;
    const auto words = j.at("vocab").get<std::vector<std::string>>();
    if (words.empty() || words[0] != "<unk>") {
      throw ParseError("checkpoint vocabulary must start with <unk>");
    }
    for (std::size_t i = 1; i < words.size(); ++i) vocab.add(words[i]);
    if (vocab.size() != config.vocab_size) {
      throw ParseError("checkpoint vocabulary size does not match the config");
    }

    return Checkpoint{std::move(tagger), std::move(vocab)};
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint is missing fields: ") + e.what());
  }
}

}  // namespace conner
