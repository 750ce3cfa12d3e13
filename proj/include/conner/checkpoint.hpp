#pragma once

#include <string>

#include "conner/tagger.hpp"
#include "conner/vocab.hpp"

namespace conner {

struct Checkpoint {
  Tagger tagger;
  Vocabulary vocab;
};

// JSON checkpoint holding the config, entity types, vocabulary and every
// parameter block. Doubles are written in shortest round-trip form, so
// save -> load -> save reproduces the file byte for byte.
void save_checkpoint(const std::string& path, const Tagger& tagger,
                     const Vocabulary& vocab);

// Throws IoError if the file cannot be read, ParseError if the contents do
// not describe a checkpoint.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace conner
