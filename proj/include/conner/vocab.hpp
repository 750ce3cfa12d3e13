#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace conner {

// Word-to-id table. Id 0 is reserved for unknown words; insertion order is
// deterministic (first-seen), which the checkpoint round-trip relies on.
class Vocabulary {
 public:
  static constexpr int kUnkId = 0;

  Vocabulary() { add("<unk>"); }

  int add(const std::string& word) {
    auto [it, inserted] =
        index_.try_emplace(word, static_cast<int>(words_.size()));
    if (inserted) words_.push_back(word);
    return it->second;
  }

  int lookup(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnkId : it->second;
  }

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& tok : tokens) ids.push_back(lookup(tok));
    return ids;
  }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> words_;
};

}  // namespace conner
