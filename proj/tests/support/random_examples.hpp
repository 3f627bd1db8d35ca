#pragma once

#include <string>
#include <vector>

#include "fidex/corpus.hpp"
#include "fidex/util.hpp"

namespace gen {

inline std::string word(fidex::Rng& r, bool unicode = false) {
  static const char* const kPieces[] = {"a", "b", "k", "z", "q", "x", "y", "m", "o", "e", "7", "?", ",", "'"};
  static const char* const kUnicode[] = {"\xc3\xa9", "\xce\xbb", "\xe2\x82\xac", "\xf0\x9f\x99\x82", "\xe6\x97\xa5"};
  std::string w;
  const auto n = 1 + r.below(6);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (unicode && r.below(4) == 0)
      w += kUnicode[r.below(std::size(kUnicode))];
    else
      w += kPieces[r.below(std::size(kPieces))];
  }
  return w;
}

inline std::string sentence(fidex::Rng& r, std::size_t min_words, std::size_t max_words, bool unicode = false) {
  std::string s;
  const auto n = min_words + r.below(max_words - min_words + 1);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += word(r, unicode);
  }
  return s;
}

inline fidex::IndexSet subset(fidex::Rng& r, int n, double p = 0.3) {
  fidex::IndexSet s;
  for (int i = 0; i < n; ++i)
    if (r.uniform() < p) s.insert(i);
  return s;
}

// Valid example with 1..max_sentences sentences and a random rationale.
inline fidex::Example example(fidex::Rng& r, const std::string& id, std::size_t max_sentences = 20,
                              bool unicode = false) {
  fidex::Example ex;
  ex.id = id;
  ex.task = "t" + std::to_string(r.below(3));
  ex.query = sentence(r, 1, 5, unicode);
  const auto n = 1 + r.below(max_sentences);
  for (std::uint64_t i = 0; i < n; ++i) ex.sentences.push_back(sentence(r, 1, 8, unicode));
  ex.label = r.below(2) ? "True" : sentence(r, 1, 3, unicode);
  ex.rationale_indices = subset(r, static_cast<int>(n));
  return ex;
}

}  // namespace gen
