#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fidex/corpus.hpp"

namespace fidex {

/// Whitespace vocabulary with a fixed block of reserved atomic tokens.
///
/// Id layout (also the on-disk line order):
///   0 <pad>, 1 <unk>, 2 </s>, 3 explain, 4 question:, 5 passage:,
///   6 explanation:, 7.. S1..S{max_markers}, then regular tokens.
///
/// Passage and query words that collide with a reserved token are escaped
/// with a leading backslash ("S2" -> "\S2"), so that only injected sentence
/// markers ever map to marker ids.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kEos = 2;
  static constexpr int kExplain = 3;
  static constexpr int kQuestion = 4;
  static constexpr int kPassage = 5;
  static constexpr int kExplanation = 6;
  static constexpr int kFirstMarker = 7;
  static constexpr std::size_t kDefaultMaxMarkers = 256;
  static constexpr std::size_t kDefaultMaxSize = 8192;

  explicit Vocabulary(std::size_t max_markers = kDefaultMaxMarkers);

  /// Frequency-ranked vocabulary over every query, task, sentence and label
  /// word of the corpus; ties broken lexicographically. max_size counts
  /// reserved tokens.
  static Vocabulary build(const std::vector<Example>& corpus, std::size_t max_size = kDefaultMaxSize,
                          std::size_t max_markers = kDefaultMaxMarkers);

  static Vocabulary parse(std::string_view text);
  static Vocabulary load(const std::string& path);
  std::string serialize() const;
  void save(const std::string& path) const;

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t max_markers() const { return max_markers_; }
  std::size_t reserved_count() const { return kFirstMarker + max_markers_; }

  /// Exact lookup, reserved tokens included; unknown -> kUnk.
  int id(std::string_view token) const;
  /// Lookup for passage/query/label words (reserved collisions escaped).
  int content_id(std::string_view word) const;
  const std::string& token(int id) const;

  bool is_reserved(std::string_view token) const;
  static std::string escape(std::string_view word, const Vocabulary& v);

  /// Id of marker S{number}; number is 1-based.
  int marker_id(std::size_t number) const;
  /// 1-based marker number for an id, if it is a marker.
  std::optional<std::size_t> marker_number(int id) const;

  /// FNV-1a of the serialized form.
  std::uint64_t hash() const;

  bool operator==(const Vocabulary& o) const { return id_to_token_ == o.id_to_token_; }

 private:
  void add(std::string token);

  std::size_t max_markers_;
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

/// Rule-based sentence segmentation. Splits after '.', '!' or '?' (plus any
/// closing quotes/brackets) when the next word starts with an uppercase
/// ASCII letter or a digit. A '.' ending a known abbreviation or a
/// single-capital initial ("J.") does not split. Output sentences have
/// single-space word separation.
std::vector<std::string> segment_sentences(std::string_view text);

/// The fixed abbreviation guard list (lowercase, without trailing '.').
const std::vector<std::string>& abbreviation_guard_list();

/// "explain {task} question: {query} passage:"
std::string serialize_prefix(const Example& ex);
/// "explain {task} question: {query} passage: S1 {s_1} ... SN {s_N}".
/// Throws DataError("too many sentences") when N > max_markers.
std::string serialize_input(const Example& ex, std::size_t max_markers = Vocabulary::kDefaultMaxMarkers);
/// "{label} explanation: S{i+1} ..." with indices ascending.
std::string serialize_target(std::string_view label, const IndexSet& rationale_indices);

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab);
std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab);

/// Target token ids: label words, then "explanation: S{i}" pairs, then EOS.
/// Trailing marker pairs that would exceed max_len are dropped so the
/// sequence stays well formed.
std::vector<int> target_ids(std::string_view label, const IndexSet& rationale_indices, const Vocabulary& vocab,
                            std::size_t max_len);

struct MarkedInput {
  std::string task;
  std::vector<int> query_tokens;
  /// [S1, s_1..., S2, s_2..., ..., SN, s_N...]
  std::vector<int> marked_passage_tokens;
  /// sentence index -> position of its marker in marked_passage_tokens.
  std::vector<std::size_t> sentence_starts;
};

MarkedInput mark_sentences(const Example& ex, const Vocabulary& vocab);

/// Query-prefixed encoder inputs for one example.
struct ChunkSet {
  std::size_t context_length = 0;
  std::size_t prefix_length = 0;
  /// Each of length exactly context_length, padded with <pad>.
  std::vector<std::vector<int>> chunks;
  /// 1 marks a padding position.
  std::vector<std::vector<std::uint8_t>> pad_mask;
  std::vector<IndexSet> sentences_in_chunk;
  IndexSet covered_sentences;
  std::size_t n_sentences = 0;
  /// covered_sentences != {0..N-1}
  bool truncated = false;

  std::size_t size() const { return chunks.size(); }
  /// Number of leading non-pad positions of chunk i.
  std::size_t valid_length(std::size_t i) const;
};

/// Greedy sentence-granular packing of the marked passage into at most
/// max_chunks chunks of context_length tokens, each starting with the
/// serialized prefix.
ChunkSet chunk(const Example& ex, const Vocabulary& vocab, std::size_t context_length, std::size_t max_chunks);

}  // namespace fidex
