#include "fidex/textproc.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace fidex {

namespace {

const char* const kReservedHead[] = {"<pad>", "<unk>", "</s>", "explain", "question:", "passage:", "explanation:"};

std::string marker_token(std::size_t number) { return "S" + std::to_string(number); }

}  // namespace

Vocabulary::Vocabulary(std::size_t max_markers) : max_markers_(max_markers) {
  for (const char* t : kReservedHead) add(t);
  for (std::size_t i = 1; i <= max_markers; ++i) add(marker_token(i));
}

void Vocabulary::add(std::string token) {
  if (token.empty() || split_whitespace(token).size() != 1 || split_whitespace(token)[0] != token)
    throw DataError("invalid vocabulary token: '" + token + "'");
  auto [it, inserted] = token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  if (!inserted) throw DataError("duplicate vocabulary token: '" + token + "'");
  id_to_token_.push_back(std::move(token));
}

bool Vocabulary::is_reserved(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it != token_to_id_.end() && static_cast<std::size_t>(it->second) < reserved_count();
}

std::string Vocabulary::escape(std::string_view word, const Vocabulary& v) {
  if (v.is_reserved(word)) return "\\" + std::string(word);
  return std::string(word);
}

Vocabulary Vocabulary::build(const std::vector<Example>& corpus, std::size_t max_size, std::size_t max_markers) {
  Vocabulary v(max_markers);
  if (max_size < v.size()) throw UsageError("vocabulary size smaller than the reserved block");
  std::map<std::string, std::size_t> counts;
  auto count_text = [&](std::string_view text) {
    for (const auto& w : split_whitespace(text)) ++counts[escape(w, v)];
  };
  for (const auto& ex : corpus) {
    count_text(ex.task);
    count_text(ex.query);
    for (const auto& s : ex.sentences) count_text(s);
    count_text(ex.label);
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (auto& [tok, n] : ranked) {
    if (v.size() >= max_size) break;
    v.add(tok);
  }
  return v;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    lines.emplace_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  const std::size_t head = std::size(kReservedHead);
  if (lines.size() < head) throw DataError("vocabulary file is missing reserved tokens");
  for (std::size_t i = 0; i < head; ++i) {
    if (lines[i] != kReservedHead[i])
      throw DataError("vocabulary line " + std::to_string(i + 1) + ": expected reserved token '" +
                      kReservedHead[i] + "'");
  }
  std::size_t markers = 0;
  while (head + markers < lines.size() && lines[head + markers] == marker_token(markers + 1)) ++markers;
  Vocabulary v(markers);
  for (std::size_t i = head + markers; i < lines.size(); ++i) v.add(lines[i]);
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  if (!file_exists(path)) throw DataError("vocabulary file not found: " + path);
  return parse(read_file(path));
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : id_to_token_) {
    out += t;
    out += '\n';
  }
  return out;
}

void Vocabulary::save(const std::string& path) const { write_file(path, serialize()); }

int Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

int Vocabulary::content_id(std::string_view word) const { return id(escape(word, *this)); }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw std::out_of_range("token id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<std::size_t>(id)];
}

int Vocabulary::marker_id(std::size_t number) const {
  if (number < 1 || number > max_markers_) throw DataError("too many sentences");
  return kFirstMarker + static_cast<int>(number) - 1;
}

std::optional<std::size_t> Vocabulary::marker_number(int id) const {
  if (id < kFirstMarker || static_cast<std::size_t>(id) >= reserved_count()) return std::nullopt;
  return static_cast<std::size_t>(id - kFirstMarker + 1);
}

std::uint64_t Vocabulary::hash() const { return fnv1a(serialize()); }

// ---------------------------------------------------------------------------
// Sentence segmentation

const std::vector<std::string>& abbreviation_guard_list() {
  static const std::vector<std::string> list = {
      "mr",   "mrs",  "ms",   "dr",   "prof", "sr",   "jr",  "st",  "vs",   "etc",  "e.g", "i.e",
      "u.s",  "u.k",  "inc",  "ltd",  "co",   "corp", "no",  "fig", "figs", "jan",  "feb", "mar",
      "apr",  "jun",  "jul",  "aug",  "sep",  "sept", "oct", "nov", "dec",  "mt",   "ft",  "gen",
      "gov",  "sen",  "rep",  "rev",  "col",  "lt",   "sgt", "capt", "approx", "dept", "est", "vol",
      "al",   "cf",   "ca",   "op",   "pp",   "eq",   "ph.d"};
  return list;
}

namespace {

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']' || c == '}'; }
bool is_opener(char c) { return c == '"' || c == '\'' || c == '(' || c == '[' || c == '{'; }

bool ends_sentence(const std::string& word, const std::string& next) {
  std::size_t e = word.size();
  while (e > 0 && is_closer(word[e - 1])) --e;
  if (e == 0) return false;
  const char term = word[e - 1];
  if (term != '.' && term != '!' && term != '?') return false;

  std::size_t k = 0;
  while (k < next.size() && is_opener(next[k])) ++k;
  if (k == next.size()) return false;
  const char first = next[k];
  if (!((first >= 'A' && first <= 'Z') || (first >= '0' && first <= '9'))) return false;

  if (term == '.') {
    std::string stem = word.substr(0, e - 1);
    std::size_t b = 0;
    while (b < stem.size() && is_opener(stem[b])) ++b;
    stem = stem.substr(b);
    if (stem.size() == 1 && stem[0] >= 'A' && stem[0] <= 'Z') return false;
    std::string lower;
    for (char c : stem) lower += static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c);
    const auto& guard = abbreviation_guard_list();
    if (std::find(guard.begin(), guard.end(), lower) != guard.end()) return false;
  }
  return true;
}

}  // namespace

std::vector<std::string> segment_sentences(std::string_view text) {
  const auto words = split_whitespace(text);
  std::vector<std::string> out;
  std::vector<std::string> current;
  for (std::size_t i = 0; i < words.size(); ++i) {
    current.push_back(words[i]);
    if (i + 1 < words.size() && ends_sentence(words[i], words[i + 1])) {
      out.push_back(join(current, " "));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(join(current, " "));
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize_prefix(const Example& ex) {
  return "explain " + ex.task + " question: " + ex.query + " passage:";
}

std::string serialize_input(const Example& ex, std::size_t max_markers) {
  if (ex.sentences.size() > max_markers) throw DataError("too many sentences");
  std::string out = serialize_prefix(ex);
  for (std::size_t i = 0; i < ex.sentences.size(); ++i) {
    out += " S" + std::to_string(i + 1);
    out += ' ';
    out += ex.sentences[i];
  }
  return out;
}

std::string serialize_target(std::string_view label, const IndexSet& rationale_indices) {
  std::string out(label);
  for (int i : rationale_indices) {
    out += " explanation: S";
    out += std::to_string(i + 1);
  }
  return out;
}

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& w : split_whitespace(text)) ids.push_back(vocab.id(w));
  return ids;
}

std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token(ids[i]);
  }
  return out;
}

std::vector<int> target_ids(std::string_view label, const IndexSet& rationale_indices, const Vocabulary& vocab,
                            std::size_t max_len) {
  std::vector<int> ids;
  for (const auto& w : split_whitespace(label)) ids.push_back(vocab.content_id(w));
  if (ids.size() + 1 > max_len) throw DataError("label longer than the maximum target length");
  for (int i : rationale_indices) {
    if (ids.size() + 3 > max_len) break;
    ids.push_back(Vocabulary::kExplanation);
    ids.push_back(vocab.marker_id(static_cast<std::size_t>(i) + 1));
  }
  ids.push_back(Vocabulary::kEos);
  return ids;
}

MarkedInput mark_sentences(const Example& ex, const Vocabulary& vocab) {
  if (ex.sentences.size() > vocab.max_markers()) throw DataError("too many sentences");
  MarkedInput m;
  m.task = ex.task;
  for (const auto& w : split_whitespace(ex.query)) m.query_tokens.push_back(vocab.content_id(w));
  for (std::size_t i = 0; i < ex.sentences.size(); ++i) {
    m.sentence_starts.push_back(m.marked_passage_tokens.size());
    m.marked_passage_tokens.push_back(vocab.marker_id(i + 1));
    for (const auto& w : split_whitespace(ex.sentences[i])) m.marked_passage_tokens.push_back(vocab.content_id(w));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Chunking

std::size_t ChunkSet::valid_length(std::size_t i) const {
  const auto& mask = pad_mask.at(i);
  std::size_t n = 0;
  while (n < mask.size() && mask[n] == 0) ++n;
  return n;
}

ChunkSet chunk(const Example& ex, const Vocabulary& vocab, std::size_t context_length, std::size_t max_chunks) {
  if (max_chunks == 0) throw UsageError("chunk count must be positive");
  const MarkedInput marked = mark_sentences(ex, vocab);

  std::vector<int> prefix{Vocabulary::kExplain};
  for (const auto& w : split_whitespace(ex.task)) prefix.push_back(vocab.content_id(w));
  prefix.push_back(Vocabulary::kQuestion);
  prefix.insert(prefix.end(), marked.query_tokens.begin(), marked.query_tokens.end());
  prefix.push_back(Vocabulary::kPassage);
  if (prefix.size() >= context_length) throw DataError("query too long");

  ChunkSet cs;
  cs.context_length = context_length;
  cs.prefix_length = prefix.size();
  cs.n_sentences = ex.sentences.size();
  const std::size_t budget = context_length - prefix.size();

  auto open_chunk = [&]() {
    cs.chunks.push_back(prefix);
    cs.sentences_in_chunk.emplace_back();
  };

  const auto& toks = marked.marked_passage_tokens;
  bool stopped = false;
  for (std::size_t s = 0; s < ex.sentences.size() && !stopped; ++s) {
    const std::size_t begin = marked.sentence_starts[s];
    const std::size_t end = s + 1 < ex.sentences.size() ? marked.sentence_starts[s + 1] : toks.size();
    const std::size_t len = end - begin;

    if (cs.chunks.empty()) open_chunk();
    std::size_t remaining = context_length - cs.chunks.back().size();
    if (len > remaining && cs.chunks.back().size() > prefix.size()) {
      if (cs.chunks.size() == max_chunks) {
        stopped = true;
        break;
      }
      open_chunk();
      remaining = budget;
    }
    const std::size_t take = std::min(len, remaining);
    auto& c = cs.chunks.back();
    c.insert(c.end(), toks.begin() + static_cast<std::ptrdiff_t>(begin),
             toks.begin() + static_cast<std::ptrdiff_t>(begin + take));
    cs.sentences_in_chunk.back().insert(static_cast<int>(s));
    cs.covered_sentences.insert(static_cast<int>(s));
  }

  for (auto& c : cs.chunks) {
    std::vector<std::uint8_t> mask(context_length, 1);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(c.size()), 0);
    c.resize(context_length, Vocabulary::kPad);
    cs.pad_mask.push_back(std::move(mask));
  }
  cs.truncated = cs.covered_sentences.size() != ex.sentences.size();
  return cs;
}

}  // namespace fidex
