#include "fidex/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace fidex {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void validate(const Example& ex) {
  if (ex.sentences.empty()) throw DataError("example '" + ex.id + "': sentences must be non-empty");
  for (std::size_t i = 0; i < ex.sentences.size(); ++i) {
    if (trim(ex.sentences[i]).empty())
      throw DataError("example '" + ex.id + "': sentence " + std::to_string(i) + " is empty");
  }
  if (ex.label.empty()) throw DataError("example '" + ex.id + "': label must be non-empty");
  if (ex.label.find(kExplanationTag) != std::string::npos)
    throw DataError("example '" + ex.id + "': label must not contain \"explanation:\"");
  if (trim(ex.label).size() != ex.label.size())
    throw DataError("example '" + ex.id + "': label has leading or trailing whitespace");
  const int n = static_cast<int>(ex.sentences.size());
  for (int i : ex.rationale_indices) {
    if (i < 0 || i >= n)
      throw DataError("example '" + ex.id + "': rationale index out of range (" + std::to_string(i) +
                      " with " + std::to_string(n) + " sentences)");
  }
}

namespace {

template <class T>
T require(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) throw DataError(std::string("missing field '") + field + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("field '") + field + "' has the wrong type");
  }
}

std::string optional_string(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw DataError(std::string("field '") + field + "' has the wrong type");
  return it->get<std::string>();
}

IndexSet to_index_set(const std::vector<long long>& raw, const char* field) {
  IndexSet out;
  for (long long v : raw) {
    if (v < 0 || v > std::numeric_limits<int>::max())
      throw DataError(std::string("field '") + field + "': rationale index out of range");
    out.insert(static_cast<int>(v));
  }
  return out;
}

json parse_object(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw DataError("record is not a JSON object");
  return obj;
}

Example example_from_json(const json& obj) {
  Example ex;
  ex.id = require<std::string>(obj, "id");
  ex.task = require<std::string>(obj, "task");
  ex.query = require<std::string>(obj, "query");
  ex.sentences = require<std::vector<std::string>>(obj, "sentences");
  ex.label = require<std::string>(obj, "label");
  ex.rationale_indices =
      to_index_set(require<std::vector<long long>>(obj, "rationale_indices"), "rationale_indices");
  return ex;
}

template <class F>
auto parse_lines(std::string_view text, const std::string& source, F&& per_line) {
  using T = decltype(per_line(std::string_view{}));
  std::vector<T> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    pos = end + 1;
    if (trim(line).empty()) continue;
    try {
      out.push_back(per_line(line));
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<Example> parse_examples(std::string_view text, const std::string& source) {
  return parse_lines(text, source, [](std::string_view line) {
    Example ex = example_from_json(parse_object(line));
    validate(ex);
    return ex;
  });
}

std::vector<Example> load_examples(const std::string& path) {
  if (!file_exists(path)) throw DataError("example file not found: " + path);
  return parse_examples(read_file(path), path);
}

std::string to_json_line(const Example& ex) {
  ordered_json obj;
  obj["id"] = ex.id;
  obj["task"] = ex.task;
  obj["query"] = ex.query;
  obj["sentences"] = ex.sentences;
  obj["label"] = ex.label;
  obj["rationale_indices"] = std::vector<int>(ex.rationale_indices.begin(), ex.rationale_indices.end());
  return obj.dump();
}

std::string format_examples(const std::vector<Example>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += to_json_line(ex);
    out += '\n';
  }
  return out;
}

void save_examples(const std::vector<Example>& examples, const std::string& path) {
  write_file(path, format_examples(examples));
}

// ---------------------------------------------------------------------------
// QA restructuring

void validate(const SpanQARecord& r) {
  const auto [b, e] = r.answer_char_span;
  if (!(b < e && e <= r.passage.size())) throw DataError("answer span out of range");
  if (r.passage.compare(b, e - b, r.answer_text) != 0)
    throw DataError("answer span does not match answer text");
}

void validate(const MultiDocQARecord& r) {
  if (r.docs.empty()) throw DataError("record has no documents");
  for (const auto& d : r.docs) {
    const int n = static_cast<int>(d.sentences.size());
    for (int i : d.supporting_indices) {
      if (i < 0 || i >= n) throw DataError("supporting index out of range in document '" + d.title + "'");
    }
  }
}

SpanQARecord span_qa_from_json_line(std::string_view line) {
  json obj = parse_object(line);
  SpanQARecord r;
  r.id = optional_string(obj, "id");
  r.question = require<std::string>(obj, "question");
  r.passage = require<std::string>(obj, "passage");
  r.answer_text = require<std::string>(obj, "answer_text");
  auto span = require<std::vector<long long>>(obj, "answer_char_span");
  if (span.size() != 2 || span[0] < 0 || span[1] < 0)
    throw DataError("field 'answer_char_span' must be [start, end]");
  r.answer_char_span = {static_cast<std::size_t>(span[0]), static_cast<std::size_t>(span[1])};
  validate(r);
  return r;
}

MultiDocQARecord multidoc_qa_from_json_line(std::string_view line) {
  json obj = parse_object(line);
  MultiDocQARecord r;
  r.id = optional_string(obj, "id");
  r.question = require<std::string>(obj, "question");
  r.answer_text = require<std::string>(obj, "answer_text");
  auto docs = require<json>(obj, "docs");
  if (!docs.is_array()) throw DataError("field 'docs' must be an array");
  for (const auto& d : docs) {
    QADocument doc;
    doc.title = optional_string(d, "title");
    doc.sentences = require<std::vector<std::string>>(d, "sentences");
    doc.supporting_indices =
        to_index_set(require<std::vector<long long>>(d, "supporting_indices"), "supporting_indices");
    r.docs.push_back(std::move(doc));
  }
  validate(r);
  return r;
}

std::vector<SpanQARecord> load_span_qa(const std::string& path) {
  if (!file_exists(path)) throw DataError("span-QA file not found: " + path);
  return parse_lines(read_file(path), path, span_qa_from_json_line);
}

std::vector<MultiDocQARecord> load_multidoc_qa(const std::string& path) {
  if (!file_exists(path)) throw DataError("multi-doc QA file not found: " + path);
  return parse_lines(read_file(path), path, multidoc_qa_from_json_line);
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Locates each segmented sentence in the raw passage by matching its
// non-whitespace characters in order. Returns the byte range from the first
// to the last matched character, or {npos, npos} when the sentence cannot be
// aligned.
std::vector<std::pair<std::size_t, std::size_t>> align_sentences(std::string_view passage,
                                                                 const std::vector<std::string>& sentences) {
  constexpr auto npos = std::string_view::npos;
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t cursor = 0;
  for (const auto& s : sentences) {
    std::string key;
    for (char c : s)
      if (!is_space(c)) key += c;
    if (key.empty()) {
      spans.emplace_back(npos, npos);
      continue;
    }
    std::pair<std::size_t, std::size_t> found{npos, npos};
    for (std::size_t start = passage.find(key[0], cursor); start != npos; start = passage.find(key[0], start + 1)) {
      std::size_t p = start, k = 0, last = start;
      while (p < passage.size() && k < key.size()) {
        if (is_space(passage[p])) {
          ++p;
          continue;
        }
        if (passage[p] != key[k]) break;
        last = p;
        ++p;
        ++k;
      }
      if (k == key.size()) {
        found = {start, last + 1};
        break;
      }
    }
    spans.push_back(found);
    if (found.first != npos) cursor = found.second;
  }
  return spans;
}

std::string normalize_label(std::string_view text) {
  return join(split_whitespace(text), " ");
}

}  // namespace

Example restructure_span_qa(const SpanQARecord& record, const Segmenter& segmenter) {
  validate(record);
  Example ex;
  ex.id = record.id;
  ex.task = "nq";
  ex.query = record.question;
  ex.sentences = segmenter(record.passage);
  ex.label = normalize_label(record.answer_text);

  const std::size_t start = record.answer_char_span.first;
  const auto spans = align_sentences(record.passage, ex.sentences);
  int hit = -1;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].first <= start && start < spans[i].second) {
      hit = static_cast<int>(i);
      break;
    }
  }
  // A span starting on whitespace belongs to the sentence that follows it.
  if (hit < 0) {
    std::size_t p = start;
    while (p < record.passage.size() && is_space(record.passage[p])) ++p;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      if (spans[i].first <= p && p < spans[i].second) {
        hit = static_cast<int>(i);
        break;
      }
    }
  }
  if (hit < 0) throw DataError("span not covered");
  ex.rationale_indices = {hit};
  validate(ex);
  return ex;
}

MultiDocRestructured restructure_multidoc_qa(const MultiDocQARecord& record) {
  validate(record);
  MultiDocRestructured out;
  for (std::size_t d = 0; d < record.docs.size(); ++d) {
    const auto& doc = record.docs[d];
    if (doc.sentences.empty()) {
      ++out.skipped_documents;
      continue;
    }
    Example ex;
    ex.id = record.id.empty() ? std::to_string(d) : record.id + "-" + std::to_string(d);
    ex.task = "hotpot";
    ex.query = record.question;
    ex.sentences = doc.sentences;
    ex.label = normalize_label(record.answer_text);
    ex.rationale_indices = doc.supporting_indices;
    validate(ex);
    out.examples.push_back(std::move(ex));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Few-shot sampling

FewShotBudget FewShotBudget::parse(std::string_view text) {
  std::string s(trim(text));
  if (s.empty()) throw UsageError("empty few-shot budget");
  const bool is_fraction = s.find_first_of(".eE") != std::string::npos;
  try {
    std::size_t used = 0;
    if (is_fraction) {
      double f = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      if (!(f > 0.0 && f <= 1.0)) throw UsageError("few-shot fraction must lie in (0, 1]: " + s);
      return fraction(f);
    }
    long long n = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    if (n <= 0) throw UsageError("few-shot count must be positive: " + s);
    return count(static_cast<std::size_t>(n));
  } catch (const std::logic_error&) {
    throw UsageError("invalid few-shot budget: " + s);
  }
}

std::size_t FewShotBudget::resolve(std::size_t n) const {
  if (const double* f = std::get_if<double>(&value)) {
    if (!(*f > 0.0 && *f <= 1.0)) throw UsageError("few-shot fraction must lie in (0, 1]");
    if (n == 0) return 0;
    auto k = static_cast<std::size_t>(std::floor(*f * static_cast<double>(n)));
    return std::max<std::size_t>(1, std::min(k, n));
  }
  const std::size_t k = std::get<std::size_t>(value);
  if (k == 0) throw UsageError("few-shot count must be positive");
  if (k > n)
    throw UsageError("few-shot count " + std::to_string(k) + " exceeds dataset size " + std::to_string(n));
  return k;
}

std::vector<Example> fewshot_sample(const std::vector<Example>& examples, const FewShotBudget& budget,
                                    std::uint64_t seed) {
  const std::size_t k = budget.resolve(examples.size());
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x6665777368ULL));
  rng.shuffle(order);
  order.resize(k);
  std::sort(order.begin(), order.end());
  std::vector<Example> out;
  out.reserve(k);
  for (std::size_t i : order) out.push_back(examples[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic keyword-detection task

SynthOptions default_synth_options(std::uint64_t seed, std::size_t n_examples) {
  SynthOptions o;
  o.seed = seed;
  o.n_examples = n_examples;
  o.keyword_vocab = {"apple", "banana", "cherry", "grape", "lemon", "mango", "peach", "plum"};
  o.filler_vocab = {"the",   "a",     "cat",    "dog",   "ran",    "sat",   "on",     "under", "blue",
                    "red",   "green", "house",  "tree",  "river",  "stone", "walked", "saw",   "big",
                    "small", "old",   "new",    "city",  "road",   "car",   "bird",   "sang",  "near",
                    "far",   "day",   "night",  "man",   "woman",  "child", "played", "with",  "ball",
                    "field", "hill",  "boat",   "lake",  "sky",    "rain",  "sun",    "wind",  "cold",
                    "warm",  "quiet", "loud",   "slow",  "fast",   "door",  "room",   "table", "chair",
                    "book",  "read",  "wrote",  "light", "dark",   "grey"};
  return o;
}

std::vector<Example> synth_dataset(const SynthOptions& opts) {
  if (opts.min_sentences == 0 || opts.min_sentences > opts.max_sentences)
    throw UsageError("invalid sentence-count range");
  if (opts.min_words == 0 || opts.min_words > opts.max_words) throw UsageError("invalid sentence-length range");
  if (opts.keyword_vocab.empty() || opts.filler_vocab.empty()) throw UsageError("empty synthetic vocabulary");
  std::unordered_set<std::string> kw(opts.keyword_vocab.begin(), opts.keyword_vocab.end());
  for (const auto& w : opts.filler_vocab)
    if (kw.count(w)) throw UsageError("keyword and filler vocabularies must be disjoint: " + w);

  Rng rng(mix_seed(opts.seed, 0x73796e7468ULL));
  std::vector<Example> out;
  out.reserve(opts.n_examples);
  const int width = std::max<int>(6, static_cast<int>(std::to_string(opts.n_examples).size()));
  for (std::size_t e = 0; e < opts.n_examples; ++e) {
    Example ex;
    std::string num = std::to_string(e);
    ex.id = opts.id_prefix + "-" + std::string(static_cast<std::size_t>(std::max<int>(0, width - (int)num.size())), '0') + num;
    ex.task = std::string(kSynthTask);
    ex.query = std::string(kSynthQuery);
    const std::size_t n = opts.min_sentences + rng.below(opts.max_sentences - opts.min_sentences + 1);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t len = opts.min_words + rng.below(opts.max_words - opts.min_words + 1);
      std::vector<std::string> words;
      for (std::size_t w = 0; w < len; ++w) words.push_back(opts.filler_vocab[rng.below(opts.filler_vocab.size())]);
      if (rng.uniform() < opts.keyword_rate) {
        words[rng.below(len)] = opts.keyword_vocab[rng.below(opts.keyword_vocab.size())];
        ex.rationale_indices.insert(static_cast<int>(s));
      }
      ex.sentences.push_back(join(words, " "));
    }
    ex.label = ex.rationale_indices.empty() ? "False" : "True";
    out.push_back(std::move(ex));
  }
  return out;
}

bool satisfies_keyword_rule(const Example& ex, const std::vector<std::string>& keywords) {
  std::unordered_set<std::string> kw(keywords.begin(), keywords.end());
  IndexSet expected;
  for (std::size_t i = 0; i < ex.sentences.size(); ++i) {
    for (const auto& w : split_whitespace(ex.sentences[i])) {
      if (kw.count(w)) {
        expected.insert(static_cast<int>(i));
        break;
      }
    }
  }
  const std::string label = expected.empty() ? "False" : "True";
  return ex.label == label && ex.rationale_indices == expected;
}

}  // namespace fidex
