#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "fidex/util.hpp"

namespace fidex {

/// One task instance: a query, an ordered list of pre-tokenized sentences,
/// a label, and the gold rationale as 0-based sentence indices.
struct Example {
  std::string id;
  std::string task;
  std::string query;
  std::vector<std::string> sentences;
  std::string label;
  IndexSet rationale_indices;

  bool operator==(const Example&) const = default;
};

/// Throws DataError naming the violated invariant.
void validate(const Example& ex);

/// The substring that separates a label from its rationale markers.
inline constexpr std::string_view kExplanationTag = "explanation:";

// Line-delimited JSON persistence (one record per line, UTF-8, LF).
std::vector<Example> load_examples(const std::string& path);
std::vector<Example> parse_examples(std::string_view text, const std::string& source = "<memory>");
void save_examples(const std::vector<Example>& examples, const std::string& path);
std::string format_examples(const std::vector<Example>& examples);
std::string to_json_line(const Example& ex);

struct SpanQARecord {
  std::string id;
  std::string question;
  std::string passage;
  std::string answer_text;
  /// [begin, end) byte offsets into passage.
  std::pair<std::size_t, std::size_t> answer_char_span{0, 0};
};

struct QADocument {
  std::string title;
  std::vector<std::string> sentences;
  IndexSet supporting_indices;
};

struct MultiDocQARecord {
  std::string id;
  std::string question;
  std::string answer_text;
  std::vector<QADocument> docs;
};

void validate(const SpanQARecord& r);
void validate(const MultiDocQARecord& r);

std::vector<SpanQARecord> load_span_qa(const std::string& path);
std::vector<MultiDocQARecord> load_multidoc_qa(const std::string& path);
SpanQARecord span_qa_from_json_line(std::string_view line);
MultiDocQARecord multidoc_qa_from_json_line(std::string_view line);

using Segmenter = std::function<std::vector<std::string>(std::string_view)>;

/// Answer-span QA record -> one example whose single rationale sentence is
/// the one containing the first character of the answer span.
Example restructure_span_qa(const SpanQARecord& record, const Segmenter& segmenter);

struct MultiDocRestructured {
  std::vector<Example> examples;
  std::size_t skipped_documents = 0;
};

/// Multi-document QA record -> one example per document, in document order.
MultiDocRestructured restructure_multidoc_qa(const MultiDocQARecord& record);

/// Few-shot budget: a fraction in (0, 1] or an absolute example count.
struct FewShotBudget {
  std::variant<double, std::size_t> value;

  static FewShotBudget fraction(double f) { return {f}; }
  static FewShotBudget count(std::size_t n) { return {n}; }
  /// "0.25" -> fraction, "2000" -> count.
  static FewShotBudget parse(std::string_view text);

  /// Number of examples selected out of n.
  std::size_t resolve(std::size_t n) const;
};

/// Seeded uniform sample without replacement, original order preserved.
/// For one seed, smaller budgets select subsets of larger ones.
std::vector<Example> fewshot_sample(const std::vector<Example>& examples, const FewShotBudget& budget,
                                    std::uint64_t seed);

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t n_examples = 0;
  std::size_t min_sentences = 1;
  std::size_t max_sentences = 12;
  std::size_t min_words = 3;
  std::size_t max_words = 5;
  /// Per-sentence probability of carrying a keyword.
  double keyword_rate = 0.12;
  std::vector<std::string> keyword_vocab;
  std::vector<std::string> filler_vocab;
  std::string id_prefix = "synth";
};

/// Default keyword and filler vocabularies for the synthetic task.
SynthOptions default_synth_options(std::uint64_t seed, std::size_t n_examples);

inline constexpr std::string_view kSynthTask = "synth";
inline constexpr std::string_view kSynthQuery = "does the passage mention a keyword ?";

/// Keyword-detection task: label "True" iff some sentence holds a keyword;
/// the rationale is exactly the keyword-bearing sentences.
std::vector<Example> synth_dataset(const SynthOptions& opts);

/// True iff the example satisfies the keyword rule for the given keyword set.
bool satisfies_keyword_rule(const Example& ex, const std::vector<std::string>& keywords);

}  // namespace fidex
