#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fidex/corpus.hpp"
#include "fidex/decodeparse.hpp"

namespace fidex {

/// [begin, end) token positions of one sentence in the passage.
using TokenSpan = std::pair<int, int>;

inline constexpr double kDefaultIouThreshold = 0.5;

/// 1 iff the whitespace token sequences are identical. Case-sensitive.
int exact_match(std::string_view pred_label, std::string_view gold_label);

/// Set F1. Both empty -> 1; exactly one empty -> 0.
double set_f1(const IndexSet& pred, const IndexSet& gold);
double set_f1(const std::vector<int>& pred_sorted, const std::vector<int>& gold_sorted);

/// Consecutive spans over the whitespace words of each sentence.
std::vector<TokenSpan> sentence_token_spans(const std::vector<std::string>& sentences);

/// F1 over the token positions covered by each side's sentences.
double token_f1(const IndexSet& pred, const IndexSet& gold, const std::vector<TokenSpan>& spans);

/// Intersection-over-union of two sentences' token positions.
double span_iou(const TokenSpan& a, const TokenSpan& b);

/// One-to-one greedy matching in descending IOU (ties -> lower (pred, gold)
/// pair) among pairs with IOU >= threshold; F1 with matches as true
/// positives.
double iou_f1(const IndexSet& pred, const IndexSet& gold, const std::vector<TokenSpan>& spans,
              double threshold = kDefaultIouThreshold);

struct ExampleScore {
  int em = 0;
  double rf1 = 0.0;
  double tf1 = 0.0;
  double iou_f1 = 0.0;

  bool operator==(const ExampleScore&) const = default;
};

struct EvalReport {
  /// Keyed by example id.
  std::map<std::string, ExampleScore> per_example;
  double em = 0.0;
  double rf1 = 0.0;
  double tf1 = 0.0;
  double iou_f1 = 0.0;
  std::size_t n = 0;
  std::size_t missing_predictions = 0;

  /// Stable key order: em, rf1, tf1, iou_f1, n, missing, examples.
  std::string to_json() const;
};

ExampleScore score_example(const Example& ex, const PredictionRecord& pred,
                           double threshold = kDefaultIouThreshold);

/// Scores every example; a missing prediction scores zero and is counted.
/// Corpus values are arithmetic means over examples, summed in id order.
EvalReport evaluate(const std::vector<Example>& examples, const std::vector<PredictionRecord>& predictions,
                    double threshold = kDefaultIouThreshold);

/// Gold labels and rationales replayed as predictions.
std::vector<PredictionRecord> gold_predictions(const std::vector<Example>& examples);

}  // namespace fidex
