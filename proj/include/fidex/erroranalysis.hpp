#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fidex/util.hpp"

namespace fidex {

enum class ErrorKind {
  kPerfect,
  kOverlap,
  kOverPrediction,
  kNoOverlap,
  kPredictionNotInInput,
  kInputTruncated,
};

/// Human judgment carried from an optional side file; never computed.
enum class Adequacy { kUnlabeled, kAdequate, kInadequate };

struct ErrorCategory {
  ErrorKind kind = ErrorKind::kPerfect;
  Adequacy adequacy = Adequacy::kUnlabeled;

  bool operator==(const ErrorCategory&) const = default;
};

std::string_view to_string(ErrorKind k);
std::string_view to_string(Adequacy a);
std::optional<ErrorKind> parse_error_kind(std::string_view s);
std::optional<Adequacy> parse_adequacy(std::string_view s);

/// First matching rule wins:
///   not_in_input -> PREDICTION_NOT_IN_INPUT
///   gold not within covered -> INPUT_TRUNCATED
///   pred == gold -> PERFECT
///   pred strict superset of gold -> OVER_PREDICTION
///   pred and gold intersect -> OVERLAP
///   otherwise -> NO_OVERLAP
ErrorKind classify(const IndexSet& gold, const IndexSet& pred, bool not_in_input, const IndexSet& covered_sentences);

struct FrequencyRow {
  std::string name;
  std::size_t count = 0;
  double percent = 0.0;
};

struct FrequencyTable {
  std::size_t population = 0;
  /// One row per structural category in the population, fixed order.
  std::vector<FrequencyRow> rows;
  /// OVERLAP and NO_OVERLAP split by adequacy ("OVERLAP/ADEQUATE", ...).
  std::vector<FrequencyRow> adequacy_rows;

  const FrequencyRow* find(std::string_view name) const;
};

/// Percentages are over non-PERFECT entries unless include_perfect is set.
FrequencyTable summarize(const std::vector<ErrorCategory>& categories, bool include_perfect = false);

/// id -> adequacy, from lines {"id": ..., "adequacy": "ADEQUATE"|"INADEQUATE"|"UNLABELED"}.
std::map<std::string, Adequacy> load_adequacy(const std::string& path);

}  // namespace fidex
