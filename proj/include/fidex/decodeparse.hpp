#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "fidex/util.hpp"

namespace fidex {

/// Decoder output split into a label and 1-based sentence markers.
struct ParsedPrediction {
  std::string label_text;
  /// Duplicate-free, first-occurrence order, every id >= 1.
  std::vector<int> marker_ids;
  /// Marker ids that name no input sentence (filled by map_to_sentences).
  std::vector<int> out_of_range;
  /// "explanation:" segments that were not exactly one S{digits} token.
  std::size_t malformed_segments = 0;

  bool operator==(const ParsedPrediction&) const = default;
};

/// Parses "{label} explanation: S{i} explanation: S{j} ...". Never throws;
/// anomalies are counted instead.
ParsedPrediction parse_output(std::string_view decoded_text);

struct SentenceMapping {
  /// Always a subset of {0..N-1}.
  IndexSet rationale_indices;
  std::vector<int> out_of_range;
  bool not_in_input = false;
};

/// Maps marker S{m} to sentence m-1 for 1 <= m <= n; larger ids are
/// reported as out of range.
SentenceMapping map_to_sentences(const ParsedPrediction& parsed, std::size_t n_sentences);

/// Per-example line of the prediction dump.
struct PredictionRecord {
  std::string id;
  std::string label;
  /// In-range 1-based markers.
  std::vector<int> marker_ids;
  std::vector<int> out_of_range;
  std::size_t malformed_segments = 0;

  bool operator==(const PredictionRecord&) const = default;
};

PredictionRecord make_prediction_record(std::string id, const ParsedPrediction& parsed, std::size_t n_sentences);

std::string to_json_line(const PredictionRecord& p);
std::vector<PredictionRecord> parse_predictions(std::string_view text, const std::string& source = "<memory>");
std::vector<PredictionRecord> load_predictions(const std::string& path);
void save_predictions(const std::vector<PredictionRecord>& preds, const std::string& path);

}  // namespace fidex
