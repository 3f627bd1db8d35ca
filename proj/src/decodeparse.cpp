#include "fidex/decodeparse.hpp"

#include <algorithm>
#include <limits>

#include "fidex/corpus.hpp"
#include "json.hpp"

namespace fidex {

namespace {

// S{digits} with a value in [1, INT_MAX]; 0 otherwise.
int marker_value(std::string_view tok) {
  if (tok.size() < 2 || tok[0] != 'S') return 0;
  long long v = 0;
  for (std::size_t i = 1; i < tok.size(); ++i) {
    const char c = tok[i];
    if (c < '0' || c > '9') return 0;
    v = v * 10 + (c - '0');
    if (v > std::numeric_limits<int>::max()) return 0;
  }
  return static_cast<int>(v);
}

}  // namespace

ParsedPrediction parse_output(std::string_view text) {
  ParsedPrediction p;
  std::size_t pos = text.find(kExplanationTag);
  p.label_text = std::string(trim(text.substr(0, pos)));
  while (pos != std::string_view::npos) {
    const std::size_t begin = pos + kExplanationTag.size();
    const std::size_t next = text.find(kExplanationTag, begin);
    const std::string_view segment = text.substr(begin, next == std::string_view::npos ? next : next - begin);
    const auto words = split_whitespace(segment);
    const int m = words.size() == 1 ? marker_value(words[0]) : 0;
    if (m >= 1) {
      if (std::find(p.marker_ids.begin(), p.marker_ids.end(), m) == p.marker_ids.end()) p.marker_ids.push_back(m);
    } else {
      ++p.malformed_segments;
    }
    pos = next;
  }
  return p;
}

SentenceMapping map_to_sentences(const ParsedPrediction& parsed, std::size_t n_sentences) {
  SentenceMapping out;
  for (int m : parsed.marker_ids) {
    if (m >= 1 && static_cast<std::size_t>(m) <= n_sentences)
      out.rationale_indices.insert(m - 1);
    else
      out.out_of_range.push_back(m);
  }
  for (int m : parsed.out_of_range) {
    if (std::find(out.out_of_range.begin(), out.out_of_range.end(), m) == out.out_of_range.end())
      out.out_of_range.push_back(m);
  }
  out.not_in_input = !out.out_of_range.empty();
  return out;
}

PredictionRecord make_prediction_record(std::string id, const ParsedPrediction& parsed, std::size_t n_sentences) {
  const SentenceMapping mapping = map_to_sentences(parsed, n_sentences);
  PredictionRecord r;
  r.id = std::move(id);
  r.label = parsed.label_text;
  for (int m : parsed.marker_ids)
    if (m >= 1 && static_cast<std::size_t>(m) <= n_sentences) r.marker_ids.push_back(m);
  r.out_of_range = mapping.out_of_range;
  r.malformed_segments = parsed.malformed_segments;
  return r;
}

std::string to_json_line(const PredictionRecord& p) {
  nlohmann::ordered_json obj;
  obj["id"] = p.id;
  obj["label"] = p.label;
  obj["marker_ids"] = p.marker_ids;
  obj["out_of_range"] = p.out_of_range;
  obj["malformed_segments"] = p.malformed_segments;
  return obj.dump();
}

std::vector<PredictionRecord> parse_predictions(std::string_view text, const std::string& source) {
  std::vector<PredictionRecord> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto obj = nlohmann::json::parse(line);
      PredictionRecord r;
      r.id = obj.at("id").get<std::string>();
      r.label = obj.at("label").get<std::string>();
      r.marker_ids = obj.at("marker_ids").get<std::vector<int>>();
      r.out_of_range = obj.value("out_of_range", std::vector<int>{});
      r.malformed_segments = obj.value("malformed_segments", std::size_t{0});
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": malformed prediction record: " + e.what());
    }
  }
  return out;
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
  if (!file_exists(path)) throw DataError("prediction file not found: " + path);
  return parse_predictions(read_file(path), path);
}

void save_predictions(const std::vector<PredictionRecord>& preds, const std::string& path) {
  std::string out;
  for (const auto& p : preds) {
    out += to_json_line(p);
    out += '\n';
  }
  write_file(path, out);
}

}  // namespace fidex
