#include "fidex/erroranalysis.hpp"

#include <algorithm>

#include "json.hpp"

namespace fidex {

namespace {

constexpr ErrorKind kAllKinds[] = {ErrorKind::kPerfect,        ErrorKind::kOverlap,
                                   ErrorKind::kOverPrediction, ErrorKind::kNoOverlap,
                                   ErrorKind::kPredictionNotInInput, ErrorKind::kInputTruncated};

}  // namespace

std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::kPerfect: return "PERFECT";
    case ErrorKind::kOverlap: return "OVERLAP";
    case ErrorKind::kOverPrediction: return "OVER_PREDICTION";
    case ErrorKind::kNoOverlap: return "NO_OVERLAP";
    case ErrorKind::kPredictionNotInInput: return "PREDICTION_NOT_IN_INPUT";
    case ErrorKind::kInputTruncated: return "INPUT_TRUNCATED";
  }
  return "UNKNOWN";
}

std::string_view to_string(Adequacy a) {
  switch (a) {
    case Adequacy::kUnlabeled: return "UNLABELED";
    case Adequacy::kAdequate: return "ADEQUATE";
    case Adequacy::kInadequate: return "INADEQUATE";
  }
  return "UNLABELED";
}

std::optional<ErrorKind> parse_error_kind(std::string_view s) {
  for (ErrorKind k : kAllKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::optional<Adequacy> parse_adequacy(std::string_view s) {
  for (Adequacy a : {Adequacy::kUnlabeled, Adequacy::kAdequate, Adequacy::kInadequate})
    if (to_string(a) == s) return a;
  return std::nullopt;
}

ErrorKind classify(const IndexSet& gold, const IndexSet& pred, bool not_in_input, const IndexSet& covered) {
  if (not_in_input) return ErrorKind::kPredictionNotInInput;
  if (!std::includes(covered.begin(), covered.end(), gold.begin(), gold.end())) return ErrorKind::kInputTruncated;
  if (pred == gold) return ErrorKind::kPerfect;
  if (std::includes(pred.begin(), pred.end(), gold.begin(), gold.end())) return ErrorKind::kOverPrediction;
  for (int i : pred)
    if (gold.count(i)) return ErrorKind::kOverlap;
  return ErrorKind::kNoOverlap;
}

const FrequencyRow* FrequencyTable::find(std::string_view name) const {
  for (const auto& r : rows)
    if (r.name == name) return &r;
  for (const auto& r : adequacy_rows)
    if (r.name == name) return &r;
  return nullptr;
}

FrequencyTable summarize(const std::vector<ErrorCategory>& categories, bool include_perfect) {
  FrequencyTable table;
  std::map<ErrorKind, std::size_t> counts;
  std::map<std::pair<ErrorKind, Adequacy>, std::size_t> adequacy_counts;
  for (const auto& c : categories) {
    if (c.kind == ErrorKind::kPerfect && !include_perfect) continue;
    ++counts[c.kind];
    ++adequacy_counts[{c.kind, c.adequacy}];
    ++table.population;
  }
  if (table.population == 0) return table;

  const double total = static_cast<double>(table.population);
  for (ErrorKind k : kAllKinds) {
    if (k == ErrorKind::kPerfect && !include_perfect) continue;
    const std::size_t n = counts.count(k) ? counts[k] : 0;
    table.rows.push_back({std::string(to_string(k)), n, 100.0 * static_cast<double>(n) / total});
  }
  for (ErrorKind k : {ErrorKind::kOverlap, ErrorKind::kNoOverlap}) {
    for (Adequacy a : {Adequacy::kAdequate, Adequacy::kInadequate, Adequacy::kUnlabeled}) {
      auto it = adequacy_counts.find({k, a});
      if (it == adequacy_counts.end()) continue;
      table.adequacy_rows.push_back({std::string(to_string(k)) + "/" + std::string(to_string(a)), it->second,
                                     100.0 * static_cast<double>(it->second) / total});
    }
  }
  return table;
}

std::map<std::string, Adequacy> load_adequacy(const std::string& path) {
  const std::string text = read_file(path);
  std::map<std::string, Adequacy> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto obj = nlohmann::json::parse(line);
      const auto label = obj.at("adequacy").get<std::string>();
      auto a = parse_adequacy(label);
      if (!a) throw DataError("unknown adequacy value '" + label + "'");
      out[obj.at("id").get<std::string>()] = *a;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace fidex
