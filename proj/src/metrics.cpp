#include "fidex/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace fidex {

int exact_match(std::string_view pred_label, std::string_view gold_label) {
  return split_whitespace(pred_label) == split_whitespace(gold_label) ? 1 : 0;
}

namespace {

double f1_from_counts(std::size_t tp, std::size_t n_pred, std::size_t n_gold) {
  if (n_pred == 0 && n_gold == 0) return 1.0;
  if (n_pred == 0 || n_gold == 0 || tp == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(n_pred);
  const double r = static_cast<double>(tp) / static_cast<double>(n_gold);
  return 2.0 * p * r / (p + r);
}

std::vector<int> positions(const IndexSet& idx, const std::vector<TokenSpan>& spans) {
  std::vector<int> out;
  for (int i : idx) {
    if (i < 0 || static_cast<std::size_t>(i) >= spans.size())
      throw std::invalid_argument("sentence index " + std::to_string(i) + " has no token span");
    for (int t = spans[static_cast<std::size_t>(i)].first; t < spans[static_cast<std::size_t>(i)].second; ++t)
      out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

double set_f1(const std::vector<int>& pred, const std::vector<int>& gold) {
  std::vector<int> common;
  std::set_intersection(pred.begin(), pred.end(), gold.begin(), gold.end(), std::back_inserter(common));
  return f1_from_counts(common.size(), pred.size(), gold.size());
}

double set_f1(const IndexSet& pred, const IndexSet& gold) {
  std::size_t tp = 0;
  for (int i : pred) tp += gold.count(i);
  return f1_from_counts(tp, pred.size(), gold.size());
}

std::vector<TokenSpan> sentence_token_spans(const std::vector<std::string>& sentences) {
  std::vector<TokenSpan> spans;
  int pos = 0;
  for (const auto& s : sentences) {
    const int len = static_cast<int>(split_whitespace(s).size());
    spans.emplace_back(pos, pos + len);
    pos += len;
  }
  return spans;
}

double token_f1(const IndexSet& pred, const IndexSet& gold, const std::vector<TokenSpan>& spans) {
  return set_f1(positions(pred, spans), positions(gold, spans));
}

double span_iou(const TokenSpan& a, const TokenSpan& b) {
  const int inter = std::max(0, std::min(a.second, b.second) - std::max(a.first, b.first));
  const int uni = (a.second - a.first) + (b.second - b.first) - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

double iou_f1(const IndexSet& pred, const IndexSet& gold, const std::vector<TokenSpan>& spans, double threshold) {
  auto span_of = [&](int i) -> const TokenSpan& {
    if (i < 0 || static_cast<std::size_t>(i) >= spans.size())
      throw std::invalid_argument("sentence index " + std::to_string(i) + " has no token span");
    return spans[static_cast<std::size_t>(i)];
  };
  struct Candidate {
    double iou;
    int p, g;
  };
  std::vector<Candidate> cands;
  for (int p : pred) {
    for (int g : gold) {
      const double iou = span_iou(span_of(p), span_of(g));
      if (iou >= threshold && iou > 0.0) cands.push_back({iou, p, g});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.p != b.p) return a.p < b.p;
    return a.g < b.g;
  });
  IndexSet used_p, used_g;
  std::size_t tp = 0;
  for (const auto& c : cands) {
    if (used_p.count(c.p) || used_g.count(c.g)) continue;
    used_p.insert(c.p);
    used_g.insert(c.g);
    ++tp;
  }
  return f1_from_counts(tp, pred.size(), gold.size());
}

ExampleScore score_example(const Example& ex, const PredictionRecord& pred, double threshold) {
  IndexSet predicted;
  for (int m : pred.marker_ids)
    if (m >= 1 && static_cast<std::size_t>(m) <= ex.sentences.size()) predicted.insert(m - 1);
  const auto spans = sentence_token_spans(ex.sentences);
  ExampleScore s;
  s.em = exact_match(pred.label, ex.label);
  s.rf1 = set_f1(predicted, ex.rationale_indices);
  s.tf1 = token_f1(predicted, ex.rationale_indices, spans);
  s.iou_f1 = iou_f1(predicted, ex.rationale_indices, spans, threshold);
  return s;
}

EvalReport evaluate(const std::vector<Example>& examples, const std::vector<PredictionRecord>& predictions,
                    double threshold) {
  std::unordered_map<std::string, const Example*> by_id;
  for (const auto& ex : examples) {
    if (!by_id.emplace(ex.id, &ex).second) throw DataError("duplicate example id: " + ex.id);
  }
  std::unordered_map<std::string, const PredictionRecord*> pred_by_id;
  for (const auto& p : predictions) {
    if (!pred_by_id.emplace(p.id, &p).second) throw DataError("duplicate prediction id: " + p.id);
    if (!by_id.count(p.id)) throw DataError("prediction for unknown example id: " + p.id);
  }

  EvalReport report;
  for (const auto& ex : examples) {
    auto it = pred_by_id.find(ex.id);
    if (it == pred_by_id.end()) {
      report.per_example[ex.id] = ExampleScore{};
      ++report.missing_predictions;
    } else {
      report.per_example[ex.id] = score_example(ex, *it->second, threshold);
    }
  }
  report.n = report.per_example.size();
  if (report.n > 0) {
    double em = 0, rf1 = 0, tf1 = 0, iou = 0;
    for (const auto& [id, s] : report.per_example) {
      em += s.em;
      rf1 += s.rf1;
      tf1 += s.tf1;
      iou += s.iou_f1;
    }
    const double n = static_cast<double>(report.n);
    report.em = em / n;
    report.rf1 = rf1 / n;
    report.tf1 = tf1 / n;
    report.iou_f1 = iou / n;
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json obj;
  obj["em"] = em;
  obj["rf1"] = rf1;
  obj["tf1"] = tf1;
  obj["iou_f1"] = iou_f1;
  obj["n"] = n;
  obj["missing"] = missing_predictions;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& [id, s] : per_example) {
    nlohmann::ordered_json row;
    row["id"] = id;
    row["em"] = s.em;
    row["rf1"] = s.rf1;
    row["tf1"] = s.tf1;
    row["iou_f1"] = s.iou_f1;
    rows.push_back(std::move(row));
  }
  obj["examples"] = std::move(rows);
  return obj.dump(2) + "\n";
}

std::vector<PredictionRecord> gold_predictions(const std::vector<Example>& examples) {
  std::vector<PredictionRecord> out;
  for (const auto& ex : examples) {
    PredictionRecord r;
    r.id = ex.id;
    r.label = ex.label;
    for (int i : ex.rationale_indices) r.marker_ids.push_back(i + 1);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace fidex
