#pragma once

// Brute-force metric definitions over explicit token-position sets. Used as
// independent oracles for the metrics module.

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

inline std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

inline int em(const std::string& pred, const std::string& gold) { return words(pred) == words(gold) ? 1 : 0; }

template <class Set>
double f1(const Set& pred, const Set& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  double tp = 0;
  for (const auto& x : pred) tp += gold.count(x) ? 1.0 : 0.0;
  if (tp == 0) return 0.0;
  const double p = tp / static_cast<double>(pred.size()), r = tp / static_cast<double>(gold.size());
  return 2 * p * r / (p + r);
}

// Token positions of each sentence, by counting words left to right.
inline std::vector<std::set<int>> positions(const std::vector<std::string>& sentences) {
  std::vector<std::set<int>> out;
  int at = 0;
  for (const auto& s : sentences) {
    std::set<int> pos;
    for (std::size_t k = 0; k < words(s).size(); ++k) pos.insert(at++);
    out.push_back(pos);
  }
  return out;
}

inline std::set<int> expand(const std::set<int>& idx, const std::vector<std::set<int>>& pos) {
  std::set<int> out;
  for (int i : idx) out.insert(pos[static_cast<std::size_t>(i)].begin(), pos[static_cast<std::size_t>(i)].end());
  return out;
}

inline double tf1(const std::set<int>& pred, const std::set<int>& gold, const std::vector<std::set<int>>& pos) {
  return f1(expand(pred, pos), expand(gold, pos));
}

inline double iou(const std::set<int>& a, const std::set<int>& b) {
  std::set<int> u = a;
  u.insert(b.begin(), b.end());
  if (u.empty()) return 0.0;
  double inter = 0;
  for (int x : a) inter += b.count(x) ? 1.0 : 0.0;
  return inter / static_cast<double>(u.size());
}

inline double iou_f1(const std::set<int>& pred, const std::set<int>& gold, const std::vector<std::set<int>>& pos,
                     double threshold) {
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  std::vector<std::tuple<double, int, int>> cand;
  for (int p : pred)
    for (int g : gold) {
      const double v = iou(pos[static_cast<std::size_t>(p)], pos[static_cast<std::size_t>(g)]);
      if (v > 0 && v >= threshold) cand.emplace_back(-v, p, g);
    }
  std::sort(cand.begin(), cand.end());
  std::set<int> used_p, used_g;
  double tp = 0;
  for (const auto& [neg, p, g] : cand) {
    if (used_p.count(p) || used_g.count(g)) continue;
    used_p.insert(p);
    used_g.insert(g);
    ++tp;
  }
  if (tp == 0) return 0.0;
  const double prec = tp / static_cast<double>(pred.size()), rec = tp / static_cast<double>(gold.size());
  return 2 * prec * rec / (prec + rec);
}

}  // namespace oracle
