// Copyright 2026 The kgcycle Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kgcycle/metrics.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <unordered_map>

#include "json.hpp"

namespace kgcycle {
namespace {

using Ngram = std::vector<std::string>;
using NgramCounts = std::map<Ngram, size_t>;

NgramCounts CountNgrams(const std::vector<std::string> &units, size_t n) {
  NgramCounts counts;
  if (units.size() < n) return counts;
  for (size_t i = 0; i + n <= units.size(); ++i) {
    ++counts[Ngram(units.begin() + static_cast<std::ptrdiff_t>(i),
                   units.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

size_t Total(const NgramCounts &counts) {
  size_t total = 0;
  for (const auto &[gram, c] : counts) total += c;
  return total;
}

size_t Overlap(const NgramCounts &a, const NgramCounts &b) {
  size_t matched = 0;
  for (const auto &[gram, c] : a) {
    auto it = b.find(gram);
    if (it != b.end()) matched += std::min(c, it->second);
  }
  return matched;
}

void CheckShapes(size_t hyps, const References &references) {
  if (hyps == 0) throw MetricError("empty corpus");
  if (hyps != references.size()) {
    throw MetricError("hypothesis/reference count mismatch: " + std::to_string(hyps) +
                      " vs " + std::to_string(references.size()));
  }
  for (const auto &refs : references) {
    if (refs.empty()) throw MetricError("segment without references");
  }
}

// UTF-8 code points as separate strings, whitespace dropped.
std::vector<std::string> Characters(const std::string &s) {
  std::vector<std::string> out;
  for (size_t i = 0; i < s.size();) {
    const auto lead = static_cast<unsigned char>(s[i]);
    size_t len = 1;
    if (lead >= 0xF0) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = 3;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    len = std::min(len, s.size() - i);
    if (!(len == 1 && std::isspace(lead))) out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

size_t EditDistance(const std::vector<int> &a, const std::vector<int> &b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

bool Occurs(const std::vector<int> &haystack, const int *needle, size_t len) {
  if (len > haystack.size()) return false;
  for (size_t i = 0; i + len <= haystack.size(); ++i) {
    if (std::equal(needle, needle + len, haystack.begin() + static_cast<std::ptrdiff_t>(i))) {
      return true;
    }
  }
  return false;
}

double Fraction(size_t num, size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

PrecisionRecall Finish(size_t matched, size_t predicted, size_t gold) {
  PrecisionRecall pr;
  pr.matched = matched;
  pr.predicted = predicted;
  pr.gold = gold;
  pr.precision = Fraction(matched, predicted);
  pr.recall = Fraction(matched, gold);
  const double sum = pr.precision + pr.recall;
  pr.f1 = sum > 0.0 ? 2.0 * pr.precision * pr.recall / sum : 0.0;
  return pr;
}

std::string Fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// Instance indices per report column.
std::vector<std::pair<std::string, std::vector<size_t>>> Columns(
    size_t n, const std::vector<SplitTag> *splits) {
  std::vector<std::pair<std::string, std::vector<size_t>>> cols;
  std::vector<size_t> all(n);
  for (size_t i = 0; i < n; ++i) all[i] = i;
  cols.push_back({"overall", all});
  if (splits == nullptr) return cols;
  if (splits->size() != n) throw MetricError("split tag count mismatch");
  for (SplitTag tag : kTestSplits) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < n; ++i) {
      if ((*splits)[i] == tag) idx.push_back(i);
    }
    std::string name(SplitTagName(tag));
    name = name.substr(std::string("test_").size());
    if (!idx.empty()) cols.push_back({name, std::move(idx)});
  }
  return cols;
}

template <typename T>
std::vector<T> Pick(const std::vector<T> &items, const std::vector<size_t> &idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(items[i]);
  return out;
}

}  // namespace

double Bleu(const std::vector<std::string> &hypotheses, const References &references) {
  CheckShapes(hypotheses.size(), references);
  size_t matched[4] = {0, 0, 0, 0};
  size_t totals[4] = {0, 0, 0, 0};
  size_t hyp_len = 0, ref_len = 0;
  for (size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = SplitWhitespace(hypotheses[s]);
    std::vector<std::vector<std::string>> refs;
    for (const auto &r : references[s]) refs.push_back(SplitWhitespace(r));
    hyp_len += hyp.size();
    size_t closest = refs[0].size();
    for (const auto &r : refs) {
      const auto d = [&](size_t len) {
        return len > hyp.size() ? len - hyp.size() : hyp.size() - len;
      };
      if (d(r.size()) < d(closest) || (d(r.size()) == d(closest) && r.size() < closest)) {
        closest = r.size();
      }
    }
    ref_len += closest;
    for (size_t n = 1; n <= 4; ++n) {
      const NgramCounts h = CountNgrams(hyp, n);
      NgramCounts max_ref;
      for (const auto &r : refs) {
        for (const auto &[gram, c] : CountNgrams(r, n)) {
          max_ref[gram] = std::max(max_ref[gram], c);
        }
      }
      matched[n - 1] += Overlap(h, max_ref);
      totals[n - 1] += Total(h);
    }
  }
  double log_sum = 0.0;
  for (size_t n = 0; n < 4; ++n) {
    if (matched[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(totals[n]));
  }
  const double bp =
      hyp_len >= ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return bp * std::exp(log_sum / 4.0);
}

size_t TerEdits(const std::vector<std::string> &hyp_words,
                const std::vector<std::string> &ref_words) {
  std::unordered_map<std::string, int> ids;
  auto intern = [&](const std::vector<std::string> &words) {
    std::vector<int> out;
    for (const auto &w : words) out.push_back(ids.emplace(w, ids.size()).first->second);
    return out;
  };
  std::vector<int> hyp = intern(hyp_words);
  const std::vector<int> ref = intern(ref_words);
  size_t cost = EditDistance(hyp, ref);
  size_t shifts = 0;
  while (cost > 0) {
    size_t best_gain = 0;
    std::vector<int> best;
    for (size_t i = 0; i < hyp.size(); ++i) {
      for (size_t len = 1; len <= kTerMaxShiftSize && i + len <= hyp.size(); ++len) {
        if (!Occurs(ref, hyp.data() + i, len)) break;
        std::vector<int> rest(hyp.begin(), hyp.begin() + static_cast<std::ptrdiff_t>(i));
        rest.insert(rest.end(), hyp.begin() + static_cast<std::ptrdiff_t>(i + len),
                    hyp.end());
        for (size_t k = 0; k <= rest.size(); ++k) {
          if (k == i) continue;
          const size_t distance = k > i ? k - i : i - k;
          if (distance > kTerMaxShiftDistance) continue;
          std::vector<int> cand(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(k));
          cand.insert(cand.end(), hyp.begin() + static_cast<std::ptrdiff_t>(i),
                      hyp.begin() + static_cast<std::ptrdiff_t>(i + len));
          cand.insert(cand.end(), rest.begin() + static_cast<std::ptrdiff_t>(k), rest.end());
          const size_t c = EditDistance(cand, ref);
          if (c < cost && cost - c > best_gain) {
            best_gain = cost - c;
            best = std::move(cand);
          }
        }
      }
    }
    if (best_gain == 0) break;
    hyp = std::move(best);
    cost -= best_gain;
    ++shifts;
  }
  return shifts + cost;
}

double Ter(const std::vector<std::string> &hypotheses, const References &references) {
  CheckShapes(hypotheses.size(), references);
  double edits = 0.0, ref_words = 0.0;
  for (size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = SplitWhitespace(hypotheses[s]);
    size_t best = 0;
    double len_sum = 0.0;
    for (size_t r = 0; r < references[s].size(); ++r) {
      const auto ref = SplitWhitespace(references[s][r]);
      if (ref.empty()) throw MetricError("empty reference in segment " + std::to_string(s));
      const size_t e = TerEdits(hyp, ref);
      best = r == 0 ? e : std::min(best, e);
      len_sum += static_cast<double>(ref.size());
    }
    edits += static_cast<double>(best);
    ref_words += len_sum / static_cast<double>(references[s].size());
  }
  return edits / ref_words;
}

double ChrfPlusPlusSegment(const std::string &hyp, const std::string &ref) {
  constexpr double kBeta2 = 4.0;
  const auto hyp_chars = Characters(hyp), ref_chars = Characters(ref);
  const auto hyp_words = SplitWhitespace(hyp), ref_words = SplitWhitespace(ref);
  double precision = 0.0, recall = 0.0;
  size_t orders = 0;
  auto add = [&](const std::vector<std::string> &h, const std::vector<std::string> &r,
                 size_t n) {
    const NgramCounts hc = CountNgrams(h, n), rc = CountNgrams(r, n);
    const size_t ht = Total(hc), rt = Total(rc);
    if (ht == 0 && rt == 0) return;
    const size_t m = Overlap(hc, rc);
    precision += Fraction(m, ht);
    recall += Fraction(m, rt);
    ++orders;
  };
  for (size_t n = 1; n <= 6; ++n) add(hyp_chars, ref_chars, n);
  for (size_t n = 1; n <= 2; ++n) add(hyp_words, ref_words, n);
  if (orders == 0) return 1.0;
  precision /= static_cast<double>(orders);
  recall /= static_cast<double>(orders);
  const double denom = kBeta2 * precision + recall;
  return denom > 0.0 ? (1.0 + kBeta2) * precision * recall / denom : 0.0;
}

double ChrfPlusPlus(const std::vector<std::string> &hypotheses,
                    const References &references) {
  CheckShapes(hypotheses.size(), references);
  double sum = 0.0;
  for (size_t s = 0; s < hypotheses.size(); ++s) {
    double best = 0.0;
    for (const auto &r : references[s]) {
      best = std::max(best, ChrfPlusPlusSegment(hypotheses[s], r));
    }
    sum += best;
  }
  return sum / static_cast<double>(hypotheses.size());
}

PrecisionRecall StrictTripleMatch(const std::vector<std::optional<KnowledgeGraph>> &hyps,
                                  const std::vector<KnowledgeGraph> &refs,
                                  const MatchOptions &options) {
  if (hyps.size() != refs.size()) {
    throw MetricError("hypothesis/reference graph count mismatch");
  }
  auto key = [&](const Triple &t) {
    if (options.byte_exact) return Triple{t.subject, t.predicate, t.object};
    return Triple{NormalizeForMatch(t.subject), NormalizeForMatch(t.predicate),
                  NormalizeForMatch(t.object)};
  };
  size_t matched = 0, predicted = 0, gold = 0;
  for (size_t i = 0; i < refs.size(); ++i) {
    std::set<Triple> ref_set, hyp_set;
    for (const auto &t : refs[i].triples()) ref_set.insert(key(t));
    if (hyps[i]) {
      for (const auto &t : hyps[i]->triples()) hyp_set.insert(key(t));
    }
    for (const auto &t : hyp_set) matched += ref_set.contains(t);
    predicted += hyp_set.size();
    gold += ref_set.size();
  }
  return Finish(matched, predicted, gold);
}

TextEvalReport EvaluateText(const std::vector<std::string> &hypotheses,
                            const References &references,
                            const std::vector<SplitTag> *splits) {
  CheckShapes(hypotheses.size(), references);
  TextEvalReport report;
  for (const auto &[name, idx] : Columns(hypotheses.size(), splits)) {
    const auto hyps = Pick(hypotheses, idx);
    const auto refs = Pick(references, idx);
    report.columns.push_back(
        {name, {Bleu(hyps, refs), Ter(hyps, refs), ChrfPlusPlus(hyps, refs), idx.size()}});
  }
  return report;
}

GraphEvalReport EvaluateGraphs(const std::vector<std::optional<KnowledgeGraph>> &hyps,
                               const std::vector<KnowledgeGraph> &refs,
                               const std::vector<SplitTag> *splits,
                               const MatchOptions &options) {
  if (hyps.size() != refs.size()) {
    throw MetricError("hypothesis/reference graph count mismatch");
  }
  if (refs.empty()) throw MetricError("empty corpus");
  GraphEvalReport report;
  for (const auto &[name, idx] : Columns(refs.size(), splits)) {
    report.columns.push_back({name, StrictTripleMatch(Pick(hyps, idx), Pick(refs, idx),
                                                      options)});
  }
  return report;
}

std::vector<std::string> FormatReport(const TextEvalReport &report) {
  std::vector<std::string> lines;
  for (const auto &col : report.columns) {
    lines.push_back(col.split + "\tbleu\t" + Fixed4(col.scores.bleu));
    lines.push_back(col.split + "\tter\t" + Fixed4(col.scores.ter));
    lines.push_back(col.split + "\tchrf++\t" + Fixed4(col.scores.chrfpp));
  }
  return lines;
}

std::vector<std::string> FormatReport(const GraphEvalReport &report) {
  std::vector<std::string> lines;
  for (const auto &col : report.columns) {
    lines.push_back(col.split + "\tf1\t" + Fixed4(col.scores.f1));
    lines.push_back(col.split + "\tprecision\t" + Fixed4(col.scores.precision));
    lines.push_back(col.split + "\trecall\t" + Fixed4(col.scores.recall));
  }
  return lines;
}

namespace {

template <typename Scores>
std::vector<std::string> Table(
    const std::vector<EvalColumn<Scores>> &columns,
    const std::vector<std::pair<std::string, double Scores::*>> &metrics) {
  std::string header = "metric";
  for (const auto &col : columns) header += "\t" + col.split;
  std::vector<std::string> lines = {header};
  for (const auto &[name, field] : metrics) {
    std::string row = name;
    for (const auto &col : columns) row += "\t" + Fixed4(col.scores.*field);
    lines.push_back(row);
  }
  return lines;
}

}  // namespace

std::vector<std::string> FormatReportTable(const TextEvalReport &report) {
  return Table<TextScores>(report.columns, {{"bleu", &TextScores::bleu},
                                            {"ter", &TextScores::ter},
                                            {"chrf++", &TextScores::chrfpp}});
}

std::vector<std::string> FormatReportTable(const GraphEvalReport &report) {
  return Table<PrecisionRecall>(report.columns, {{"f1", &PrecisionRecall::f1},
                                                 {"precision", &PrecisionRecall::precision},
                                                 {"recall", &PrecisionRecall::recall}});
}

std::string ReportJson(const TextEvalReport &report) {
  nlohmann::ordered_json j;
  for (const auto &col : report.columns) {
    j[col.split] = {{"bleu", col.scores.bleu},
                    {"ter", col.scores.ter},
                    {"chrf++", col.scores.chrfpp},
                    {"count", col.scores.count}};
  }
  return j.dump(2) + "\n";
}

std::string ReportJson(const GraphEvalReport &report) {
  nlohmann::ordered_json j;
  for (const auto &col : report.columns) {
    j[col.split] = {{"f1", col.scores.f1},
                    {"precision", col.scores.precision},
                    {"recall", col.scores.recall},
                    {"matched", col.scores.matched},
                    {"predicted", col.scores.predicted},
                    {"gold", col.scores.gold}};
  }
  return j.dump(2) + "\n";
}

}  // namespace kgcycle
