// SPDX-License-Identifier: Apache-2.0
//
// Exact-match triple scoring with micro-averaged precision, recall and F1,
// broken down by overlap category and by triple count.
//
// F1 is always recomputed as 2PR/(P+R) from the reported P and R. Published
// tables in this task family do not always satisfy that identity (a row
// printing P 0.912 / R 0.895 / F1 0.896 is one example; the harmonic mean of
// those P and R is 0.9034), so reported F1 values from elsewhere cannot be
// compared to these reports digit-for-digit.
#pragma once

#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "casaug/corpus.hpp"
#include "casaug/errors.hpp"
#include "casaug/model.hpp"

namespace casaug {

/// (normalized subject, relation id, normalized object)
using TripleKey = std::tuple<std::string, std::size_t, std::string>;

inline TripleKey triple_key(const RelationTriple& t) {
  return {normalize_surface(t.subject), t.relation, normalize_surface(t.object)};
}

struct MatchCounts {
  std::size_t tp = 0, fp = 0, fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline MatchCounts exact_match(const std::set<TripleKey>& pred, const std::set<TripleKey>& gold) {
  MatchCounts c;
  for (const auto& t : pred) (gold.count(t) ? c.tp : c.fp) += 1;
  c.fn = gold.size() - c.tp;
  return c;
}

inline double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

/// Zero denominators give zero (0/0 metrics are defined as 0).
inline Metrics metrics(const MatchCounts& c) {
  Metrics m;
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

struct GroupResult {
  std::size_t sentences = 0;
  MatchCounts counts;
  Metrics metrics;
};

struct EvaluationReport {
  GroupResult overall;
  std::map<std::string, GroupResult> by_category;  // normal, epo, seo
  std::map<std::string, GroupResult> by_count;     // "1" .. "4", "5+" (and "0" if present)
  std::vector<MatchCounts> per_sentence;
};

using TriplePredictor = std::function<std::vector<RelationTriple>(const AnnotatedSentence&)>;

inline EvaluationReport evaluate(const TriplePredictor& predict,
                                 const std::vector<AnnotatedSentence>& test) {
  if (test.empty()) throw InputError("evaluate: empty test corpus");
  EvaluationReport report;
  for (const char* cat : {"normal", "epo", "seo"}) report.by_category[cat];
  for (const char* b : {"1", "2", "3", "4", "5+"}) report.by_count[b];
  for (const auto& s : test) {
    std::set<TripleKey> gold, pred;
    for (const auto& t : s.triples) gold.insert(triple_key(t));
    for (const auto& t : predict(s)) pred.insert(triple_key(t));
    const auto c = exact_match(pred, gold);
    report.per_sentence.push_back(c);
    auto tally = [&](GroupResult& g) {
      ++g.sentences;
      g.counts += c;
    };
    tally(report.overall);
    const auto flags = classify_overlap(s);
    if (flags.normal) tally(report.by_category["normal"]);
    if (flags.epo) tally(report.by_category["epo"]);
    if (flags.seo) tally(report.by_category["seo"]);
    tally(report.by_count[bucket_label(triple_count_bucket(s))]);
  }
  report.overall.metrics = metrics(report.overall.counts);
  for (auto* group : {&report.by_category, &report.by_count})
    for (auto& [_, g] : *group) g.metrics = metrics(g.counts);
  return report;
}

inline std::vector<RelationTriple> to_relation_triples(const std::vector<ExtractedTriple>& ts) {
  std::vector<RelationTriple> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.push_back({t.subject_surface, t.relation, t.object_surface});
  return out;
}

inline EvaluationReport evaluate(const Model& model, const std::vector<AnnotatedSentence>& test,
                                 double threshold) {
  return evaluate(
      [&](const AnnotatedSentence& s) {
        return to_relation_triples(extract_tokens(model, s.tokens, threshold));
      },
      test);
}

inline nlohmann::json group_to_json(const GroupResult& g) {
  return {{"sentences", g.sentences}, {"p", g.metrics.precision}, {"r", g.metrics.recall},
          {"f1", g.metrics.f1},       {"tp", g.counts.tp},         {"fp", g.counts.fp},
          {"fn", g.counts.fn}};
}

inline nlohmann::json report_to_json(const EvaluationReport& r,
                                     const nlohmann::json& config_echo = nlohmann::json::object()) {
  nlohmann::json j;
  j["overall"] = group_to_json(r.overall);
  for (const auto& [k, g] : r.by_category) j["by_category"][k] = group_to_json(g);
  for (const auto& [k, g] : r.by_count) j["by_count"][k] = group_to_json(g);
  j["config_echo"] = config_echo;
  return j;
}

inline std::string render_report(const EvaluationReport& r, const std::string& title = "") {
  std::ostringstream out;
  if (!title.empty()) out << title << '\n';
  out << std::left << std::setw(10) << "Split" << std::right << std::setw(11) << "Sentences"
      << std::setw(8) << "Prec." << std::setw(8) << "Rec." << std::setw(8) << "F1"
      << std::setw(7) << "TP" << std::setw(7) << "FP" << std::setw(7) << "FN" << '\n';
  auto row = [&](const std::string& name, const GroupResult& g) {
    out << std::left << std::setw(10) << name << std::right << std::setw(11) << g.sentences
        << std::fixed << std::setprecision(3) << std::setw(8) << g.metrics.precision
        << std::setw(8) << g.metrics.recall << std::setw(8) << g.metrics.f1 << std::setw(7)
        << g.counts.tp << std::setw(7) << g.counts.fp << std::setw(7) << g.counts.fn << '\n';
  };
  row("ALL", r.overall);
  row("Normal", r.by_category.at("normal"));
  row("EPO", r.by_category.at("epo"));
  row("SEO", r.by_category.at("seo"));
  for (const auto& [k, g] : r.by_count) row("N=" + k, g);
  return out.str();
}

}  // namespace casaug
