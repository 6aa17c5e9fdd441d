// SPDX-License-Identifier: Apache-2.0
//
// Relation-typed subject lexicon and nearest-word retrieval.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "casaug/corpus.hpp"
#include "casaug/encoder.hpp"
#include "casaug/errors.hpp"
#include "casaug/tensor.hpp"

namespace casaug {

enum class DistanceMetric { Euclidean, Cosine };

struct LexiconEntry {
  std::string word;
  Tensor vector;  // [D], constant
};

struct SubjectLexicon {
  static constexpr int kVersion = 1;

  std::size_t dim = 0;
  std::vector<std::string> relation_names;
  std::vector<std::vector<LexiconEntry>> relations;  // at most m entries each
  std::string encoder_checkpoint;

  std::size_t num_rel() const { return relations.size(); }
};

struct SimilarEntry {
  std::string word;
  Tensor vector;
  double distance = 0.0;
};

/// Per relation, the nearest lexicon entries in ascending distance.
using SimilarVocab = std::vector<std::vector<SimilarEntry>>;

/// Euclidean distance, or 1 - cosine similarity for the cosine variant.
inline double semantic_distance(std::span<const double> a, std::span<const double> b,
                                DistanceMetric metric = DistanceMetric::Euclidean) {
  if (a.size() != b.size()) {
    throw ContractError("semantic_distance: dimensions " + std::to_string(a.size()) +
                        " and " + std::to_string(b.size()));
  }
  if (metric == DistanceMetric::Euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  return denom > 0.0 ? 1.0 - dot / denom : 1.0;
}

inline SimilarVocab top_n_similar(std::span<const double> v_sub, const SubjectLexicon& lex,
                                  std::size_t n,
                                  DistanceMetric metric = DistanceMetric::Euclidean) {
  if (n < 1) throw ContractError("top_n_similar: n must be >= 1");
  SimilarVocab out(lex.num_rel());
  for (std::size_t r = 0; r < lex.num_rel(); ++r) {
    auto& dst = out[r];
    dst.reserve(lex.relations[r].size());
    for (const auto& e : lex.relations[r])
      dst.push_back({e.word, e.vector, semantic_distance(v_sub, e.vector.data(), metric)});
    std::stable_sort(dst.begin(), dst.end(),
                     [](const auto& a, const auto& b) { return a.distance < b.distance; });
    if (dst.size() > n) dst.resize(n);
  }
  return out;
}

/// Head word of a subject string: its first token.
inline std::string subject_head_word(const std::string& subject) {
  auto toks = tokenize(subject);
  return toks.empty() ? std::string() : toks.front();
}

/// Per relation, the head words of gold subjects ranked by frequency
/// (ties lexicographic), truncated to m.
inline std::vector<std::vector<std::string>> collect_lexicon_words(
    const std::vector<AnnotatedSentence>& corpus, std::size_t num_rel, std::size_t m) {
  std::vector<std::map<std::string, std::size_t>> counts(num_rel);
  for (const auto& s : corpus)
    for (const auto& t : s.triples) {
      if (t.relation >= num_rel) continue;
      auto head = subject_head_word(t.subject);
      if (!head.empty()) ++counts[t.relation][head];
    }
  std::vector<std::vector<std::string>> words(num_rel);
  for (std::size_t r = 0; r < num_rel; ++r) {
    std::vector<std::pair<std::string, std::size_t>> ranked(counts[r].begin(), counts[r].end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < ranked.size() && i < m; ++i) words[r].push_back(ranked[i].first);
  }
  return words;
}

/// Vector of a lexicon word: x_0 of the word encoded as a one-token sentence.
inline Tensor embed_word(const std::string& word, const TokenVocabulary& vocab,
                         const EncoderConfig& cfg, const EncoderParams& params) {
  NoGradScope no_grad;
  const auto enc = encode_tokens({word}, vocab, cfg, params);
  return Tensor::vector(std::vector<double>(enc.h.data().begin(),
                                            enc.h.data().begin() + static_cast<std::ptrdiff_t>(cfg.dim)));
}

inline SubjectLexicon build_lexicon(const std::vector<AnnotatedSentence>& corpus,
                                    const RelationSchema& schema, const TokenVocabulary& vocab,
                                    const EncoderConfig& cfg, const EncoderParams& params,
                                    std::size_t m, std::string encoder_checkpoint = "") {
  if (m < 1) throw ConfigError("lexicon size m must be >= 1");
  SubjectLexicon lex;
  lex.dim = cfg.dim;
  lex.relation_names = schema.names();
  lex.encoder_checkpoint = std::move(encoder_checkpoint);
  const auto words = collect_lexicon_words(corpus, schema.size(), m);
  lex.relations.resize(schema.size());
  for (std::size_t r = 0; r < schema.size(); ++r)
    for (const auto& w : words[r]) lex.relations[r].push_back({w, embed_word(w, vocab, cfg, params)});
  return lex;
}

inline nlohmann::json lexicon_to_json(const SubjectLexicon& lex) {
  nlohmann::json rels = nlohmann::json::array();
  for (std::size_t r = 0; r < lex.num_rel(); ++r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : lex.relations[r]) {
      entries.push_back({{"word", e.word},
                         {"vector", std::vector<double>(e.vector.data().begin(), e.vector.data().end())}});
    }
    rels.push_back({{"id", r},
                    {"name", r < lex.relation_names.size() ? lex.relation_names[r] : ""},
                    {"entries", entries}});
  }
  return {{"version", SubjectLexicon::kVersion},
          {"dim", lex.dim},
          {"relations", rels},
          {"encoder_checkpoint", lex.encoder_checkpoint}};
}

inline SubjectLexicon lexicon_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != SubjectLexicon::kVersion) {
      throw InputError("unsupported lexicon version " + j.at("version").dump());
    }
    SubjectLexicon lex;
    lex.dim = j.at("dim").get<std::size_t>();
    lex.encoder_checkpoint = j.at("encoder_checkpoint").get<std::string>();
    for (const auto& rel : j.at("relations")) {
      if (rel.at("id").get<std::size_t>() != lex.relations.size()) {
        throw InputError("lexicon relations must be listed in id order");
      }
      lex.relation_names.push_back(rel.at("name").get<std::string>());
      auto& entries = lex.relations.emplace_back();
      for (const auto& e : rel.at("entries")) {
        auto v = e.at("vector").get<std::vector<double>>();
        if (v.size() != lex.dim) {
          throw InputError("lexicon vector of length " + std::to_string(v.size()) +
                           " in a dim-" + std::to_string(lex.dim) + " lexicon");
        }
        entries.push_back({e.at("word").get<std::string>(), Tensor::vector(std::move(v))});
      }
    }
    return lex;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed lexicon: ") + e.what());
  }
}

inline bool lexicon_equal(const SubjectLexicon& a, const SubjectLexicon& b) {
  if (a.dim != b.dim || a.relation_names != b.relation_names ||
      a.encoder_checkpoint != b.encoder_checkpoint || a.num_rel() != b.num_rel()) {
    return false;
  }
  for (std::size_t r = 0; r < a.num_rel(); ++r) {
    if (a.relations[r].size() != b.relations[r].size()) return false;
    for (std::size_t i = 0; i < a.relations[r].size(); ++i) {
      const auto& x = a.relations[r][i];
      const auto& y = b.relations[r][i];
      if (x.word != y.word ||
          !std::equal(x.vector.data().begin(), x.vector.data().end(), y.vector.data().begin(),
                      y.vector.data().end())) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace casaug
