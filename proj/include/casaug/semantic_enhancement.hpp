// SPDX-License-Identifier: Apache-2.0
//
// Relation pre-classification of a candidate subject and lexicon attention.
//
//   w           = normalize(W_cls v_sub + b_cls)            one weight per relation
//   p_r         = softmax_j(v_sub . v_rj)                   over the n similar words
//   v_aug[r]    = sum_j p_rj v_rj
//   h_aug       = sum_r w_r v_aug[r]
//
// Relations with no similar words contribute a zero v_aug row.
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "casaug/corpus.hpp"
#include "casaug/errors.hpp"
#include "casaug/params.hpp"
#include "casaug/subject_lexicon.hpp"
#include "casaug/tensor.hpp"

namespace casaug {

enum class WeightNormalization { Softmax, Sigmoid };

struct PreClassifierParams {
  Tensor weight;  // [R, D]
  Tensor bias;    // [R]

  static PreClassifierParams init(std::size_t num_rel, std::size_t dim, Initializer& init) {
    return {init.normal({num_rel, dim}, 1.0 / std::sqrt(static_cast<double>(dim))),
            init.zeros({num_rel})};
  }
  void append_named(NamedParams& out) const {
    out.emplace_back("preclass.weight", weight);
    out.emplace_back("preclass.bias", bias);
  }
};

struct EnhancementResult {
  Tensor w;               // [R]
  Tensor v_aug_per_rel;   // [R, D]
  Tensor h_aug;           // [D]
};

inline Tensor preclassify(const Tensor& v_sub, const PreClassifierParams& params,
                          WeightNormalization norm = WeightNormalization::Softmax) {
  if (params.weight.rank() != 2 || params.weight.shape()[1] != v_sub.size()) {
    throw ContractError("preclassify: classifier " + shape_string(params.weight.shape()) +
                        " cannot take a vector of length " + std::to_string(v_sub.size()));
  }
  const Tensor logits = add(matmul(params.weight, v_sub), params.bias);
  return norm == WeightNormalization::Softmax ? softmax(logits) : sigmoid(logits);
}

/// words: [n, D]
inline Tensor attention_weights(const Tensor& v_sub, const Tensor& words) {
  if (words.rank() != 2 || words.shape()[0] == 0) {
    throw ContractError("attention_weights: needs at least one word");
  }
  if (words.shape()[1] != v_sub.size()) {
    throw ContractError("attention_weights: word dim " + std::to_string(words.shape()[1]) +
                        " vs subject dim " + std::to_string(v_sub.size()));
  }
  return softmax(matmul(words, v_sub));
}

inline Tensor relation_enhancement(const Tensor& p, const Tensor& words) {
  if (words.rank() != 2 || p.size() != words.shape()[0]) {
    throw ContractError("relation_enhancement: " + std::to_string(p.size()) +
                        " weights for words " + shape_string(words.shape()));
  }
  return matmul(p, words);
}

inline Tensor similar_word_matrix(const std::vector<SimilarEntry>& entries) {
  std::vector<Tensor> rows;
  rows.reserve(entries.size());
  for (const auto& e : entries) rows.push_back(e.vector);
  return stack_rows(rows);
}

inline EnhancementResult enhance(const Tensor& v_sub, const SimilarVocab& sim, const Tensor& w) {
  if (sim.size() != w.size()) {
    throw ContractError("enhance: " + std::to_string(sim.size()) + " relations in vocabulary, " +
                        std::to_string(w.size()) + " weights");
  }
  std::vector<Tensor> v_aug;
  v_aug.reserve(sim.size());
  for (const auto& entries : sim) {
    if (entries.empty()) {
      v_aug.push_back(Tensor::zeros({v_sub.size()}));
      continue;
    }
    const Tensor words = similar_word_matrix(entries);
    v_aug.push_back(relation_enhancement(attention_weights(v_sub, words), words));
  }
  EnhancementResult res;
  res.w = w;
  res.v_aug_per_rel = stack_rows(v_aug);
  res.h_aug = matmul(w, res.v_aug_per_rel);
  return res;
}

struct RelationTargetLabel {
  std::vector<std::size_t> counts;
  std::vector<double> probs;

  bool supervised() const {
    for (auto c : counts)
      if (c > 0) return true;
    return false;
  }
};

inline RelationTargetLabel label_from_counts(std::vector<std::size_t> counts) {
  RelationTargetLabel label;
  std::size_t total = 0;
  for (auto c : counts) total += c;
  label.probs.assign(counts.size(), 0.0);
  if (total > 0) {
    for (std::size_t i = 0; i < counts.size(); ++i)
      label.probs[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  label.counts = std::move(counts);
  return label;
}

/// Relation counts of every gold triple whose subject matches `subject`
/// (compared after surface normalization), normalized to a distribution.
inline RelationTargetLabel build_relation_target(const std::string& subject,
                                                 const std::vector<AnnotatedSentence>& corpus,
                                                 std::size_t num_rel) {
  const std::string key = normalize_surface(subject);
  std::vector<std::size_t> counts(num_rel, 0);
  for (const auto& s : corpus)
    for (const auto& t : s.triples)
      if (t.relation < num_rel && normalize_surface(t.subject) == key) ++counts[t.relation];
  return label_from_counts(std::move(counts));
}

/// Precomputed targets for every subject of a corpus.
class RelationTargetIndex {
 public:
  RelationTargetIndex() = default;
  RelationTargetIndex(const std::vector<AnnotatedSentence>& corpus, std::size_t num_rel)
      : num_rel_(num_rel) {
    std::map<std::string, std::vector<std::size_t>> counts;
    for (const auto& s : corpus)
      for (const auto& t : s.triples) {
        if (t.relation >= num_rel) continue;
        auto& c = counts[normalize_surface(t.subject)];
        c.resize(num_rel, 0);
        ++c[t.relation];
      }
    for (auto& [subject, c] : counts) labels_.emplace(subject, label_from_counts(std::move(c)));
  }

  RelationTargetLabel get(const std::string& subject) const {
    auto it = labels_.find(normalize_surface(subject));
    if (it == labels_.end()) return label_from_counts(std::vector<std::size_t>(num_rel_, 0));
    return it->second;
  }

 private:
  std::size_t num_rel_ = 0;
  std::map<std::string, RelationTargetLabel> labels_;
};

/// Mean over relations of BCE(w_r, target_r).
inline Tensor preclassification_loss(const Tensor& w, const RelationTargetLabel& target) {
  if (!target.supervised()) {
    throw ContractError("preclassification_loss: subject has no gold triples");
  }
  if (target.probs.size() != w.size()) {
    throw ContractError("preclassification_loss: " + std::to_string(w.size()) +
                        " weights vs " + std::to_string(target.probs.size()) + " targets");
  }
  return binary_cross_entropy(w, Tensor::vector(target.probs));
}

}  // namespace casaug
