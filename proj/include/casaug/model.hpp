// SPDX-License-Identifier: Apache-2.0
//
// Full cascade: encoder -> subject tagger -> (lexicon retrieval,
// pre-classification, attention blend) -> per-relation object taggers.
#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "casaug/corpus.hpp"
#include "casaug/encoder.hpp"
#include "casaug/object_tagger.hpp"
#include "casaug/params.hpp"
#include "casaug/semantic_enhancement.hpp"
#include "casaug/subject_lexicon.hpp"
#include "casaug/subject_tagger.hpp"

namespace casaug {

enum class LexiconRefresh { PerEpoch, Frozen };

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t m = 50;  // lexicon entries per relation
  std::size_t n = 5;   // similar words retrieved per relation
  double threshold = 0.5;
  DistanceMetric distance = DistanceMetric::Euclidean;
  WeightNormalization w_norm = WeightNormalization::Softmax;
  LexiconRefresh lexicon_refresh = LexiconRefresh::PerEpoch;
  /// CasRel-only path: no pre-classification, no lexicon attention.
  bool disable_enhancement = false;
  /// Multiplier on h_aug; 0 keeps the enhancement graph but removes its effect.
  double enhancement_weight = 1.0;

  void validate() const {
    encoder.validate();
    if (m < 1) throw ConfigError("m must be >= 1");
    if (n < 1) throw ConfigError("n must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0,1)");
  }
};

struct ModelParams {
  EncoderParams encoder;
  SubjectTaggerParams subject;
  PreClassifierParams preclass;
  ObjectTaggerParams object;

  static ModelParams init(const ModelConfig& cfg, std::size_t vocab_size, std::size_t num_rel,
                          InitMode mode, std::uint64_t seed) {
    Initializer init(mode, seed);
    ModelParams p;
    p.encoder = EncoderParams::init(cfg.encoder, vocab_size, init);
    p.subject = SubjectTaggerParams::init(cfg.encoder.dim, init);
    p.preclass = PreClassifierParams::init(num_rel, cfg.encoder.dim, init);
    p.object = ObjectTaggerParams::init(num_rel, cfg.encoder.dim, init);
    return p;
  }

  NamedParams named() const {
    NamedParams out;
    encoder.append_named(out);
    subject.append_named(out);
    preclass.append_named(out);
    object.append_named(out);
    return out;
  }
};

struct Model {
  ModelConfig config;
  RelationSchema schema;
  TokenVocabulary vocab;
  ModelParams params;
  SubjectLexicon lexicon;

  std::size_t num_rel() const { return schema.size(); }

  /// Fresh model over a training corpus: vocabulary, parameters and an
  /// initial lexicon from the untrained encoder.
  static Model create(const ModelConfig& cfg, const RelationSchema& schema,
                      const std::vector<AnnotatedSentence>& corpus, InitMode mode,
                      std::uint64_t seed, std::size_t min_count = 1) {
    cfg.validate();
    Model model;
    model.config = cfg;
    model.schema = schema;
    std::vector<std::vector<std::string>> token_lists;
    token_lists.reserve(corpus.size());
    for (const auto& s : corpus) token_lists.push_back(s.tokens);
    model.vocab = build_vocabulary(token_lists, min_count);
    model.params = ModelParams::init(cfg, model.vocab.size(), schema.size(), mode, seed);
    model.refresh_lexicon(corpus, "init:seed=" + std::to_string(seed));
    return model;
  }

  void refresh_lexicon(const std::vector<AnnotatedSentence>& corpus, std::string provenance) {
    lexicon = build_lexicon(corpus, schema, vocab, config.encoder, params.encoder, config.m,
                            std::move(provenance));
  }

  EncodedSentence encode(const std::vector<std::string>& tokens) const {
    return encode_tokens(tokens, vocab, config.encoder, params.encoder);
  }
};

/// Everything the object taggers are conditioned on for one subject.
struct SubjectCondition {
  Tensor v_sub;
  Tensor w;      // undefined when enhancement is disabled
  Tensor h_aug;  // undefined when enhancement is disabled
};

inline SubjectCondition condition_on_subject(const Model& model, const EncodedSentence& enc,
                                             Span span) {
  SubjectCondition c;
  c.v_sub = subject_vector(enc, span);
  if (model.config.disable_enhancement) return c;
  if (model.lexicon.num_rel() != model.num_rel()) {
    throw ContractError("lexicon covers " + std::to_string(model.lexicon.num_rel()) +
                        " relations, model has " + std::to_string(model.num_rel()));
  }
  const auto sim =
      top_n_similar(c.v_sub.data(), model.lexicon, model.config.n, model.config.distance);
  c.w = preclassify(c.v_sub, model.params.preclass, model.config.w_norm);
  c.h_aug = enhance(c.v_sub, sim, c.w).h_aug;
  if (model.config.enhancement_weight != 1.0) {
    c.h_aug = scale(c.h_aug, model.config.enhancement_weight);
  }
  return c;
}

/// Decoded triples of one sentence, deduplicated on (subject span, relation,
/// object span) and ordered by descending confidence, then position.
inline std::vector<ExtractedTriple> extract_tokens(const Model& model,
                                                   const std::vector<std::string>& tokens,
                                                   double threshold) {
  NoGradScope no_grad;
  if (tokens.empty()) return {};
  const auto enc = model.encode(tokens);
  const auto scores = score_subject_positions(enc, model.params.subject);
  std::vector<ExtractedTriple> all;
  for (const Span span : decode_subject_spans(scores, threshold)) {
    const auto subject = make_subject(enc, span);
    const auto cond = condition_on_subject(model, enc, span);
    const auto obj_scores = score_object_positions(enc, cond.v_sub, cond.h_aug, model.params.object);
    const double subj_conf =
        std::min(scores.start_probs[span.start], scores.end_probs[span.end]);
    auto triples = decode_triples(obj_scores, subject, enc, threshold, subj_conf);
    all.insert(all.end(), triples.begin(), triples.end());
  }
  std::set<std::tuple<Span, std::size_t, Span>> seen;
  std::vector<ExtractedTriple> unique;
  for (auto& t : all)
    if (seen.emplace(t.subject, t.relation, t.object).second) unique.push_back(std::move(t));
  std::stable_sort(unique.begin(), unique.end(), [](const auto& a, const auto& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return std::tie(a.subject, a.relation, a.object) < std::tie(b.subject, b.relation, b.object);
  });
  return unique;
}

inline std::vector<ExtractedTriple> extract(const Model& model, std::string_view sentence,
                                            double threshold) {
  return extract_tokens(model, tokenize(sentence), threshold);
}

inline std::vector<ExtractedTriple> extract(const Model& model, std::string_view sentence) {
  return extract(model, sentence, model.config.threshold);
}

}  // namespace casaug
