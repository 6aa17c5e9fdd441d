// SPDX-License-Identifier: Apache-2.0
//
// Composite loss with teacher forcing, Adam updates and the epoch loop.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "casaug/corpus.hpp"
#include "casaug/evaluation.hpp"
#include "casaug/model.hpp"
#include "casaug/semantic_enhancement.hpp"
#include "casaug/tensor.hpp"

namespace casaug {

struct LossWeights {
  double subject = 1.0;
  double object = 1.0;
  double null_object = 1.0;
  double preclass = 1.0;
};

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 8;
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 7;
  LossWeights weights;
  double dev_fraction = 0.1;  // used only when no dev corpus is supplied
  InitMode init = InitMode::Random;
  std::size_t min_count = 1;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (learning_rate < 0) throw ConfigError("learning_rate must be >= 0");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
      throw ConfigError("Adam betas must lie in [0,1)");
    }
    if (adam_epsilon <= 0) throw ConfigError("adam epsilon must be positive");
    if (dev_fraction < 0 || dev_fraction >= 1) throw ConfigError("dev_fraction must lie in [0,1)");
  }
};

struct LossBreakdown {
  double subject_loss = 0.0;
  double object_loss = 0.0;
  double null_object_loss = 0.0;
  double preclass_loss = 0.0;
  double total = 0.0;
};

/// Average of start and end BCE against 0/1 labels at gold span boundaries.
inline Tensor subject_loss(const SubjectScores& scores, const std::vector<Span>& gold) {
  const std::size_t n = scores.start_probs.size();
  std::vector<double> start(n, 0.0), end(n, 0.0);
  for (const auto& s : gold) {
    if (s.end >= n) continue;
    start[s.start] = 1.0;
    end[s.end] = 1.0;
  }
  return scale(add(binary_cross_entropy(scores.start_probs, Tensor::vector(std::move(start))),
                   binary_cross_entropy(scores.end_probs, Tensor::vector(std::move(end)))),
               0.5);
}

struct ObjectLossTerms {
  Tensor object;       // rows of relations that hold for the subject
  Tensor null_object;  // all other rows against all-zero labels
};

/// `gold_objects[r]` lists the gold object spans of relation r for the
/// conditioning subject. An empty row set yields a constant zero term.
inline ObjectLossTerms object_loss(const ObjectScores& scores,
                                   const std::vector<std::vector<Span>>& gold_objects) {
  const std::size_t rels = scores.start_probs.shape()[0];
  const std::size_t n = scores.start_probs.shape()[1];
  if (gold_objects.size() != rels) {
    throw ContractError("object_loss: labels for " + std::to_string(gold_objects.size()) +
                        " relations, scores for " + std::to_string(rels));
  }
  std::vector<std::size_t> held, unheld;
  for (std::size_t r = 0; r < rels; ++r) (gold_objects[r].empty() ? unheld : held).push_back(r);

  const auto term = [&](const std::vector<std::size_t>& rows, bool with_labels) {
    if (rows.empty()) return Tensor::scalar(0.0);
    std::vector<double> start(rows.size() * n, 0.0), end(rows.size() * n, 0.0);
    if (with_labels) {
      for (std::size_t k = 0; k < rows.size(); ++k)
        for (const auto& s : gold_objects[rows[k]]) {
          if (s.end >= n) continue;
          start[k * n + s.start] = 1.0;
          end[k * n + s.end] = 1.0;
        }
    }
    const Tensor ls = Tensor::matrix(rows.size(), n, std::move(start));
    const Tensor le = Tensor::matrix(rows.size(), n, std::move(end));
    return scale(add(binary_cross_entropy(select_rows(scores.start_probs, rows), ls),
                     binary_cross_entropy(select_rows(scores.end_probs, rows), le)),
                 0.5);
  };
  return {term(held, true), term(unheld, false)};
}

struct LossOutput {
  Tensor total;
  LossBreakdown breakdown;
};

/// Full forward pass conditioned on the gold subject `subject` (teacher
/// forcing). std::nullopt for sentences without triples.
inline std::optional<LossOutput> total_loss(const Model& model, const AnnotatedSentence& sentence,
                                            Span subject, const RelationTargetIndex& targets,
                                            const LossWeights& weights) {
  if (sentence.triples.empty()) return std::nullopt;
  const auto enc = model.encode(sentence.tokens);
  const std::size_t n = enc.length();
  if (subject.end >= n) throw ContractError("total_loss: subject span beyond sentence");

  const auto subj_scores = score_subject_positions(enc, model.params.subject);
  const Tensor l_subj = subject_loss(subj_scores, sentence.subject_spans);

  const auto cond = condition_on_subject(model, enc, subject);
  const auto obj_scores = score_object_positions(enc, cond.v_sub, cond.h_aug, model.params.object);
  std::vector<std::vector<Span>> gold_objects(model.num_rel());
  std::string subject_surface;
  for (std::size_t i = 0; i < sentence.triples.size(); ++i) {
    if (sentence.subject_spans[i] != subject) continue;
    subject_surface = sentence.triples[i].subject;
    if (sentence.object_spans[i].end < n) {
      gold_objects[sentence.triples[i].relation].push_back(sentence.object_spans[i]);
    }
  }
  const auto obj_terms = object_loss(obj_scores, gold_objects);

  LossOutput out;
  Tensor total = add(add(scale(l_subj, weights.subject), scale(obj_terms.object, weights.object)),
                     scale(obj_terms.null_object, weights.null_object));
  out.breakdown.subject_loss = l_subj.item();
  out.breakdown.object_loss = obj_terms.object.item();
  out.breakdown.null_object_loss = obj_terms.null_object.item();
  if (cond.w.defined()) {
    const auto target = targets.get(subject_surface);
    if (target.supervised()) {
      const Tensor l_pre = preclassification_loss(cond.w, target);
      out.breakdown.preclass_loss = l_pre.item();
      total = add(total, scale(l_pre, weights.preclass));
    }
  }
  out.breakdown.total = total.item();
  out.total = total;
  return out;
}

/// Distinct gold subject spans of a sentence, in first-seen order.
inline std::vector<Span> gold_subjects(const AnnotatedSentence& s) {
  std::vector<Span> out;
  for (const auto& sp : s.subject_spans)
    if (std::find(out.begin(), out.end(), sp) == out.end()) out.push_back(sp);
  return out;
}

class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(NamedParams& params) {
    if (m_.empty()) {
      for (auto& [_, p] : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k].second;
      auto data = p.mutable_data();
      const auto grad = p.grad();
      for (std::size_t i = 0; i < data.size(); ++i) {
        m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * grad[i];
        v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * grad[i] * grad[i];
        data[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
      }
    }
  }
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  LossBreakdown mean_loss;
  std::optional<double> dev_f1;
  std::size_t skipped_sentences = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitResult {
  Model model;
  std::vector<EpochMetrics> log;
};

/// Seeded dev split: the first floor(fraction * size) sentences of a seeded
/// permutation form the dev set.
inline std::pair<std::vector<AnnotatedSentence>, std::vector<AnnotatedSentence>> split_dev(
    const std::vector<AnnotatedSentence>& corpus, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(corpus.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed ^ 0xD1B54A32D192ED03ULL);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_dev = static_cast<std::size_t>(fraction * static_cast<double>(corpus.size()));
  std::vector<AnnotatedSentence> train, dev;
  for (std::size_t k = 0; k < idx.size(); ++k) (k < n_dev ? dev : train).push_back(corpus[idx[k]]);
  return {std::move(train), std::move(dev)};
}

struct FitOptions {
  /// Held-out sentences for the per-epoch dev F1. When absent, a seeded
  /// fraction of the training corpus is split off.
  std::optional<std::vector<AnnotatedSentence>> dev;
  /// Lexicon used when the refresh policy is frozen; default is the lexicon
  /// of the freshly initialized encoder.
  std::optional<SubjectLexicon> initial_lexicon;
  std::function<void(const EpochMetrics&)> on_epoch;
};

inline FitResult fit(const std::vector<AnnotatedSentence>& corpus, const RelationSchema& schema,
                     const ModelConfig& model_cfg, const TrainConfig& cfg,
                     FitOptions options = {}) {
  cfg.validate();
  model_cfg.validate();
  if (corpus.empty()) throw InputError("fit: empty training corpus");

  std::vector<AnnotatedSentence> train, dev;
  if (options.dev) {
    train = corpus;
    dev = *options.dev;
  } else {
    std::tie(train, dev) = split_dev(corpus, cfg.dev_fraction, cfg.seed);
  }
  if (train.empty()) throw InputError("fit: no training sentences after dev split");

  FitResult result{Model::create(model_cfg, schema, train, cfg.init, cfg.seed, cfg.min_count), {}};
  Model& model = result.model;
  if (options.initial_lexicon) model.lexicon = *options.initial_lexicon;
  const RelationTargetIndex targets(train, schema.size());
  NamedParams params = model.params.named();
  for (auto& [_, p] : params) p.zero_grad();
  AdamOptimizer adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_epsilon);
  std::mt19937_64 rng(cfg.seed);

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (epoch > 1 && model_cfg.lexicon_refresh == LexiconRefresh::PerEpoch &&
        !model_cfg.disable_enhancement) {
      model.refresh_lexicon(train, "epoch:" + std::to_string(epoch));
    }
    std::shuffle(order.begin(), order.end(), rng);
    EpochMetrics em;
    em.epoch = epoch;
    std::size_t counted = 0;

    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      std::vector<std::pair<std::size_t, Span>> batch;
      for (std::size_t k = b; k < e; ++k) {
        const auto& s = train[order[k]];
        const auto subjects = gold_subjects(s);
        if (subjects.empty()) {
          ++em.skipped_sentences;
          continue;
        }
        const auto pick = std::uniform_int_distribution<std::size_t>(0, subjects.size() - 1)(rng);
        batch.emplace_back(order[k], subjects[pick]);
      }
      if (batch.empty()) continue;
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (const auto& [idx, subject] : batch) {
        Tape tape;
        std::optional<LossOutput> out;
        Tensor scaled;
        {
          TapeScope scope(tape);
          out = total_loss(model, train[idx], subject, targets, cfg.weights);
          scaled = scale(out->total, inv);
        }
        if (!std::isfinite(out->breakdown.total)) {
          std::ostringstream msg;
          msg << "training diverged at epoch " << epoch << ", sentence " << idx
              << ": subject=" << out->breakdown.subject_loss
              << " object=" << out->breakdown.object_loss
              << " null_object=" << out->breakdown.null_object_loss
              << " preclass=" << out->breakdown.preclass_loss
              << " total=" << out->breakdown.total << " after " << adam.steps() << " updates";
          throw TrainingDiverged(msg.str());
        }
        tape.backward(scaled);
        em.mean_loss.subject_loss += out->breakdown.subject_loss;
        em.mean_loss.object_loss += out->breakdown.object_loss;
        em.mean_loss.null_object_loss += out->breakdown.null_object_loss;
        em.mean_loss.preclass_loss += out->breakdown.preclass_loss;
        em.mean_loss.total += out->breakdown.total;
        ++counted;
      }
      adam.step(params);
      for (auto& [_, p] : params) p.zero_grad();
    }
    if (counted > 0) {
      const double c = static_cast<double>(counted);
      em.mean_loss.subject_loss /= c;
      em.mean_loss.object_loss /= c;
      em.mean_loss.null_object_loss /= c;
      em.mean_loss.preclass_loss /= c;
      em.mean_loss.total /= c;
    }
    if (!dev.empty()) em.dev_f1 = evaluate(model, dev, model_cfg.threshold).overall.metrics.f1;
    if (options.on_epoch) options.on_epoch(em);
    result.log.push_back(em);
  }
  return result;
}

}  // namespace casaug
