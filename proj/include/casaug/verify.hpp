// SPDX-License-Identifier: Apache-2.0
//
// Self-check suite behind `casaug verify`. Each check is deterministic given
// its seed and reports the measured quantity next to its tolerance.
#pragma once

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "casaug/corpus.hpp"
#include "casaug/gradcheck.hpp"
#include "casaug/model.hpp"
#include "casaug/semantic_enhancement.hpp"
#include "casaug/subject_tagger.hpp"
#include "casaug/training.hpp"

namespace casaug {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Three sentences over three relations covering Normal, EPO and SEO.
inline std::pair<std::vector<AnnotatedSentence>, RelationSchema> gradient_fixture() {
  RelationSchema schema({"founded", "lives_in", "works_in"});
  const auto make = [](std::string text, std::vector<RelationTriple> triples) {
    auto s = annotate(std::move(text), std::move(triples));
    if (!s) throw ContractError("gradient fixture failed to align");
    return *s;
  };
  std::vector<AnnotatedSentence> corpus = {
      make("Kira Vance founded Lumo and lives in Pell .",
           {{"Kira Vance", 0, "Lumo"}, {"Kira Vance", 1, "Pell"}}),
      make("Oren lives in and works in Tasso .", {{"Oren", 1, "Tasso"}, {"Oren", 2, "Tasso"}}),
      make("Mira founded Dune .", {{"Mira", 0, "Dune"}}),
  };
  return {std::move(corpus), std::move(schema)};
}

/// Sum of the training loss over every gold subject of every sentence.
inline Tensor corpus_loss(const Model& model, const std::vector<AnnotatedSentence>& corpus,
                          const RelationTargetIndex& targets, const LossWeights& weights) {
  Tensor total = Tensor::scalar(0.0);
  for (const auto& s : corpus)
    for (const Span subject : gold_subjects(s))
      if (auto out = total_loss(model, s, subject, targets, weights)) total = add(total, out->total);
  return total;
}

inline CheckResult check_gradients(std::uint64_t seed, double tolerance = 1e-4) {
  auto [corpus, schema] = gradient_fixture();
  ModelConfig cfg;
  cfg.encoder.dim = 8;
  cfg.encoder.max_len = 16;
  cfg.n = 2;
  cfg.m = 4;
  const Model model = Model::create(cfg, schema, corpus, InitMode::Random, seed);
  const RelationTargetIndex targets(corpus, schema.size());
  std::vector<Tensor> params;
  for (const auto& [_, p] : model.params.named()) params.push_back(p);
  const auto r = grad_check_detailed(
      [&] { return corpus_loss(model, corpus, targets, LossWeights{}); }, params);
  std::ostringstream d;
  d << "max relative error " << r.max_relative_error << " over " << r.coordinates
    << " coordinates (tolerance " << tolerance << ")";
  return {"grad_check", r.max_relative_error < tolerance, d.str()};
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale_by = 1.0) {
  std::normal_distribution<double> normal(0.0, scale_by);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = normal(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

inline CheckResult check_attention_normalization(std::uint64_t seed, std::size_t draws = 1000) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  bool positive = true;
  for (std::size_t k = 0; k < draws; ++k) {
    const std::size_t dim = 1 + rng() % 16;
    const std::size_t n = 1 + rng() % 10;
    const Tensor p = attention_weights(random_tensor({dim}, rng, 3.0), random_tensor({n, dim}, rng, 3.0));
    double sum = 0.0;
    for (double x : p.data()) {
      sum += x;
      positive = positive && x > 0.0;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  std::ostringstream d;
  d << "max |sum - 1| " << worst << " over " << draws << " draws, all positive: "
    << (positive ? "yes" : "no");
  return {"softmax_sums", worst < 1e-9 && positive, d.str()};
}

inline CheckResult check_one_hot_selection(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  bool exact = true;
  double uniform_err = 0.0;
  for (std::size_t trial = 0; trial < 50; ++trial) {
    const std::size_t rels = 1 + rng() % 6, dim = 1 + rng() % 12;
    const Tensor v_aug = random_tensor({rels, dim}, rng);
    const std::size_t pick = rng() % rels;
    std::vector<double> w(rels, 0.0);
    w[pick] = 1.0;
    const Tensor h = matmul(Tensor::vector(w), v_aug);
    for (std::size_t c = 0; c < dim; ++c) exact = exact && h[c] == v_aug.at(pick, c);

    const Tensor v = random_tensor({dim}, rng);
    std::vector<double> same;
    for (std::size_t r = 0; r < rels; ++r) same.insert(same.end(), v.data().begin(), v.data().end());
    const Tensor hu = matmul(Tensor::vector(std::vector<double>(rels, 1.0 / static_cast<double>(rels))),
                             Tensor::matrix(rels, dim, same));
    for (std::size_t c = 0; c < dim; ++c) uniform_err = std::max(uniform_err, std::abs(hu[c] - v[c]));
  }
  std::ostringstream d;
  d << "one-hot exact: " << (exact ? "yes" : "no") << ", uniform max error " << uniform_err;
  return {"one_hot_selection", exact && uniform_err < 1e-12, d.str()};
}

/// Characterization of the pairing rule: (s, e) is a span iff s and e fire,
/// s <= e, no start fires in (s, e] and no end fires in [s, e).
inline std::vector<Span> pairing_oracle(const std::vector<bool>& start, const std::vector<bool>& end) {
  std::vector<Span> out;
  const std::size_t n = start.size();
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t e = s; e < n; ++e) {
      if (!start[s] || !end[e]) continue;
      bool ok = true;
      for (std::size_t k = s + 1; k <= e; ++k) ok = ok && !start[k];
      for (std::size_t k = s; k < e; ++k) ok = ok && !end[k];
      if (ok) out.push_back({s, e});
    }
  return out;
}

inline CheckResult check_pairing_oracle(std::size_t length = 6) {
  const std::size_t patterns = std::size_t{1} << length;
  std::size_t mismatches = 0;
  for (std::size_t sm = 0; sm < patterns; ++sm)
    for (std::size_t em = 0; em < patterns; ++em) {
      std::vector<bool> sb(length), eb(length);
      std::vector<double> sp(length), ep(length);
      for (std::size_t i = 0; i < length; ++i) {
        sb[i] = (sm >> i) & 1U;
        eb[i] = (em >> i) & 1U;
        sp[i] = sb[i] ? 0.9 : 0.1;
        ep[i] = eb[i] ? 0.9 : 0.1;
      }
      if (decode_spans(sp, ep, 0.5) != pairing_oracle(sb, eb)) ++mismatches;
    }
  std::ostringstream d;
  d << mismatches << " mismatches over " << patterns * patterns << " patterns";
  return {"pairing_oracle", mismatches == 0, d.str()};
}

inline CheckResult check_label_normalization() {
  auto [corpus, schema] = gradient_fixture();
  double worst = 0.0;
  bool counts_match = true;
  std::set<std::string> subjects;
  for (const auto& s : corpus)
    for (const auto& t : s.triples) subjects.insert(t.subject);
  const RelationTargetIndex index(corpus, schema.size());
  for (const auto& subject : subjects) {
    std::vector<std::size_t> scan(schema.size(), 0);
    for (const auto& s : corpus)
      for (const auto& t : s.triples)
        if (t.subject == subject) ++scan[t.relation];
    const auto label = index.get(subject);
    counts_match = counts_match && label.counts == scan;
    double sum = 0.0;
    for (double p : label.probs) sum += p;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  const auto example = label_from_counts({2, 1, 0});
  const bool example_ok =
      example.probs == std::vector<double>{2.0 / 3.0, 1.0 / 3.0, 0.0};
  std::ostringstream d;
  d << "max |sum - 1| " << worst << ", counts match scan: " << (counts_match ? "yes" : "no")
    << ", [2,1,0] -> [2/3,1/3,0]: " << (example_ok ? "yes" : "no");
  return {"label_normalization", worst < 1e-12 && counts_match && example_ok, d.str()};
}

inline std::vector<CheckResult> run_verify(std::uint64_t seed) {
  return {check_gradients(seed), check_attention_normalization(seed), check_one_hot_selection(seed),
          check_pairing_oracle(), check_label_normalization()};
}

}  // namespace casaug
