// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "casaug/encoder.hpp"
#include "casaug/params.hpp"
#include "casaug/subject_tagger.hpp"
#include "casaug/tensor.hpp"

namespace casaug {

/// One start/end tagger per relation, stored row-wise.
struct ObjectTaggerParams {
  Tensor w_start;  // [R, D]
  Tensor b_start;  // [R]
  Tensor w_end;    // [R, D]
  Tensor b_end;    // [R]

  static ObjectTaggerParams init(std::size_t num_rel, std::size_t dim, Initializer& init) {
    const double s = 1.0 / std::sqrt(static_cast<double>(dim));
    return {init.normal({num_rel, dim}, s), init.zeros({num_rel}),
            init.normal({num_rel, dim}, s), init.zeros({num_rel})};
  }
  std::size_t num_rel() const { return w_start.shape()[0]; }
  void append_named(NamedParams& out) const {
    out.emplace_back("object.w_start", w_start);
    out.emplace_back("object.b_start", b_start);
    out.emplace_back("object.w_end", w_end);
    out.emplace_back("object.b_end", b_end);
  }
};

struct ObjectScores {
  Tensor start_probs;  // [R, N]
  Tensor end_probs;    // [R, N]
};

struct ExtractedTriple {
  Span subject;
  std::string subject_surface;
  std::size_t relation = 0;
  Span object;
  std::string object_surface;
  double confidence = 0.0;
};

/// Per relation r and token i: sigmoid(W_r . (x_i + v_sub + h_aug) + b_r).
/// An undefined `h_aug` drops the enhancement term.
inline ObjectScores score_object_positions(const EncodedSentence& enc, const Tensor& v_sub,
                                           const Tensor& h_aug,
                                           const ObjectTaggerParams& params) {
  const std::size_t dim = params.w_start.shape()[1];
  if (enc.h.cols() != dim || v_sub.size() != dim || (h_aug.defined() && h_aug.size() != dim)) {
    throw ContractError("score_object_positions: dimension mismatch against tagger dim " +
                        std::to_string(dim));
  }
  const Tensor cond = h_aug.defined() ? add(v_sub, h_aug) : v_sub;
  const Tensor u = add(enc.h, cond);
  const auto head = [&](const Tensor& w, const Tensor& b) {
    return transpose(sigmoid(add(matmul(u, transpose(w)), b)));
  };
  return {head(params.w_start, params.b_start), head(params.w_end, params.b_end)};
}

inline std::vector<ExtractedTriple> decode_triples(const ObjectScores& scores,
                                                   const SubjectSpan& subject,
                                                   const EncodedSentence& enc,
                                                   double threshold = 0.5,
                                                   double subject_confidence = 1.0) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ContractError("decode_triples: threshold must lie in (0,1)");
  }
  std::vector<ExtractedTriple> out;
  const std::size_t rels = scores.start_probs.shape()[0];
  const std::size_t n = scores.start_probs.shape()[1];
  for (std::size_t r = 0; r < rels; ++r) {
    const auto starts = scores.start_probs.data().subspan(r * n, n);
    const auto ends = scores.end_probs.data().subspan(r * n, n);
    for (const Span obj : decode_spans(starts, ends, threshold)) {
      out.push_back({subject.span, subject.surface, r, obj,
                     join_tokens(enc.tokens, obj.start, obj.end),
                     std::min({subject_confidence, starts[obj.start], ends[obj.end]})});
    }
  }
  return out;
}

}  // namespace casaug
