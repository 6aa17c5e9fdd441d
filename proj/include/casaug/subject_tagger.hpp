// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "casaug/encoder.hpp"
#include "casaug/params.hpp"
#include "casaug/tensor.hpp"

namespace casaug {

/// Inclusive token span.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

struct SubjectTaggerParams {
  Tensor w_start, b_start, w_end, b_end;  // [D], [1], [D], [1]

  static SubjectTaggerParams init(std::size_t dim, Initializer& init) {
    const double s = 1.0 / std::sqrt(static_cast<double>(dim));
    return {init.normal({dim}, s), init.zeros({1}), init.normal({dim}, s),
            init.zeros({1})};
  }
  void append_named(NamedParams& out) const {
    out.emplace_back("subject.w_start", w_start);
    out.emplace_back("subject.b_start", b_start);
    out.emplace_back("subject.w_end", w_end);
    out.emplace_back("subject.b_end", b_end);
  }
};

struct SubjectScores {
  Tensor start_probs;  // [N]
  Tensor end_probs;    // [N]
};

struct SubjectSpan {
  Span span;
  Tensor v_sub;  // [D], mean of the span's context rows
  std::string surface;
};

inline SubjectScores score_subject_positions(const EncodedSentence& enc,
                                             const SubjectTaggerParams& params) {
  if (enc.length() == 0) throw ContractError("score_subject_positions: empty sentence");
  if (enc.h.cols() != params.w_start.size()) {
    throw ContractError("score_subject_positions: encoder dim " +
                        std::to_string(enc.h.cols()) + " vs tagger dim " +
                        std::to_string(params.w_start.size()));
  }
  return {sigmoid(add(matmul(enc.h, params.w_start), params.b_start)),
          sigmoid(add(matmul(enc.h, params.w_end), params.b_end))};
}

/// Pairs fired starts with fired ends. A start at s takes the nearest end
/// e >= s that lies before the next fired start; starts with no such end are
/// dropped. Firing means probability strictly above `threshold`.
inline std::vector<Span> decode_spans(std::span<const double> start_probs,
                                      std::span<const double> end_probs,
                                      double threshold) {
  const std::size_t n = std::min(start_probs.size(), end_probs.size());
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < n; ++i)
    if (start_probs[i] > threshold) starts.push_back(i);
  std::vector<Span> spans;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const std::size_t limit = k + 1 < starts.size() ? starts[k + 1] : n;
    for (std::size_t e = starts[k]; e < limit; ++e) {
      if (end_probs[e] > threshold) {
        spans.push_back({starts[k], e});
        break;
      }
    }
  }
  return spans;
}

inline std::vector<Span> decode_subject_spans(const SubjectScores& scores,
                                              double threshold = 0.5) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ContractError("decode_subject_spans: threshold must lie in (0,1)");
  }
  return decode_spans(scores.start_probs.data(), scores.end_probs.data(), threshold);
}

inline Tensor subject_vector(const EncodedSentence& enc, Span span) {
  return mean_rows(enc.h, span.start, span.end);
}

inline SubjectSpan make_subject(const EncodedSentence& enc, Span span) {
  return {span, subject_vector(enc, span), join_tokens(enc.tokens, span.start, span.end)};
}

}  // namespace casaug
