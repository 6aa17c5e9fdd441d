// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "casaug/corpus.hpp"

namespace casaug::testing {

inline AnnotatedSentence sentence(std::string text, std::vector<RelationTriple> triples) {
  auto s = annotate(std::move(text), std::move(triples));
  if (!s) throw std::runtime_error("fixture sentence failed to align");
  return *s;
}

inline RelationSchema memo_schema() {
  return RelationSchema({"born_in", "founded", "lives_in", "works_for"});
}

// Five sentences: one EPO (Bram), one SEO (Cora), one with two unrelated
// triples and two singletons.
inline std::vector<AnnotatedSentence> memo_fixture() {
  return {
      sentence("Ada Lind was born in Oslo .", {{"Ada Lind", 0, "Oslo"}}),
      sentence("Bram lives in and works for Kest .", {{"Bram", 2, "Kest"}, {"Bram", 3, "Kest"}}),
      sentence("Cora founded Vell and lives in Rome .", {{"Cora", 1, "Vell"}, {"Cora", 2, "Rome"}}),
      sentence("Dov works for Tarn .", {{"Dov", 3, "Tarn"}}),
      sentence("Eli founded Moss while Fay lives in Oslo .",
               {{"Eli", 1, "Moss"}, {"Fay", 2, "Oslo"}}),
  };
}

// Six hand-built sentences for the overlap classes. Expected flags
// (normal, epo, seo) are listed beside each one.
struct OverlapCase {
  AnnotatedSentence sentence;
  bool normal, epo, seo;
};

inline std::vector<OverlapCase> overlap_fixture() {
  return {
      {sentence("Ada was born in Oslo .", {{"Ada", 0, "Oslo"}}), true, false, false},
      {sentence("Bram lives in and works for Kest .", {{"Bram", 2, "Kest"}, {"Bram", 3, "Kest"}}),
       false, true, false},
      {sentence("Cora founded Vell and lives in Rome .", {{"Cora", 1, "Vell"}, {"Cora", 2, "Rome"}}),
       false, false, true},
      {sentence("Eli founded Moss while Fay lives in Oslo .", {{"Eli", 1, "Moss"}, {"Fay", 2, "Oslo"}}),
       true, false, false},
      // Gil/Hal share Lund (SEO) and Gil-Lund carries two relations (EPO)
      {sentence("Gil lives in and works for Lund and Hal was born in Lund .",
                {{"Gil", 2, "Lund"}, {"Gil", 3, "Lund"}, {"Hal", 0, "Lund"}}),
       false, true, true},
      // reversed pair counts as the same entity pair
      {sentence("Ivo founded Juno and Juno works for Ivo .", {{"Ivo", 1, "Juno"}, {"Juno", 3, "Ivo"}}),
       false, true, false},
  };
}

}  // namespace casaug::testing
