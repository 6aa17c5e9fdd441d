// SPDX-License-Identifier: Apache-2.0
//
// Corpus model, NDJSON ingestion with entity alignment, overlap categories,
// triple-count buckets and the synthetic template corpus.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "casaug/encoder.hpp"
#include "casaug/errors.hpp"
#include "casaug/subject_tagger.hpp"

namespace casaug {

class RelationSchema {
 public:
  RelationSchema() = default;
  explicit RelationSchema(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (!index_.emplace(names_[i], i).second) {
        throw ConfigError("duplicate relation name '" + names_[i] + "'");
      }
    }
  }

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t id) const { return names_.at(id); }
  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const RelationSchema& a, const RelationSchema& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct RelationTriple {
  std::string subject;
  std::size_t relation = 0;
  std::string object;

  friend bool operator==(const RelationTriple&, const RelationTriple&) = default;
  friend auto operator<=>(const RelationTriple&, const RelationTriple&) = default;
};

struct AnnotatedSentence {
  std::string text;
  std::vector<std::string> tokens;
  std::vector<RelationTriple> triples;
  // aligned token ranges, parallel to `triples`
  std::vector<Span> subject_spans;
  std::vector<Span> object_spans;

  friend bool operator==(const AnnotatedSentence&, const AnnotatedSentence&) = default;
};

/// First occurrence of the entity's token sequence in `tokens`.
inline std::optional<Span> align_entity(const std::vector<std::string>& tokens,
                                        std::string_view entity) {
  const auto needle = tokenize(entity);
  if (needle.empty() || needle.size() > tokens.size()) return std::nullopt;
  for (std::size_t i = 0; i + needle.size() <= tokens.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
      return Span{i, i + needle.size() - 1};
    }
  }
  return std::nullopt;
}

/// Tokenizes `text` and aligns every triple; std::nullopt plus `reason` when
/// some entity cannot be found.
inline std::optional<AnnotatedSentence> annotate(std::string text,
                                                 std::vector<RelationTriple> triples,
                                                 std::string* reason = nullptr) {
  AnnotatedSentence s;
  s.tokens = tokenize(text);
  s.text = std::move(text);
  for (const auto& t : triples) {
    auto subj = align_entity(s.tokens, t.subject);
    auto obj = align_entity(s.tokens, t.object);
    if (!subj || !obj) {
      if (reason) {
        *reason = "entity '" + (subj ? t.object : t.subject) + "' not found in text";
      }
      return std::nullopt;
    }
    s.subject_spans.push_back(*subj);
    s.object_spans.push_back(*obj);
  }
  s.triples = std::move(triples);
  return s;
}

struct LoadIssue {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct Dataset {
  std::vector<AnnotatedSentence> sentences;
  RelationSchema schema;
  std::vector<LoadIssue> dropped;  // well-formed lines that could not be aligned
  std::vector<LoadIssue> errors;   // malformed lines
};

inline RelationSchema read_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
    return RelationSchema(j.get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError("schema file '" + path + "': " + e.what());
  }
}

inline void write_schema(const std::string& path, const RelationSchema& schema) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write schema file '" + path + "'");
  out << nlohmann::json(schema.names()).dump() << '\n';
}

/// Parses NDJSON lines {text, triples:[{subject, relation, object}]}. With no
/// schema, relations are the sorted set of observed names.
inline Dataset parse_dataset(std::istream& in,
                             const std::optional<RelationSchema>& schema = std::nullopt) {
  struct RawLine {
    std::size_t line;
    std::string text;
    std::vector<std::array<std::string, 3>> triples;
  };
  Dataset ds;
  std::vector<RawLine> raw;
  std::set<std::string> observed;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      RawLine r{line_no, j.at("text").get<std::string>(), {}};
      for (const auto& t : j.at("triples")) {
        r.triples.push_back({t.at("subject").get<std::string>(),
                             t.at("relation").get<std::string>(),
                             t.at("object").get<std::string>()});
        observed.insert(r.triples.back()[1]);
      }
      raw.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      ds.errors.push_back({line_no, std::string("malformed line: ") + e.what()});
    }
  }
  ds.schema = schema ? *schema
                     : RelationSchema(std::vector<std::string>(observed.begin(), observed.end()));
  for (auto& r : raw) {
    std::vector<RelationTriple> triples;
    std::string reason;
    for (const auto& t : r.triples) {
      auto id = ds.schema.find(t[1]);
      if (!id) {
        reason = "relation '" + t[1] + "' not in schema";
        break;
      }
      triples.push_back({t[0], *id, t[2]});
    }
    if (!reason.empty()) {
      ds.dropped.push_back({r.line, reason});
      continue;
    }
    auto s = annotate(std::move(r.text), std::move(triples), &reason);
    if (!s) {
      ds.dropped.push_back({r.line, reason});
      continue;
    }
    ds.sentences.push_back(std::move(*s));
  }
  return ds;
}

inline Dataset load_dataset(const std::string& path,
                            const std::optional<RelationSchema>& schema = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file '" + path + "'");
  return parse_dataset(in, schema);
}

inline nlohmann::json sentence_to_json(const AnnotatedSentence& s,
                                       const RelationSchema& schema) {
  nlohmann::json triples = nlohmann::json::array();
  for (const auto& t : s.triples) {
    triples.push_back({{"subject", t.subject},
                       {"relation", schema.name(t.relation)},
                       {"object", t.object}});
  }
  return {{"text", s.text}, {"triples", triples}};
}

inline void write_dataset(std::ostream& out, const std::vector<AnnotatedSentence>& sentences,
                          const RelationSchema& schema) {
  for (const auto& s : sentences) out << sentence_to_json(s, schema).dump() << '\n';
}

inline void write_dataset(const std::string& path,
                          const std::vector<AnnotatedSentence>& sentences,
                          const RelationSchema& schema) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write corpus file '" + path + "'");
  write_dataset(out, sentences, schema);
}

// ---------------------------------------------------------------------------
// Overlap categories

struct OverlapFlags {
  bool normal = true;
  bool epo = false;
  bool seo = false;

  friend bool operator==(const OverlapFlags&, const OverlapFlags&) = default;
};

/// EPO: two distinct triples over the same unordered entity pair.
/// SEO: two distinct triples sharing exactly one entity.
inline OverlapFlags classify_overlap(const AnnotatedSentence& s) {
  OverlapFlags f;
  f.normal = false;
  const std::size_t n = s.triples.size();
  std::vector<std::pair<std::string, std::string>> ents;
  ents.reserve(n);
  for (const auto& t : s.triples)
    ents.emplace_back(normalize_surface(t.subject), normalize_surface(t.object));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = ents[i];
      const auto& b = ents[j];
      if (a == b && s.triples[i].relation == s.triples[j].relation) continue;
      std::set<std::string> ea{a.first, a.second};
      std::set<std::string> eb{b.first, b.second};
      std::size_t shared = 0;
      for (const auto& e : ea) shared += eb.count(e);
      if (ea == eb) {
        f.epo = true;
      } else if (shared == 1) {
        f.seo = true;
      }
    }
  }
  f.normal = !f.epo && !f.seo;
  return f;
}

/// Bucket key for a sentence: its triple count, with every count >= 5 in 5.
inline std::size_t triple_count_bucket(const AnnotatedSentence& s) {
  return std::min<std::size_t>(s.triples.size(), 5);
}

inline std::string bucket_label(std::size_t bucket) {
  return bucket >= 5 ? std::string("5+") : std::to_string(bucket);
}

inline std::map<std::size_t, std::vector<std::size_t>> bucket_by_triple_count(
    const std::vector<AnnotatedSentence>& sentences) {
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < sentences.size(); ++i)
    buckets[triple_count_bucket(sentences[i])].push_back(i);
  return buckets;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct OverlapMix {
  double normal = 0.5;
  double epo = 0.25;
  double seo = 0.25;
};

struct SyntheticConfig {
  std::size_t num_rel = 4;
  std::size_t vocab_size = 200;
  std::size_t sentences = 500;
  OverlapMix overlap_mix;
  std::uint64_t seed = 7;
  /// Selects an independent sentence stream over the same entity inventory
  /// (train/dev/test splits use streams 0/1/2).
  std::uint64_t stream = 0;

  void validate() const {
    const double total = overlap_mix.normal + overlap_mix.epo + overlap_mix.seo;
    if (overlap_mix.normal < 0 || overlap_mix.epo < 0 || overlap_mix.seo < 0 ||
        std::abs(total - 1.0) > 1e-9) {
      throw ConfigError("overlap mix must be non-negative and sum to 1, got " +
                        std::to_string(total));
    }
    if (num_rel < 2 && overlap_mix.epo > 0) {
      throw ConfigError("EPO sentences need at least two relations");
    }
    if (num_rel < 1) throw ConfigError("num_rel must be >= 1");
    if (vocab_size < 20 * num_rel) {
      throw ConfigError("vocab_size must be at least 20 * num_rel");
    }
  }
};

struct SyntheticCorpus {
  RelationSchema schema;
  std::vector<AnnotatedSentence> sentences;
};

namespace detail {

inline std::vector<std::string> pseudo_words(std::size_t count, std::mt19937_64& rng) {
  static constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                                 "p", "r", "s", "t", "v", "z", "br", "st"};
  static constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  static const std::set<std::string> kReserved = {"and", "also", "the", "of", "while",
                                                  "then", "reportedly", "said"};
  std::set<std::string> seen;
  std::vector<std::string> words;
  std::uniform_int_distribution<std::size_t> onset(0, std::size(kOnsets) - 1);
  std::uniform_int_distribution<std::size_t> vowel(0, std::size(kVowels) - 1);
  std::uniform_int_distribution<int> syllables(2, 3);
  while (words.size() < count) {
    std::string w;
    const int k = syllables(rng);
    for (int i = 0; i < k; ++i) {
      w += kOnsets[onset(rng)];
      w += kVowels[vowel(rng)];
    }
    if (kReserved.count(w) || !seen.insert(w).second) continue;
    words.push_back(std::move(w));
  }
  return words;
}

inline std::string capitalize(std::string s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i == 0 || s[i - 1] == ' ') s[i] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[i])));
  }
  return s;
}

}  // namespace detail

/// Template-grammar corpus: "S <trigger_r> O" clauses whose relation is
/// signalled by per-relation trigger words. Subjects come from per-relation
/// name pools; objects from a shared pool. Sentence categories follow the
/// configured mix exactly (counts rounded, remainder to Normal).
inline SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 inventory_rng(cfg.seed);
  const std::size_t R = cfg.num_rel;
  const std::size_t fillers = std::max<std::size_t>(8, cfg.vocab_size / 5);
  auto words = detail::pseudo_words(cfg.vocab_size, inventory_rng);
  std::size_t cursor = 0;
  auto take = [&](std::size_t n) {
    std::vector<std::string> out(words.begin() + static_cast<std::ptrdiff_t>(cursor),
                                 words.begin() + static_cast<std::ptrdiff_t>(cursor + n));
    cursor += n;
    return out;
  };

  SyntheticCorpus corpus;
  std::vector<std::string> rel_names;
  std::vector<std::vector<std::string>> triggers;
  for (std::size_t r = 0; r < R; ++r) {
    auto t = take(2);
    rel_names.push_back("rel_" + t[0]);
    triggers.push_back(std::move(t));
  }
  const auto filler_words = take(fillers);
  const std::size_t remaining = words.size() - cursor;
  const std::size_t subject_words = remaining * 55 / 100;
  auto subj_pool = take(subject_words);
  auto obj_pool = take(words.size() - cursor);

  // Entities: roughly every fourth entity is a two-word name.
  auto make_entities = [&](const std::vector<std::string>& pool) {
    std::vector<std::string> ents;
    std::size_t i = 0;
    while (i < pool.size()) {
      if (i % 4 == 3 && i + 1 < pool.size()) {
        ents.push_back(detail::capitalize(pool[i] + " " + pool[i + 1]));
        i += 2;
      } else {
        ents.push_back(detail::capitalize(pool[i]));
        i += 1;
      }
    }
    return ents;
  };
  const auto all_subjects = make_entities(subj_pool);
  const auto objects = make_entities(obj_pool);
  std::vector<std::vector<std::string>> subjects(R);
  for (std::size_t i = 0; i < all_subjects.size(); ++i) subjects[i % R].push_back(all_subjects[i]);

  std::vector<std::string> sorted_names = rel_names;
  std::sort(sorted_names.begin(), sorted_names.end());
  corpus.schema = RelationSchema(sorted_names);
  std::vector<std::size_t> rel_id(R);
  for (std::size_t r = 0; r < R; ++r) rel_id[r] = *corpus.schema.find(rel_names[r]);

  std::mt19937_64 rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * (cfg.stream + 1)));
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  auto pick_distinct = [&](const std::vector<std::string>& v, std::set<std::string>& used) {
    for (;;) {
      const auto& s = pick(v);
      if (used.insert(s).second) return s;
    }
  };
  auto pick_rel = [&] { return std::uniform_int_distribution<std::size_t>(0, R - 1)(rng); };
  auto pick_other_rel = [&](std::size_t r) {
    std::size_t o = std::uniform_int_distribution<std::size_t>(0, R - 2)(rng);
    return o >= r ? o + 1 : o;
  };
  auto trig = [&](std::size_t r) { return pick(triggers[r]); };
  auto pad = [&](std::vector<std::string>& toks, std::size_t max_words) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, max_words)(rng);
    for (std::size_t i = 0; i < k; ++i) toks.push_back(pick(filler_words));
  };

  enum class Kind { Normal, Epo, Seo };
  const auto n_epo = static_cast<std::size_t>(std::llround(cfg.overlap_mix.epo * static_cast<double>(cfg.sentences)));
  const auto n_seo = static_cast<std::size_t>(std::llround(cfg.overlap_mix.seo * static_cast<double>(cfg.sentences)));
  std::vector<Kind> kinds(cfg.sentences, Kind::Normal);
  for (std::size_t i = 0; i < n_epo && i < kinds.size(); ++i) kinds[i] = Kind::Epo;
  for (std::size_t i = n_epo; i < n_epo + n_seo && i < kinds.size(); ++i) kinds[i] = Kind::Seo;
  std::shuffle(kinds.begin(), kinds.end(), rng);

  for (const Kind kind : kinds) {
    std::vector<std::string> toks;
    std::vector<RelationTriple> triples;
    std::set<std::string> used;
    pad(toks, 2);
    auto push = [&](const std::string& phrase) { toks.push_back(phrase); };
    const std::size_t r1 = pick_rel();
    const std::string s1 = pick_distinct(subjects[r1], used);
    if (kind == Kind::Normal) {
      const std::string o1 = pick_distinct(objects, used);
      push(s1), push(trig(r1)), push(o1);
      triples.push_back({s1, rel_id[r1], o1});
      if (R > 1 && std::bernoulli_distribution(0.4)(rng)) {
        // distinct relations: an additive subject offset cannot tell two
        // same-relation clauses apart
        const std::size_t r2 = pick_other_rel(r1);
        const std::string s2 = pick_distinct(subjects[r2], used);
        const std::string o2 = pick_distinct(objects, used);
        push("and"), push(s2), push(trig(r2)), push(o2);
        triples.push_back({s2, rel_id[r2], o2});
      }
    } else if (kind == Kind::Epo) {
      const std::size_t r2 = pick_other_rel(r1);
      const std::string o = pick_distinct(objects, used);
      push(s1), push(trig(r1)), push("and"), push(trig(r2)), push(o);
      triples.push_back({s1, rel_id[r1], o});
      triples.push_back({s1, rel_id[r2], o});
    } else if (std::bernoulli_distribution(0.5)(rng)) {
      // shared subject
      const std::size_t r2 = pick_other_rel(r1);
      const std::string o1 = pick_distinct(objects, used);
      const std::string o2 = pick_distinct(objects, used);
      push(s1), push(trig(r1)), push(o1), push("and"), push("also"), push(trig(r2)), push(o2);
      triples.push_back({s1, rel_id[r1], o1});
      triples.push_back({s1, rel_id[r2], o2});
    } else {
      // shared object
      const std::string s2 = pick_distinct(subjects[r1], used);
      const std::string o = pick_distinct(objects, used);
      push(s1), push("and"), push(s2), push(trig(r1)), push(o);
      triples.push_back({s1, rel_id[r1], o});
      triples.push_back({s2, rel_id[r1], o});
    }
    pad(toks, 2);
    std::string text;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) text += ' ';
      text += toks[i];
    }
    text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    text += '.';
    auto s = annotate(std::move(text), std::move(triples));
    if (!s) throw std::logic_error("synthetic sentence failed to align");
    corpus.sentences.push_back(std::move(*s));
  }
  return corpus;
}

}  // namespace casaug
