// SPDX-License-Identifier: Apache-2.0
//
// Tokenizer, token vocabulary and the trainable context encoder producing the
// per-token matrix consumed by both taggers.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "casaug/errors.hpp"
#include "casaug/params.hpp"
#include "casaug/tensor.hpp"

namespace casaug {

/// Whitespace split, ASCII-lowercased, surrounding punctuation stripped.
/// Pieces that are pure punctuation vanish.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && std::ispunct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      std::string tok(text.substr(b, e - b));
      for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      tokens.push_back(std::move(tok));
    }
    i = j;
  }
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens,
                               std::size_t first, std::size_t last) {
  std::string out;
  for (std::size_t i = first; i <= last && i < tokens.size(); ++i) {
    if (i > first) out += ' ';
    out += tokens[i];
  }
  return out;
}

/// Canonical surface form used for matching entity strings.
inline std::string normalize_surface(std::string_view text) {
  const auto toks = tokenize(text);
  return toks.empty() ? std::string() : join_tokens(toks, 0, toks.size() - 1);
}

class TokenVocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnknown = 1;

  TokenVocabulary() : tokens_{"<pad>", "<unk>"} {}

  /// Rebuilds from an id-ordered token list whose first two entries are the
  /// reserved tokens.
  static TokenVocabulary from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 2) throw InputError("vocabulary lacks reserved entries");
    TokenVocabulary v;
    v.tokens_ = std::move(tokens);
    for (std::size_t id = 2; id < v.tokens_.size(); ++id) {
      if (!v.index_.emplace(v.tokens_[id], id).second) {
        throw InputError("duplicate vocabulary token '" + v.tokens_[id] + "'");
      }
    }
    return v;
  }

  std::size_t add(const std::string& token) {
    auto [it, inserted] = index_.emplace(token, tokens_.size());
    if (inserted) tokens_.push_back(token);
    return it->second;
  }
  std::size_t id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnknown : it->second;
  }
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Ids ordered by descending frequency, then lexicographically.
inline TokenVocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                                        std::size_t min_count = 1) {
  if (corpus.empty()) throw InputError("build_vocabulary: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus)
    for (const auto& tok : sentence) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  TokenVocabulary vocab;
  for (const auto& [tok, n] : ranked)
    if (n >= min_count) vocab.add(tok);
  return vocab;
}

inline TokenVocabulary build_vocabulary(const std::vector<std::string>& sentences,
                                        std::size_t min_count = 1) {
  if (sentences.empty()) throw InputError("build_vocabulary: empty corpus");
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(sentences.size());
  for (const auto& s : sentences) tokenized.push_back(tokenize(s));
  return build_vocabulary(tokenized, min_count);
}

struct EncoderConfig {
  std::size_t dim = 48;
  std::size_t context_layers = 2;
  std::size_t max_len = 64;

  void validate() const {
    if (dim < 2) throw ConfigError("encoder dim must be >= 2");
    if (max_len < 1) throw ConfigError("encoder max_len must be >= 1");
  }
};

struct EncodedSentence {
  std::vector<std::string> tokens;
  std::vector<std::size_t> ids;
  Tensor h;  // [N, D]; row i is the context vector of token i
  bool truncated = false;

  std::size_t length() const { return tokens.size(); }
};

/// Offsets beyond this distance share one relative-position bias.
inline constexpr std::size_t kRelativeWindow = 4;

/// One single-head self-attention mixer with residual:
///   h <- h + softmax(Q K^T / sqrt(D) + B) V,  Q,K,V = h Wq, h Wk, h Wv
/// where B[i][j] is a learned bias for the clipped offset j - i.
struct AttentionLayerParams {
  Tensor wq, wk, wv;  // [D, D]
  Tensor rel_bias;    // [2 * kRelativeWindow + 1]
};

struct EncoderParams {
  Tensor embedding;  // [V, D]
  std::vector<AttentionLayerParams> layers;

  static EncoderParams init(const EncoderConfig& cfg, std::size_t vocab_size,
                            Initializer& init) {
    cfg.validate();
    EncoderParams p;
    const double d = static_cast<double>(cfg.dim);
    p.embedding = init.normal({vocab_size, cfg.dim}, 1.0 / std::sqrt(d));
    for (std::size_t l = 0; l < cfg.context_layers; ++l) {
      AttentionLayerParams layer;
      layer.wq = init.normal({cfg.dim, cfg.dim}, 1.0 / std::sqrt(d));
      layer.wk = init.normal({cfg.dim, cfg.dim}, 1.0 / std::sqrt(d));
      layer.wv = init.normal({cfg.dim, cfg.dim}, 1.0 / std::sqrt(d));
      layer.rel_bias = init.zeros({2 * kRelativeWindow + 1});
      p.layers.push_back(std::move(layer));
    }
    return p;
  }

  std::size_t dim() const { return embedding.shape()[1]; }

  void append_named(NamedParams& out) const {
    out.emplace_back("encoder.embedding", embedding);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string prefix = "encoder.layer" + std::to_string(l) + ".";
      out.emplace_back(prefix + "wq", layers[l].wq);
      out.emplace_back(prefix + "wk", layers[l].wk);
      out.emplace_back(prefix + "wv", layers[l].wv);
      out.emplace_back(prefix + "rel_bias", layers[l].rel_bias);
    }
  }
};

inline std::vector<std::size_t> relative_offsets(std::size_t n) {
  const auto w = static_cast<std::ptrdiff_t>(kRelativeWindow);
  std::vector<std::size_t> idx(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const auto off = std::clamp(static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(i), -w, w);
      idx[i * n + j] = static_cast<std::size_t>(off + w);
    }
  return idx;
}

inline Tensor context_mix(const Tensor& x, const EncoderParams& params) {
  const std::size_t n = x.rows();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.dim()));
  Tensor h = x;
  for (const auto& layer : params.layers) {
    const Tensor q = matmul(h, layer.wq);
    const Tensor k = matmul(h, layer.wk);
    const Tensor v = matmul(h, layer.wv);
    const Tensor bias = gather(layer.rel_bias, relative_offsets(n), {n, n});
    const Tensor attn = softmax(add(scale(matmul(q, transpose(k)), inv_sqrt_d), bias));
    h = add(h, matmul(attn, v));
  }
  return h;
}

/// Encodes pre-tokenized text. Longer inputs are cut at max_len and flagged.
inline EncodedSentence encode_tokens(std::vector<std::string> tokens,
                                     const TokenVocabulary& vocab,
                                     const EncoderConfig& cfg,
                                     const EncoderParams& params) {
  if (tokens.empty()) throw InputError("encode: sentence has no tokens");
  EncodedSentence enc;
  if (tokens.size() > cfg.max_len) {
    tokens.resize(cfg.max_len);
    enc.truncated = true;
  }
  enc.ids.reserve(tokens.size());
  for (const auto& t : tokens) enc.ids.push_back(vocab.id(t));
  enc.tokens = std::move(tokens);
  enc.h = context_mix(gather_rows(params.embedding, enc.ids), params);
  return enc;
}

inline EncodedSentence encode(std::string_view sentence, const TokenVocabulary& vocab,
                              const EncoderConfig& cfg, const EncoderParams& params) {
  return encode_tokens(tokenize(sentence), vocab, cfg, params);
}

}  // namespace casaug
