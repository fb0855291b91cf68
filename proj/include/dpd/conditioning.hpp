#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpd/codec.hpp"

namespace dpd {

// Ordered token ids from a fixed vocabulary; non-empty, length <= 8.
struct Caption {
  std::vector<std::size_t> tokens;
};

// Unit-norm text embedding vector.
using TextEmbedding = std::vector<double>;

struct VocabularyConfig {
  std::vector<std::string> class_names;
  std::size_t embed_dim = 32;
  std::uint64_t seed = 0;
};

// Fixed token<->id table plus a frozen embedding table generated once from
// the run seed. Token ids are laid out class tokens first, then texture,
// scale, brightness, and quadrant tokens, so captions emitted by
// caption_image are always in ascending id order.
class Vocabulary {
 public:
  explicit Vocabulary(VocabularyConfig cfg);

  std::size_t size() const { return tokens_.size(); }
  std::size_t embed_dim() const { return cfg_.embed_dim; }
  std::size_t class_count() const { return cfg_.class_names.size(); }

  std::size_t id(const std::string& token) const;
  const std::string& token(std::size_t id) const;
  bool has(const std::string& token) const;

  std::size_t class_token(std::size_t cls) const;

  // Column of the frozen embedding table (unit norm).
  std::vector<double> embedding(std::size_t id) const;

  // token<->id table as JSON text, for run-manifest audit.
  std::string dump_json() const;

 private:
  VocabularyConfig cfg_;
  std::vector<std::string> tokens_;
  std::vector<double> table_;  // embed_dim x |V|, column-normalized
};

// Deterministic pseudo-caption from measurable image attributes:
// [class token, texture-mode token, texture-scale token,
//  brightness-quartile token, dominant-quadrant token].
Caption caption_image(const ImageSample& x, const std::string& class_name, const Vocabulary& vocab,
                      std::size_t height, std::size_t width);

// Frequency-voting aggregation of a cluster's captions: tokens with
// within-cluster frequency >= keep_ratio, ordered by frequency descending
// (ties by ascending id), truncated to cap. The class token (tokens[0] of
// every input caption) is always retained first.
Caption aggregate(const std::vector<Caption>& captions, double keep_ratio, std::size_t cap);

// Mean of token embedding columns, L2-normalized.
TextEmbedding embed(const Caption& caption, const Vocabulary& vocab);

inline constexpr std::size_t kMaxCaptionLen = 8;

}  // namespace dpd
