#include "dpd/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dpd/rng.hpp"

namespace dpd {

namespace {

const char* kTextureTokens[] = {"tex-horizontal", "tex-vertical", "tex-mixed"};
const char* kScaleTokens[] = {"scale-coarse", "scale-medium", "scale-fine"};
const char* kBrightnessTokens[] = {"dark", "dim", "bright", "vivid"};
const char* kQuadrantTokens[] = {"top-left", "top-right", "bottom-left", "bottom-right"};

}  // namespace

Vocabulary::Vocabulary(VocabularyConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.class_names.empty()) throw std::invalid_argument("Vocabulary: no class names");
  for (const auto& name : cfg_.class_names) tokens_.push_back("class:" + name);
  for (const char* t : kTextureTokens) tokens_.push_back(t);
  for (const char* t : kScaleTokens) tokens_.push_back(t);
  for (const char* t : kBrightnessTokens) tokens_.push_back(t);
  for (const char* t : kQuadrantTokens) tokens_.push_back(t);
  if (tokens_.size() > 64) throw std::invalid_argument("Vocabulary: token count exceeds 64");

  // Seeded Gaussian table, one column per token, column-normalized and
  // frozen thereafter.
  auto rng = make_rng(cfg_.seed, "vocab-embedding");
  std::normal_distribution<double> gauss(0.0, 1.0);
  table_.resize(cfg_.embed_dim * tokens_.size());
  for (std::size_t j = 0; j < tokens_.size(); ++j) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < cfg_.embed_dim; ++i) {
      double v = gauss(rng);
      table_[i * tokens_.size() + j] = v;
      norm2 += v * v;
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t i = 0; i < cfg_.embed_dim; ++i) table_[i * tokens_.size() + j] *= inv;
  }
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = std::find(tokens_.begin(), tokens_.end(), token);
  if (it == tokens_.end()) throw std::invalid_argument("Vocabulary: unknown token " + token);
  return static_cast<std::size_t>(it - tokens_.begin());
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) throw std::invalid_argument("Vocabulary: token id out of range");
  return tokens_[id];
}

bool Vocabulary::has(const std::string& token) const {
  return std::find(tokens_.begin(), tokens_.end(), token) != tokens_.end();
}

std::size_t Vocabulary::class_token(std::size_t cls) const {
  if (cls >= cfg_.class_names.size())
    throw std::invalid_argument("Vocabulary: class index out of range");
  return cls;
}

std::vector<double> Vocabulary::embedding(std::size_t id) const {
  if (id >= tokens_.size()) throw std::invalid_argument("Vocabulary: token id out of range");
  std::vector<double> col(cfg_.embed_dim);
  for (std::size_t i = 0; i < cfg_.embed_dim; ++i) col[i] = table_[i * tokens_.size() + id];
  return col;
}

std::string Vocabulary::dump_json() const {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (i) os << ",";
    os << "\"" << tokens_[i] << "\":" << i;
  }
  os << "}";
  return os.str();
}

Caption caption_image(const ImageSample& x, const std::string& class_name, const Vocabulary& vocab,
                      std::size_t height, std::size_t width) {
  if (x.pixels.size() != height * width)
    throw std::invalid_argument("caption_image: pixel grid does not match configured size");
  std::string class_tok = "class:" + class_name;
  if (!vocab.has(class_tok))
    throw std::invalid_argument("caption_image: unknown class name " + class_name);

  // Texture mode: compare horizontal vs vertical gradient energy.
  double eh = 0.0, ev = 0.0;
  for (std::size_t i = 0; i < height; ++i)
    for (std::size_t j = 0; j + 1 < width; ++j)
      eh += std::abs(x.pixels[i * width + j + 1] - x.pixels[i * width + j]);
  for (std::size_t i = 0; i + 1 < height; ++i)
    for (std::size_t j = 0; j < width; ++j)
      ev += std::abs(x.pixels[(i + 1) * width + j] - x.pixels[i * width + j]);
  const char* tex = "tex-mixed";
  if (eh > 1.5 * ev)
    tex = "tex-horizontal";
  else if (ev > 1.5 * eh)
    tex = "tex-vertical";

  // Texture scale: mean absolute gradient relative to pixel spread is a
  // contrast-free spatial-frequency proxy that tells sub-modes apart.
  double mean = 0.0;
  for (double p : x.pixels) mean += p;
  mean /= static_cast<double>(x.pixels.size());
  double var = 0.0;
  for (double p : x.pixels) var += (p - mean) * (p - mean);
  double sd = std::sqrt(var / static_cast<double>(x.pixels.size()));
  double freq = (eh + ev) / static_cast<double>(height * width) / (sd + 1e-12);
  const char* scale = "scale-coarse";
  if (freq >= 1.95)
    scale = "scale-fine";
  else if (freq >= 1.55)
    scale = "scale-medium";

  // Brightness quartile of the mean pixel.
  std::size_t bucket = std::min<std::size_t>(3, static_cast<std::size_t>(mean * 4.0));

  // Dominant quadrant by pixel mass; ties break to the lowest index.
  double quad[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < height; ++i)
    for (std::size_t j = 0; j < width; ++j) {
      std::size_t q = (i >= height / 2 ? 2 : 0) + (j >= width / 2 ? 1 : 0);
      quad[q] += x.pixels[i * width + j];
    }
  std::size_t best_q = 0;
  for (std::size_t q = 1; q < 4; ++q)
    if (quad[q] > quad[best_q]) best_q = q;

  Caption cap;
  cap.tokens = {vocab.id(class_tok), vocab.id(tex), vocab.id(scale),
                vocab.id(kBrightnessTokens[bucket]), vocab.id(kQuadrantTokens[best_q])};
  return cap;
}

Caption aggregate(const std::vector<Caption>& captions, double keep_ratio, std::size_t cap) {
  if (captions.empty()) throw std::invalid_argument("aggregate: empty caption list");
  if (!(keep_ratio > 0.0) || keep_ratio > 1.0)
    throw std::invalid_argument("aggregate: keep_ratio must be in (0,1]");
  if (cap < 1) throw std::invalid_argument("aggregate: cap must be >= 1");
  for (const Caption& c : captions)
    if (c.tokens.empty()) throw std::invalid_argument("aggregate: empty caption in list");

  std::size_t class_token = captions.front().tokens.front();
  std::map<std::size_t, std::size_t> counts;
  for (const Caption& c : captions)
    for (std::size_t tok : c.tokens) counts[tok]++;

  double n = static_cast<double>(captions.size());
  // (frequency, id): sort by frequency descending, ties by ascending id.
  std::vector<std::pair<double, std::size_t>> kept;
  for (const auto& [tok, cnt] : counts) {
    if (tok == class_token) continue;
    double freq = static_cast<double>(cnt) / n;
    if (freq >= keep_ratio) kept.emplace_back(freq, tok);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  Caption out;
  out.tokens.push_back(class_token);
  for (const auto& [freq, tok] : kept) {
    if (out.tokens.size() >= cap) break;
    out.tokens.push_back(tok);
  }
  return out;
}

TextEmbedding embed(const Caption& caption, const Vocabulary& vocab) {
  if (caption.tokens.empty()) throw std::invalid_argument("embed: empty caption");
  std::size_t m = vocab.embed_dim();
  TextEmbedding e(m, 0.0);
  for (std::size_t tok : caption.tokens) {
    std::vector<double> col = vocab.embedding(tok);
    for (std::size_t i = 0; i < m; ++i) e[i] += col[i];
  }
  double norm2 = 0.0;
  for (double v : e) norm2 += v * v;
  if (norm2 == 0.0) throw std::runtime_error("embed: zero-norm embedding");
  double inv = 1.0 / std::sqrt(norm2);
  for (double& v : e) v *= inv;
  return e;
}

}  // namespace dpd
