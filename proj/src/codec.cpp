#include "dpd/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace dpd {

namespace {

// JPEG-style zigzag traversal of the (u,v) frequency grid: diagonals of
// increasing u+v, alternating direction.
std::vector<std::pair<std::size_t, std::size_t>> zigzag_order(std::size_t h, std::size_t w) {
  std::vector<std::pair<std::size_t, std::size_t>> order;
  order.reserve(h * w);
  for (std::size_t s = 0; s + 1 < h + w + 1; ++s) {
    if (s % 2 == 0) {
      // walk up-right: start at highest valid u
      std::size_t u = std::min(s, h - 1);
      std::size_t v = s - u;
      while (v < w) {
        order.emplace_back(u, v);
        if (u == 0) break;
        --u;
        ++v;
      }
    } else {
      std::size_t v = std::min(s, w - 1);
      std::size_t u = s - v;
      while (u < h) {
        order.emplace_back(u, v);
        if (v == 0) break;
        --v;
        ++u;
      }
    }
  }
  return order;
}

double dct_basis(std::size_t freq, std::size_t i, std::size_t n) {
  double c = freq == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                       : std::sqrt(2.0 / static_cast<double>(n));
  return c * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) *
                      static_cast<double>(freq) / static_cast<double>(n));
}

}  // namespace

Codec::Codec(CodecConfig cfg) : cfg_(cfg) {
  std::size_t hw = cfg_.height * cfg_.width;
  if (cfg_.latent_dim == 0 || cfg_.latent_dim > hw)
    throw std::invalid_argument("Codec: latent_dim must be in [1, H*W]");
  auto order = zigzag_order(cfg_.height, cfg_.width);
  basis_.assign(cfg_.latent_dim * hw, 0.0);
  for (std::size_t k = 0; k < cfg_.latent_dim; ++k) {
    auto [u, v] = order[k];
    for (std::size_t i = 0; i < cfg_.height; ++i) {
      double bu = dct_basis(u, i, cfg_.height);
      for (std::size_t j = 0; j < cfg_.width; ++j) {
        basis_[k * hw + i * cfg_.width + j] = bu * dct_basis(v, j, cfg_.width);
      }
    }
  }
}

LatentVector Codec::encode(const std::vector<double>& pixels) const {
  std::size_t hw = pixel_count();
  if (pixels.size() != hw) {
    std::ostringstream os;
    os << "Codec::encode: expected " << hw << " pixels, got " << pixels.size();
    throw std::invalid_argument(os.str());
  }
  LatentVector z(cfg_.latent_dim, 0.0);
  for (std::size_t k = 0; k < cfg_.latent_dim; ++k) {
    const double* row = basis_.data() + k * hw;
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += row[i] * pixels[i];
    z[k] = s;
  }
  return z;
}

std::vector<double> Codec::decode_raw(const LatentVector& z) const {
  if (z.size() != cfg_.latent_dim) {
    std::ostringstream os;
    os << "Codec::decode: expected latent of length " << cfg_.latent_dim << ", got " << z.size();
    throw std::invalid_argument(os.str());
  }
  std::size_t hw = pixel_count();
  std::vector<double> pixels(hw, 0.0);
  for (std::size_t k = 0; k < cfg_.latent_dim; ++k) {
    const double* row = basis_.data() + k * hw;
    double zk = z[k];
    if (zk == 0.0) continue;
    for (std::size_t i = 0; i < hw; ++i) pixels[i] += zk * row[i];
  }
  return pixels;
}

std::vector<double> Codec::decode(const LatentVector& z) const {
  std::vector<double> pixels = decode_raw(z);
  for (double& p : pixels) p = std::clamp(p, 0.0, 1.0);
  return pixels;
}

Tape::Id Codec::decode_on_tape(Tape& tape, Tape::Id z_batch) const {
  std::size_t hw = pixel_count();
  Tape::Id basis = tape.constant(Tensor({cfg_.latent_dim, hw}, basis_));
  const Tensor& z = tape.value(z_batch);
  Tape::Id z2 = z.rank() == 1 ? tape.reshape(z_batch, {1, z.size()}) : z_batch;
  if (tape.value(z2).cols() != cfg_.latent_dim)
    throw std::invalid_argument("Codec::decode_on_tape: latent dimension mismatch");
  Tape::Id raw = tape.matmul(z2, basis);
  return tape.clamp01_st(raw);
}

}  // namespace dpd
