#pragma once

#include <cstddef>
#include <vector>

#include "dpd/autodiff.hpp"
#include "dpd/diffusion.hpp"

namespace dpd {

// Grayscale image with class label; pixels are row-major H*W in [0,1].
struct ImageSample {
  std::vector<double> pixels;
  std::size_t label = 0;
};

struct CodecConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t latent_dim = 64;
};

// Frozen orthonormal 2-D DCT codec. encode keeps the latent_dim
// lowest-frequency coefficients in zigzag order; decode zero-fills the rest
// and inverts. Linear, exactly invertible on its range.
class Codec {
 public:
  explicit Codec(CodecConfig cfg);

  const CodecConfig& config() const { return cfg_; }
  std::size_t pixel_count() const { return cfg_.height * cfg_.width; }

  LatentVector encode(const std::vector<double>& pixels) const;
  // Inverse transform clamped to [0,1].
  std::vector<double> decode(const LatentVector& z) const;
  // Pre-clamp inverse transform (linearity holds exactly here).
  std::vector<double> decode_raw(const LatentVector& z) const;

  // Differentiable decode: matmul against the fixed basis, then clamp with a
  // straight-through gradient.
  Tape::Id decode_on_tape(Tape& tape, Tape::Id z_batch) const;

  // latent_dim x pixel_count, each row an orthonormal basis image.
  const std::vector<double>& basis() const { return basis_; }

 private:
  CodecConfig cfg_;
  std::vector<double> basis_;
};

}  // namespace dpd
