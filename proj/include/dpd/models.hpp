#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dpd/autodiff.hpp"
#include "dpd/codec.hpp"
#include "dpd/conditioning.hpp"
#include "dpd/diffusion.hpp"

namespace dpd {

// Ids of a ParamTree registered on a tape (trainable leaves).
using ParamIds = std::map<std::string, Tape::Id>;

ParamIds register_params(Tape& tape, const ParamTree& params);
// Same tensors recorded as constants (frozen weights).
ParamIds register_constants(Tape& tape, const ParamTree& params);

struct DenoiserConfig {
  std::size_t latent_dim = 64;
  std::size_t time_embed_dim = 32;
  std::size_t text_embed_dim = 32;
  std::vector<std::size_t> hidden = {256, 256};

  std::size_t input_dim() const { return latent_dim + time_embed_dim + text_embed_dim; }
};

struct ClassifierConfig {
  std::size_t input_dim = 256;  // H*W pixels
  std::vector<std::size_t> hidden = {128};
  std::size_t classes = 4;
};

// Gaussian fan-in init; the denoiser's final layer is zero-initialized so an
// untrained model predicts zero noise.
ParamTree init_denoiser(const DenoiserConfig& cfg, std::uint64_t seed);
ParamTree init_classifier(const ClassifierConfig& cfg, std::uint64_t seed);

// Sinusoidal embedding of t/T.
std::vector<double> time_embedding(std::size_t t, std::size_t T, std::size_t dim);

// eps_hat = MLP(concat(zt, sinusoidal(t/T), e)), silu nonlinearity.
// zt_batch is rank-2 [B, d]; ts and embeddings give per-row conditioning.
Tape::Id denoiser_on_tape(Tape& tape, const ParamIds& theta, Tape::Id zt_batch,
                          const std::vector<std::size_t>& ts,
                          const std::vector<TextEmbedding>& embeddings,
                          const NoiseSchedule& sched, const DenoiserConfig& cfg);

// Convenience single-latent forward pass off-tape.
LatentVector denoiser_forward(const ParamTree& theta, const LatentVector& zt, std::size_t t,
                              const TextEmbedding& e, const NoiseSchedule& sched,
                              const DenoiserConfig& cfg);

// Logits of the classifier MLP; pixels_batch rank-2 [B, H*W].
Tape::Id classifier_logits_on_tape(Tape& tape, const ParamIds& phi, Tape::Id pixels_batch,
                                   const ClassifierConfig& cfg);

// Softmax class probabilities for one image.
std::vector<double> classifier_probs(const ParamTree& phi, const std::vector<double>& pixels,
                                     const ClassifierConfig& cfg);

std::vector<double> softmax(const std::vector<double>& logits);

struct TrainClassifierConfig {
  std::size_t epochs = 10;
  std::size_t batch = 32;
  double lr = 1e-4;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

// Adam-trained classifier on (pixels, label) pairs; caller freezes the
// result before diffusion training.
ParamTree train_classifier(const std::vector<ImageSample>& dataset, const ClassifierConfig& cfg,
                           const TrainClassifierConfig& tcfg);

// Overall accuracy (fraction in [0,1]) on a labeled set.
double classifier_accuracy(const ParamTree& phi, const std::vector<ImageSample>& dataset,
                           const ClassifierConfig& cfg);

// FNV-1a over the byte image of a ParamTree; used to assert freezing.
std::uint64_t param_tree_hash(const ParamTree& params);

}  // namespace dpd
