#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dpd/autodiff.hpp"
#include "dpd/codec.hpp"
#include "dpd/conditioning.hpp"
#include "dpd/diffusion.hpp"
#include "dpd/models.hpp"
#include "dpd/prototype.hpp"

namespace dpd {

struct TrainConfig {
  double lambda = 0.3;
  std::size_t t_train = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::size_t steps = 20000;
  std::size_t batch = 32;
  double lr = 1e-4;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

struct DistillConfig {
  std::size_t ipc = 10;
  std::size_t sampler_steps = 50;
  double tau = 0.9;  // noising strength before reverse diffusion (1.0 = full chain)
  std::uint64_t seed = 0;
  // Ablation knobs: start from pure noise instead of a prototype latent, or
  // replace aggregated captions with the per-class template caption.
  bool prototype_init = true;
  bool aggregated_captions = true;
};

struct LossParts {
  double total = 0.0;
  double diffusion = 0.0;
  double cls = 0.0;
};

struct BatchItem {
  LatentVector z0;
  LatentVector eps;
  std::size_t t = 1;
  TextEmbedding text;
  std::size_t label = 0;
};

// L_total = L_D + lambda * L_cls on the given tape, with the classification
// path flowing through the clean-latent estimate and the decoder. phi is
// recorded frozen (constants). Returns the loss id; parts report the
// components at this batch.
Tape::Id compute_total_loss(Tape& tape, const ParamIds& theta_ids, const ParamTree& phi,
                            const std::vector<BatchItem>& batch, const NoiseSchedule& sched,
                            double lambda, const Codec& codec, const DenoiserConfig& dcfg,
                            const ClassifierConfig& ccfg, LossParts* parts = nullptr);

struct TrainResult {
  ParamTree theta;
  std::vector<LossParts> history;  // per step
};

using CheckpointFn = std::function<void(std::size_t step, const ParamTree& theta)>;

// Algorithm: per step sample a batch, per-item t ~ Uniform(1,T) and
// eps ~ N(0,I), forward diffuse, combined loss, Adam step. Captions are
// precomputed per image. Aborts (keeping the last checkpoint current) if the
// loss exceeds 1e6.
TrainResult train_diffusion(const std::vector<ImageSample>& dataset,
                            const std::vector<TextEmbedding>& caption_embeddings,
                            const ParamTree& phi, const TrainConfig& cfg, const Codec& codec,
                            const DenoiserConfig& dcfg, const ClassifierConfig& ccfg,
                            std::size_t checkpoint_interval = 0,
                            const CheckpointFn& checkpoint = nullptr);

struct DistilledDataset {
  std::vector<ImageSample> samples;  // C*IPC, ordered by (class, cluster)
  std::string manifest_json;
};

// Algorithm: per prototype pair, embed the caption, partially noise the
// prototype latent to t_start = round(tau * T), reverse-diffuse over the
// sampler subsequence, decode. With prototype_init=false the initial latent
// is pure N(0,I) noise at t_start = T.
DistilledDataset distill(const std::vector<PrototypePair>& prototypes, const ParamTree& theta,
                         const Vocabulary& vocab, const Codec& codec, const NoiseSchedule& sched,
                         const DenoiserConfig& dcfg, const DistillConfig& cfg,
                         std::size_t num_classes);

}  // namespace dpd
