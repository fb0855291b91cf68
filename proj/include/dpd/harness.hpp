#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpd/codec.hpp"
#include "dpd/conditioning.hpp"
#include "dpd/models.hpp"
#include "dpd/pipeline.hpp"

namespace dpd {

struct ToyDatasetSpec {
  std::size_t classes = 4;  // stripes-h, stripes-v, checker, disk
  std::size_t modes_per_class = 2;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 100;
  double noise_level = 0.15;
  std::size_t height = 16;
  std::size_t width = 16;
  std::uint64_t seed = 0;
};

struct ToyDataset {
  std::vector<ImageSample> train;
  std::vector<ImageSample> test;
  std::vector<std::size_t> train_modes;  // hidden sub-mode ground truth
  std::vector<std::size_t> test_modes;
  std::vector<std::string> class_names;
};

// Procedural near-separable pattern classes with designed sub-modes;
// deterministic per seed. Samples carry the attributes the captioner reads
// (brightness, dominant quadrant) through per-sample jitter.
ToyDataset generate_toy_dataset(const ToyDatasetSpec& spec);

struct EvalConfig {
  std::size_t repeats = 10;
  TrainClassifierConfig train{/*epochs=*/200, /*batch=*/32, /*lr=*/1e-3};
};

struct EvalReport {
  double mean = 0.0;    // OA percent
  double stddev = 0.0;  // sample std over repeats (0 if repeats < 2)
  std::vector<double> per_seed;
  std::size_t ipc = 0;
  double ratio = 0.0;  // IPC * C / |R|
  std::string config_hash;

  std::string to_json() const;
};

// Trains a fresh classifier per repeat on D only and reports overall
// accuracy on the real test set, mean +/- std over repeats.
EvalReport evaluate(const std::vector<ImageSample>& distilled,
                    const std::vector<ImageSample>& test_set, std::size_t repeats,
                    const ClassifierConfig& ccfg, const TrainClassifierConfig& tcfg,
                    std::uint64_t seed);

// One bundle of knobs for a full run; flat JSON round-trip for the CLI.
struct RunConfig {
  ToyDatasetSpec data;
  std::size_t latent_dim = 64;
  std::size_t time_embed_dim = 32;
  std::size_t text_embed_dim = 32;
  std::vector<std::size_t> denoiser_hidden = {512, 512};
  std::vector<std::size_t> classifier_hidden = {128};
  // f_phi pretraining: few epochs reach ceiling accuracy on the toy set
  // while keeping the logit scale moderate, so the guidance strength per
  // unit lambda stays in a useful range.
  TrainClassifierConfig pretrain{/*epochs=*/10, /*batch=*/32, /*lr=*/1e-3};
  TrainConfig diffusion;
  DistillConfig distill;
  EvalConfig eval;
  double keep_ratio = 0.5;
  std::size_t caption_cap = 8;
  std::uint64_t seed = 0;

  CodecConfig codec_config() const;
  DenoiserConfig denoiser_config() const;
  ClassifierConfig classifier_config() const;
  VocabularyConfig vocabulary_config(const std::vector<std::string>& class_names) const;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  std::string hash() const;

  // Re-derives the stage seeds from the root seed.
  RunConfig with_seed(std::uint64_t root) const;
};

// Full pipeline artifacts for one config+seed.
struct PipelineResult {
  ParamTree phi;
  ParamTree theta;
  DistilledDataset distilled;
  EvalReport report;
  double phi_test_accuracy = 0.0;  // frozen-classifier OA on T, percent
};

// gen-data -> pretrain f_phi -> train diffusion -> prototypes -> distill ->
// evaluate, end to end in memory.
PipelineResult run_pipeline(const RunConfig& cfg);

struct AblationRow {
  std::string name;
  std::vector<double> per_seed_oa;  // per paired seed, mean OA over repeats
  double mean = 0.0;
  double stddev = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;  // (a) L_D only, (b) +L_cls, (c) +prototypes, (d) +cap.agg.
  std::string to_json() const;
  std::string to_markdown() const;
};

// Cumulative ablation: four configurations over paired seeds sharing the
// dataset and pretrained classifier per seed.
AblationReport ablation_suite(const RunConfig& base, std::size_t num_seeds);

struct SweepPoint {
  double value = 0.0;
  std::vector<double> per_seed_oa;
  double median = 0.0;
};

struct SweepReport {
  std::string param;
  std::vector<SweepPoint> points;
  std::string to_json() const;
  std::string to_markdown() const;
};

// param is one of "lambda", "sampler_steps", "ipc". Training is shared
// across values that do not affect it (sampler_steps, ipc).
SweepReport sweep(const std::string& param, const std::vector<double>& values,
                  const RunConfig& base, std::size_t num_seeds);

double median_of(std::vector<double> v);
void mean_std(const std::vector<double>& v, double* mean, double* std_out);

}  // namespace dpd
