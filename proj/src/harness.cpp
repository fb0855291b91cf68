#include "dpd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dpd/io.hpp"
#include "dpd/parallel.hpp"
#include "dpd/rng.hpp"

namespace dpd {

namespace {

using nlohmann::json;

const std::vector<std::string> kToyClassNames = {"stripes-h", "stripes-v", "checker", "disk"};

// One procedural sample; pattern shape depends on (class, mode), while
// amplitude/background/placement jitter gives the captioner attributes to
// read and keeps classes from collapsing to single points.
ImageSample make_toy_sample(std::size_t cls, std::size_t mode, const ToyDatasetSpec& spec,
                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double h = static_cast<double>(spec.height), w = static_cast<double>(spec.width);
  // The class pattern is deliberately a minor share of the image energy: a
  // strong shared low-frequency background dominates, as class evidence does
  // not dominate pixel energy in natural images either. Plain reconstruction
  // objectives then preferentially preserve the background, so the class
  // signal is the part most at risk of being lost.
  double amp = 0.18 + 0.12 * uni(rng);
  double base = 0.5;
  // Bounded phase jitter keeps patterns class-aligned (the class mean stays
  // informative) while spreading each class over a real manifold; a
  // handful of images per class cannot cover it exactly.
  double phase = 0.25 * uni(rng);
  double phase2 = 0.25 * uni(rng);
  double ci = (0.25 + 0.5 * uni(rng)) * h;
  double cj = (0.25 + 0.5 * uni(rng)) * w;
  // Per-sample random smooth background: three low-frequency cosine modes
  // with random amplitudes and phases, zero-mean across the dataset.
  double ba[3], bp[3], bq[3];
  for (int k = 0; k < 3; ++k) {
    ba[k] = 0.12 + 0.13 * uni(rng);
    if (uni(rng) < 0.5) ba[k] = -ba[k];
    bp[k] = 2.0 * std::numbers::pi * uni(rng);
    bq[k] = 2.0 * std::numbers::pi * uni(rng);
  }

  ImageSample s;
  s.label = cls;
  s.pixels.resize(spec.height * spec.width);
  for (std::size_t i = 0; i < spec.height; ++i) {
    for (std::size_t j = 0; j < spec.width; ++j) {
      double v = 0.0;
      double fi = static_cast<double>(i), fj = static_cast<double>(j);
      double bg = ba[0] * std::cos(2.0 * std::numbers::pi * fi / h + bp[0]) +
                  ba[1] * std::cos(2.0 * std::numbers::pi * fj / w + bq[1]) +
                  ba[2] * std::cos(2.0 * std::numbers::pi * fi / h + bp[2]) *
                      std::cos(2.0 * std::numbers::pi * fj / w + bq[2]);
      switch (cls) {
        case 0: {  // stripes-h: intensity varies with the row index
          double freq = mode == 0 ? 2.0 : 5.0;
          v = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (freq * fi / h + phase));
          break;
        }
        case 1: {  // stripes-v
          double freq = mode == 0 ? 2.0 : 5.0;
          v = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (freq * fj / w + phase));
          break;
        }
        case 2: {  // checker
          double freq = mode == 0 ? 2.0 : 4.0;
          v = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (freq * fi / h + phase)) *
                        std::sin(2.0 * std::numbers::pi * (freq * fj / w + phase2));
          break;
        }
        default: {  // disk
          double radius = (mode == 0 ? 0.18 : 0.32) * h;
          double dist = std::sqrt((fi - ci) * (fi - ci) + (fj - cj) * (fj - cj));
          v = 1.0 / (1.0 + std::exp((dist - radius) / 0.8));
          break;
        }
      }
      double p = base + bg + amp * (2.0 * v - 1.0) + spec.noise_level * gauss(rng);
      s.pixels[i * spec.width + j] = std::clamp(p, 0.0, 1.0);
    }
  }
  return s;
}

void fill_split(std::vector<ImageSample>& images, std::vector<std::size_t>& modes,
                std::size_t per_class, const ToyDatasetSpec& spec, std::mt19937_64& rng) {
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      std::size_t mode = i % spec.modes_per_class;
      images.push_back(make_toy_sample(c, mode, spec, rng));
      modes.push_back(mode);
    }
  }
}

}  // namespace

ToyDataset generate_toy_dataset(const ToyDatasetSpec& spec) {
  if (spec.classes < 1 || spec.classes > kToyClassNames.size())
    throw std::invalid_argument("generate_toy_dataset: classes must be in [1,4]");
  if (spec.modes_per_class < 1)
    throw std::invalid_argument("generate_toy_dataset: modes_per_class must be >= 1");
  ToyDataset ds;
  ds.class_names.assign(kToyClassNames.begin(), kToyClassNames.begin() + spec.classes);
  auto train_rng = make_rng(spec.seed, "toy-train");
  auto test_rng = make_rng(spec.seed, "toy-test");
  fill_split(ds.train, ds.train_modes, spec.train_per_class, spec, train_rng);
  fill_split(ds.test, ds.test_modes, spec.test_per_class, spec, test_rng);
  return ds;
}

void mean_std(const std::vector<double>& v, double* mean, double* std_out) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  *mean = m;
  *std_out = v.size() < 2 ? 0.0 : std::sqrt(s2 / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string EvalReport::to_json() const {
  json j;
  j["oa_mean"] = mean;
  j["oa_std"] = stddev;
  j["per_seed"] = per_seed;
  j["ipc"] = ipc;
  j["ratio"] = ratio;
  j["config_hash"] = config_hash;
  return j.dump(2);
}

EvalReport evaluate(const std::vector<ImageSample>& distilled,
                    const std::vector<ImageSample>& test_set, std::size_t repeats,
                    const ClassifierConfig& ccfg, const TrainClassifierConfig& tcfg,
                    std::uint64_t seed) {
  if (distilled.empty()) throw std::invalid_argument("evaluate: empty distilled dataset");
  if (repeats < 1) throw std::invalid_argument("evaluate: repeats must be >= 1");
  EvalReport report;
  report.per_seed.resize(repeats);
  parallel_for(repeats, [&](std::size_t r) {
    TrainClassifierConfig cfg = tcfg;
    cfg.seed = substream_seed(seed, "eval-repeat-" + std::to_string(r));
    ParamTree phi = train_classifier(distilled, ccfg, cfg);
    report.per_seed[r] = 100.0 * classifier_accuracy(phi, test_set, ccfg);
  });
  mean_std(report.per_seed, &report.mean, &report.stddev);
  return report;
}

CodecConfig RunConfig::codec_config() const {
  return CodecConfig{data.height, data.width, latent_dim};
}

DenoiserConfig RunConfig::denoiser_config() const {
  return DenoiserConfig{latent_dim, time_embed_dim, text_embed_dim, denoiser_hidden};
}

ClassifierConfig RunConfig::classifier_config() const {
  return ClassifierConfig{data.height * data.width, classifier_hidden, data.classes};
}

VocabularyConfig RunConfig::vocabulary_config(const std::vector<std::string>& class_names) const {
  return VocabularyConfig{class_names, text_embed_dim, substream_seed(seed, "vocab")};
}

std::string RunConfig::to_json() const {
  json j;
  j["classes"] = data.classes;
  j["modes_per_class"] = data.modes_per_class;
  j["train_per_class"] = data.train_per_class;
  j["test_per_class"] = data.test_per_class;
  j["noise_level"] = data.noise_level;
  j["image_size"] = data.height;
  j["latent_dim"] = latent_dim;
  j["time_embed_dim"] = time_embed_dim;
  j["text_embed_dim"] = text_embed_dim;
  j["denoiser_hidden"] = denoiser_hidden;
  j["classifier_hidden"] = classifier_hidden;
  j["pretrain_epochs"] = pretrain.epochs;
  j["pretrain_batch"] = pretrain.batch;
  j["pretrain_lr"] = pretrain.lr;
  j["lambda"] = diffusion.lambda;
  j["t_train"] = diffusion.t_train;
  j["beta_start"] = diffusion.beta_start;
  j["beta_end"] = diffusion.beta_end;
  j["train_steps"] = diffusion.steps;
  j["train_batch"] = diffusion.batch;
  j["train_lr"] = diffusion.lr;
  j["weight_decay"] = diffusion.weight_decay;
  j["ipc"] = distill.ipc;
  j["sampler_steps"] = distill.sampler_steps;
  j["tau"] = distill.tau;
  j["prototype_init"] = distill.prototype_init;
  j["aggregated_captions"] = distill.aggregated_captions;
  j["eval_repeats"] = eval.repeats;
  j["eval_epochs"] = eval.train.epochs;
  j["eval_batch"] = eval.train.batch;
  j["eval_lr"] = eval.train.lr;
  j["keep_ratio"] = keep_ratio;
  j["caption_cap"] = caption_cap;
  j["seed"] = seed;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  RunConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "classes") cfg.data.classes = value;
    else if (key == "modes_per_class") cfg.data.modes_per_class = value;
    else if (key == "train_per_class") cfg.data.train_per_class = value;
    else if (key == "test_per_class") cfg.data.test_per_class = value;
    else if (key == "noise_level") cfg.data.noise_level = value;
    else if (key == "image_size") { cfg.data.height = value; cfg.data.width = value; }
    else if (key == "latent_dim") cfg.latent_dim = value;
    else if (key == "time_embed_dim") cfg.time_embed_dim = value;
    else if (key == "text_embed_dim") cfg.text_embed_dim = value;
    else if (key == "denoiser_hidden") cfg.denoiser_hidden = value.get<std::vector<std::size_t>>();
    else if (key == "classifier_hidden") cfg.classifier_hidden = value.get<std::vector<std::size_t>>();
    else if (key == "pretrain_epochs") cfg.pretrain.epochs = value;
    else if (key == "pretrain_batch") cfg.pretrain.batch = value;
    else if (key == "pretrain_lr") cfg.pretrain.lr = value;
    else if (key == "lambda") cfg.diffusion.lambda = value;
    else if (key == "t_train") cfg.diffusion.t_train = value;
    else if (key == "beta_start") cfg.diffusion.beta_start = value;
    else if (key == "beta_end") cfg.diffusion.beta_end = value;
    else if (key == "train_steps") cfg.diffusion.steps = value;
    else if (key == "train_batch") cfg.diffusion.batch = value;
    else if (key == "train_lr") cfg.diffusion.lr = value;
    else if (key == "weight_decay") cfg.diffusion.weight_decay = value;
    else if (key == "ipc") cfg.distill.ipc = value;
    else if (key == "sampler_steps") cfg.distill.sampler_steps = value;
    else if (key == "tau") cfg.distill.tau = value;
    else if (key == "prototype_init") cfg.distill.prototype_init = value;
    else if (key == "aggregated_captions") cfg.distill.aggregated_captions = value;
    else if (key == "eval_repeats") cfg.eval.repeats = value;
    else if (key == "eval_epochs") cfg.eval.train.epochs = value;
    else if (key == "eval_batch") cfg.eval.train.batch = value;
    else if (key == "eval_lr") cfg.eval.train.lr = value;
    else if (key == "keep_ratio") cfg.keep_ratio = value;
    else if (key == "caption_cap") cfg.caption_cap = value;
    else if (key == "seed") cfg.seed = value;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  return cfg.with_seed(cfg.seed);
}

std::string RunConfig::hash() const {
  std::string s = to_json();
  return content_hash(s.data(), s.size());
}

RunConfig RunConfig::with_seed(std::uint64_t root) const {
  RunConfig cfg = *this;
  cfg.seed = root;
  cfg.data.seed = substream_seed(root, "dataset");
  cfg.pretrain.seed = substream_seed(root, "classifier");
  cfg.diffusion.seed = substream_seed(root, "diffusion");
  cfg.distill.seed = substream_seed(root, "distill");
  return cfg;
}

PipelineResult run_pipeline(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in.with_seed(cfg_in.seed);
  ToyDataset ds = generate_toy_dataset(cfg.data);
  Codec codec(cfg.codec_config());
  Vocabulary vocab(cfg.vocabulary_config(ds.class_names));
  ClassifierConfig ccfg = cfg.classifier_config();
  DenoiserConfig dcfg = cfg.denoiser_config();

  PipelineResult out;
  out.phi = train_classifier(ds.train, ccfg, cfg.pretrain);
  out.phi_test_accuracy = 100.0 * classifier_accuracy(out.phi, ds.test, ccfg);
  std::uint64_t phi_hash = param_tree_hash(out.phi);

  std::vector<TextEmbedding> embeddings(ds.train.size());
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    Caption c = caption_image(ds.train[i], ds.class_names[ds.train[i].label], vocab,
                              cfg.data.height, cfg.data.width);
    embeddings[i] = embed(c, vocab);
  }

  TrainResult tr = train_diffusion(ds.train, embeddings, out.phi, cfg.diffusion, codec, dcfg, ccfg);
  out.theta = std::move(tr.theta);
  if (param_tree_hash(out.phi) != phi_hash)
    throw std::logic_error("run_pipeline: frozen classifier was mutated");

  NoiseSchedule sched =
      build_schedule(cfg.diffusion.t_train, cfg.diffusion.beta_start, cfg.diffusion.beta_end);
  std::vector<PrototypePair> prototypes;
  if (cfg.distill.prototype_init) {
    PrototypeOptions popts;
    popts.k = cfg.distill.ipc;
    popts.keep_ratio = cfg.keep_ratio;
    popts.caption_cap = cfg.caption_cap;
    popts.seed = substream_seed(cfg.seed, "prototype");
    prototypes = build_prototypes(ds.train, codec, vocab, ds.class_names, popts);
  }
  out.distilled = distill(prototypes, out.theta, vocab, codec, sched, dcfg, cfg.distill,
                          cfg.data.classes);

  out.report = evaluate(out.distilled.samples, ds.test, cfg.eval.repeats, ccfg, cfg.eval.train,
                        substream_seed(cfg.seed, "eval"));
  out.report.ipc = cfg.distill.ipc;
  out.report.ratio = static_cast<double>(cfg.distill.ipc * cfg.data.classes) /
                     static_cast<double>(ds.train.size());
  out.report.config_hash = cfg.hash();
  return out;
}

std::string AblationReport::to_json() const {
  json j = json::array();
  for (const AblationRow& r : rows) {
    json row;
    row["config"] = r.name;
    row["per_seed_oa"] = r.per_seed_oa;
    row["oa_mean"] = r.mean;
    row["oa_std"] = r.stddev;
    j.push_back(row);
  }
  return j.dump(2);
}

std::string AblationReport::to_markdown() const {
  std::ostringstream os;
  os << "| L_D | L_cls | Vis. Prot. | Cap. Agg. | OA (%) |\n";
  os << "|-----|-------|------------|-----------|--------|\n";
  const char* marks[4][4] = {{"x", " ", " ", " "},
                             {"x", "x", " ", " "},
                             {"x", "x", "x", " "},
                             {"x", "x", "x", "x"}};
  for (std::size_t i = 0; i < rows.size() && i < 4; ++i) {
    os << "| " << marks[i][0] << " | " << marks[i][1] << " | " << marks[i][2] << " | "
       << marks[i][3] << " | ";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f±%.2f", rows[i].mean, rows[i].stddev);
    os << buf << " |\n";
  }
  return os.str();
}

AblationReport ablation_suite(const RunConfig& base, std::size_t num_seeds) {
  if (num_seeds < 1) throw std::invalid_argument("ablation_suite: num_seeds must be >= 1");
  AblationReport report;
  report.rows = {
      AblationRow{"L_D only", std::vector<double>(num_seeds)},
      AblationRow{"+L_cls", std::vector<double>(num_seeds)},
      AblationRow{"+Vis. Prot.", std::vector<double>(num_seeds)},
      AblationRow{"+Cap. Agg.", std::vector<double>(num_seeds)},
  };

  parallel_for(num_seeds, [&](std::size_t s) {
    RunConfig cfg = base.with_seed(substream_seed(base.seed, "ablate-seed-" + std::to_string(s)));
    ToyDataset ds = generate_toy_dataset(cfg.data);
    Codec codec(cfg.codec_config());
    Vocabulary vocab(cfg.vocabulary_config(ds.class_names));
    ClassifierConfig ccfg = cfg.classifier_config();
    DenoiserConfig dcfg = cfg.denoiser_config();
    NoiseSchedule sched =
        build_schedule(cfg.diffusion.t_train, cfg.diffusion.beta_start, cfg.diffusion.beta_end);

    ParamTree phi = train_classifier(ds.train, ccfg, cfg.pretrain);
    std::vector<TextEmbedding> embeddings(ds.train.size());
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
      Caption c = caption_image(ds.train[i], ds.class_names[ds.train[i].label], vocab,
                                cfg.data.height, cfg.data.width);
      embeddings[i] = embed(c, vocab);
    }

    TrainConfig plain = cfg.diffusion;
    plain.lambda = 0.0;
    ParamTree theta_plain =
        train_diffusion(ds.train, embeddings, phi, plain, codec, dcfg, ccfg).theta;
    ParamTree theta_cls =
        train_diffusion(ds.train, embeddings, phi, cfg.diffusion, codec, dcfg, ccfg).theta;

    PrototypeOptions popts;
    popts.k = cfg.distill.ipc;
    popts.keep_ratio = cfg.keep_ratio;
    popts.caption_cap = cfg.caption_cap;
    popts.seed = substream_seed(cfg.seed, "prototype");
    std::vector<PrototypePair> prototypes =
        build_prototypes(ds.train, codec, vocab, ds.class_names, popts);

    auto run_row = [&](const ParamTree& theta, bool proto_init, bool agg) {
      DistillConfig d = cfg.distill;
      d.prototype_init = proto_init;
      d.aggregated_captions = agg;
      DistilledDataset dd =
          distill(proto_init ? prototypes : std::vector<PrototypePair>{}, theta, vocab, codec,
                  sched, dcfg, d, cfg.data.classes);
      return evaluate(dd.samples, ds.test, cfg.eval.repeats, ccfg, cfg.eval.train,
                      substream_seed(cfg.seed, "eval"))
          .mean;
    };
    report.rows[0].per_seed_oa[s] = run_row(theta_plain, false, false);
    report.rows[1].per_seed_oa[s] = run_row(theta_cls, false, false);
    report.rows[2].per_seed_oa[s] = run_row(theta_cls, true, false);
    report.rows[3].per_seed_oa[s] = run_row(theta_cls, true, true);
  });

  for (AblationRow& r : report.rows) mean_std(r.per_seed_oa, &r.mean, &r.stddev);
  return report;
}

std::string SweepReport::to_json() const {
  json j;
  j["param"] = param;
  json pts = json::array();
  for (const SweepPoint& p : points) {
    json pt;
    pt["value"] = p.value;
    pt["per_seed_oa"] = p.per_seed_oa;
    pt["oa_median"] = p.median;
    pts.push_back(pt);
  }
  j["points"] = pts;
  return j.dump(2);
}

std::string SweepReport::to_markdown() const {
  std::ostringstream os;
  os << "| " << param << " | median OA (%) |\n|---|---|\n";
  for (const SweepPoint& p : points) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "| %g | %.2f |\n", p.value, p.median);
    os << buf;
  }
  return os.str();
}

SweepReport sweep(const std::string& param, const std::vector<double>& values,
                  const RunConfig& base, std::size_t num_seeds) {
  if (values.empty()) throw std::invalid_argument("sweep: empty value list");
  if (param != "lambda" && param != "sampler_steps" && param != "ipc")
    throw std::invalid_argument("sweep: param must be lambda, sampler_steps, or ipc");
  SweepReport report;
  report.param = param;
  report.points.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    report.points[i].value = values[i];
    report.points[i].per_seed_oa.resize(num_seeds);
  }

  bool retrain_per_value = param == "lambda";
  parallel_for(num_seeds, [&](std::size_t s) {
    RunConfig cfg = base.with_seed(substream_seed(base.seed, "sweep-seed-" + std::to_string(s)));
    ToyDataset ds = generate_toy_dataset(cfg.data);
    Codec codec(cfg.codec_config());
    Vocabulary vocab(cfg.vocabulary_config(ds.class_names));
    ClassifierConfig ccfg = cfg.classifier_config();
    DenoiserConfig dcfg = cfg.denoiser_config();
    NoiseSchedule sched =
        build_schedule(cfg.diffusion.t_train, cfg.diffusion.beta_start, cfg.diffusion.beta_end);

    ParamTree phi = train_classifier(ds.train, ccfg, cfg.pretrain);
    std::vector<TextEmbedding> embeddings(ds.train.size());
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
      Caption c = caption_image(ds.train[i], ds.class_names[ds.train[i].label], vocab,
                                cfg.data.height, cfg.data.width);
      embeddings[i] = embed(c, vocab);
    }

    ParamTree theta_shared;
    if (!retrain_per_value)
      theta_shared = train_diffusion(ds.train, embeddings, phi, cfg.diffusion, codec, dcfg, ccfg).theta;

    for (std::size_t i = 0; i < values.size(); ++i) {
      TrainConfig tcfg = cfg.diffusion;
      DistillConfig dcfg2 = cfg.distill;
      if (param == "lambda") tcfg.lambda = values[i];
      if (param == "sampler_steps") dcfg2.sampler_steps = static_cast<std::size_t>(values[i]);
      if (param == "ipc") dcfg2.ipc = static_cast<std::size_t>(values[i]);

      const ParamTree& theta =
          retrain_per_value
              ? (theta_shared = train_diffusion(ds.train, embeddings, phi, tcfg, codec, dcfg, ccfg)
                                    .theta)
              : theta_shared;

      std::vector<PrototypePair> prototypes;
      if (dcfg2.prototype_init) {
        PrototypeOptions popts;
        popts.k = dcfg2.ipc;
        popts.keep_ratio = cfg.keep_ratio;
        popts.caption_cap = cfg.caption_cap;
        popts.seed = substream_seed(cfg.seed, "prototype");
        prototypes = build_prototypes(ds.train, codec, vocab, ds.class_names, popts);
      }
      DistilledDataset dd =
          distill(prototypes, theta, vocab, codec, sched, dcfg, dcfg2, cfg.data.classes);
      report.points[i].per_seed_oa[s] =
          evaluate(dd.samples, ds.test, cfg.eval.repeats, ccfg, cfg.eval.train,
                   substream_seed(cfg.seed, "eval"))
              .mean;
    }
  });

  for (SweepPoint& p : report.points) p.median = median_of(p.per_seed_oa);
  return report;
}

}  // namespace dpd
