#include "dpd/pipeline.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dpd/parallel.hpp"
#include "dpd/rng.hpp"

namespace dpd {

Tape::Id compute_total_loss(Tape& tape, const ParamIds& theta_ids, const ParamTree& phi,
                            const std::vector<BatchItem>& batch, const NoiseSchedule& sched,
                            double lambda, const Codec& codec, const DenoiserConfig& dcfg,
                            const ClassifierConfig& ccfg, LossParts* parts) {
  if (batch.empty()) throw std::invalid_argument("compute_total_loss: empty batch");
  if (lambda < 0.0) throw std::invalid_argument("compute_total_loss: lambda must be >= 0");
  std::size_t b = batch.size();
  std::size_t d = dcfg.latent_dim;

  // z_t is a constant of theta; only eps_hat carries gradients.
  Tensor zt = Tensor::zeros({b, d});
  Tensor eps = Tensor::zeros({b, d});
  std::vector<std::size_t> ts(b);
  std::vector<TextEmbedding> embeds(b);
  std::vector<std::size_t> labels(b);
  std::vector<double> inv_a(b), neg_bt(b);
  for (std::size_t i = 0; i < b; ++i) {
    const BatchItem& it = batch[i];
    if (it.z0.size() != d || it.eps.size() != d)
      throw std::invalid_argument("compute_total_loss: latent dimension mismatch");
    double ab = sched.alpha_bar_at(it.t);
    double a = std::sqrt(ab), bt = std::sqrt(1.0 - ab);
    for (std::size_t j = 0; j < d; ++j) {
      zt.at(i * d + j) = a * it.z0[j] + bt * it.eps[j];
      eps.at(i * d + j) = it.eps[j];
    }
    ts[i] = it.t;
    embeds[i] = it.text;
    labels[i] = it.label;
    inv_a[i] = 1.0 / a;
    neg_bt[i] = -bt;
  }

  Tape::Id zt_id = tape.constant(zt);
  Tape::Id eps_hat = denoiser_on_tape(tape, theta_ids, zt_id, ts, embeds, sched, dcfg);

  // L_D: mean squared error between true and predicted noise.
  Tape::Id neg_eps = tape.constant([&] {
    Tensor t = eps;
    for (double& v : t.data()) v = -v;
    return t;
  }());
  Tape::Id diff = tape.add(eps_hat, neg_eps);
  Tape::Id loss_d = tape.scale(tape.sum_squares(diff), 1.0 / static_cast<double>(b * d));

  // Clean-latent estimate, decode, frozen-classifier cross-entropy.
  Tape::Id zhat0 =
      tape.row_scale(tape.add(zt_id, tape.row_scale(eps_hat, neg_bt)), inv_a);
  Tape::Id pixels = codec.decode_on_tape(tape, zhat0);
  ParamIds phi_ids = register_constants(tape, phi);
  Tape::Id logits = classifier_logits_on_tape(tape, phi_ids, pixels, ccfg);
  Tape::Id loss_cls = tape.softmax_cross_entropy(logits, labels);

  Tape::Id total = tape.add(loss_d, tape.scale(loss_cls, lambda));
  double total_v = tape.value(total).item();
  if (!std::isfinite(total_v)) {
    std::ostringstream os;
    os << "compute_total_loss: non-finite loss; t=[";
    for (std::size_t i = 0; i < b; ++i) os << (i ? "," : "") << ts[i];
    os << "], alpha_bar=[";
    for (std::size_t i = 0; i < b; ++i) os << (i ? "," : "") << sched.alpha_bar_at(ts[i]);
    double zn = 0.0;
    for (double v : zt.data()) zn += v * v;
    os << "], |z_t|=" << std::sqrt(zn);
    throw std::runtime_error(os.str());
  }
  if (parts) {
    parts->diffusion = tape.value(loss_d).item();
    parts->cls = tape.value(loss_cls).item();
    parts->total = total_v;
  }
  return total;
}

TrainResult train_diffusion(const std::vector<ImageSample>& dataset,
                            const std::vector<TextEmbedding>& caption_embeddings,
                            const ParamTree& phi, const TrainConfig& cfg, const Codec& codec,
                            const DenoiserConfig& dcfg, const ClassifierConfig& ccfg,
                            std::size_t checkpoint_interval, const CheckpointFn& checkpoint) {
  if (dataset.empty()) throw std::invalid_argument("train_diffusion: empty dataset");
  if (caption_embeddings.size() != dataset.size())
    throw std::invalid_argument("train_diffusion: caption embeddings must match dataset");
  if (cfg.batch < 1) throw std::invalid_argument("train_diffusion: batch must be >= 1");

  NoiseSchedule sched = build_schedule(cfg.t_train, cfg.beta_start, cfg.beta_end);

  // Latents are fixed per image; encode once.
  std::vector<LatentVector> z0(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) z0[i] = codec.encode(dataset[i].pixels);

  TrainResult result;
  result.theta = init_denoiser(dcfg, substream_seed(cfg.seed, "denoiser-init"));
  AdamState state = init_adam(result.theta);
  AdamConfig acfg;
  acfg.weight_decay = cfg.weight_decay;

  auto rng = make_rng(cfg.seed, "diffusion-train");
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_t(1, cfg.t_train);
  std::normal_distribution<double> gauss(0.0, 1.0);

  result.history.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<BatchItem> batch(cfg.batch);
    for (std::size_t i = 0; i < cfg.batch; ++i) {
      std::size_t idx = pick(rng);
      batch[i].z0 = z0[idx];
      batch[i].t = pick_t(rng);
      batch[i].eps.resize(dcfg.latent_dim);
      for (double& v : batch[i].eps) v = gauss(rng);
      batch[i].text = caption_embeddings[idx];
      batch[i].label = dataset[idx].label;
    }
    Tape tape;
    ParamIds theta_ids = register_params(tape, result.theta);
    LossParts parts;
    Tape::Id loss =
        compute_total_loss(tape, theta_ids, phi, batch, sched, cfg.lambda, codec, dcfg, ccfg, &parts);
    if (parts.total > 1e6) {
      std::ostringstream os;
      os << "train_diffusion: diverged at step " << step << " (loss " << parts.total
         << "); last checkpoint retained";
      throw std::runtime_error(os.str());
    }
    ParamTree grads = tape.backward(loss);
    adam_step(result.theta, grads, state, cfg.lr, acfg);
    result.history.push_back(parts);
    if (checkpoint && checkpoint_interval > 0 && (step + 1) % checkpoint_interval == 0)
      checkpoint(step + 1, result.theta);
  }
  return result;
}

DistilledDataset distill(const std::vector<PrototypePair>& prototypes, const ParamTree& theta,
                         const Vocabulary& vocab, const Codec& codec, const NoiseSchedule& sched,
                         const DenoiserConfig& dcfg, const DistillConfig& cfg,
                         std::size_t num_classes) {
  if (cfg.ipc < 1) throw std::invalid_argument("distill: IPC must be >= 1");
  std::size_t expected = num_classes * cfg.ipc;
  if (cfg.prototype_init && prototypes.size() != expected)
    throw std::invalid_argument("distill: prototype count " + std::to_string(prototypes.size()) +
                                " != C*IPC = " + std::to_string(expected));
  std::size_t T = sched.timesteps();
  if (!(cfg.tau > 0.0) || cfg.tau > 1.0)
    throw std::invalid_argument("distill: tau must be in (0,1]");

  struct Job {
    std::size_t cls, cluster;
    LatentVector init_latent;  // prototype z*, or empty for noise init
    Caption caption;
  };
  std::vector<Job> jobs;
  jobs.reserve(expected);
  if (cfg.prototype_init) {
    for (const PrototypePair& p : prototypes) {
      Job j{p.cls, p.cluster, p.latent, p.caption};
      if (!cfg.aggregated_captions) j.caption = Caption{{vocab.class_token(p.cls)}};
      jobs.push_back(std::move(j));
    }
  } else {
    for (std::size_t c = 0; c < num_classes; ++c)
      for (std::size_t k = 0; k < cfg.ipc; ++k)
        jobs.push_back(Job{c, k, {}, Caption{{vocab.class_token(c)}}});
  }

  std::vector<ImageSample> samples(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const Job& job = jobs[i];
    // Per-prototype noise stream keyed by (run seed, class, cluster).
    auto rng = make_rng(cfg.seed, "distill-c" + std::to_string(job.cls) + "-k" +
                                      std::to_string(job.cluster));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::size_t t_start;
    LatentVector z_init;
    if (cfg.prototype_init) {
      t_start = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(cfg.tau * static_cast<double>(T))));
      LatentVector eps(dcfg.latent_dim);
      for (double& v : eps) v = gauss(rng);
      z_init = forward_diffuse(job.init_latent, t_start, eps, sched);
    } else {
      t_start = T;
      z_init.resize(dcfg.latent_dim);
      for (double& v : z_init) v = gauss(rng);
    }
    TextEmbedding e = embed(job.caption, vocab);
    SamplerConfig scfg;
    scfg.t_start = t_start;
    scfg.num_steps = std::min(cfg.sampler_steps, t_start);
    LatentVector z = sample(
        [&](const LatentVector& zt, std::size_t t) {
          return denoiser_forward(theta, zt, t, e, sched, dcfg);
        },
        z_init, scfg, sched);
    samples[i].pixels = codec.decode(z);
    samples[i].label = job.cls;
  });

  DistilledDataset out;
  out.samples = std::move(samples);
  std::ostringstream manifest;
  manifest << "{\"ipc\":" << cfg.ipc << ",\"classes\":" << num_classes
           << ",\"sampler_steps\":" << cfg.sampler_steps << ",\"tau\":" << cfg.tau
           << ",\"seed\":" << cfg.seed
           << ",\"prototype_init\":" << (cfg.prototype_init ? "true" : "false")
           << ",\"aggregated_captions\":" << (cfg.aggregated_captions ? "true" : "false")
           << ",\"prototypes\":[";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (i) manifest << ",";
    manifest << "{\"class\":" << jobs[i].cls << ",\"cluster\":" << jobs[i].cluster;
    if (cfg.prototype_init) manifest << ",\"source_index\":" << prototypes[i].source_index;
    manifest << "}";
  }
  manifest << "]}";
  out.manifest_json = manifest.str();
  return out;
}

}  // namespace dpd
