#include "dpd/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

#include "dpd/rng.hpp"

namespace dpd {

namespace {

std::string layer_w(std::size_t i) { return "layer" + std::to_string(i) + ".weight"; }
std::string layer_b(std::size_t i) { return "layer" + std::to_string(i) + ".bias"; }

ParamTree init_mlp(const std::vector<std::size_t>& widths, std::uint64_t seed,
                   bool zero_final) {
  auto rng = make_rng(seed, "mlp-init");
  std::normal_distribution<double> gauss(0.0, 1.0);
  ParamTree params;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    std::size_t fan_in = widths[l], fan_out = widths[l + 1];
    Tensor w = Tensor::zeros({fan_in, fan_out});
    bool final_layer = l + 2 == widths.size();
    if (!(zero_final && final_layer)) {
      double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : w.data()) v = scale * gauss(rng);
    }
    params[layer_w(l)] = std::move(w);
    params[layer_b(l)] = Tensor::zeros({fan_out});
  }
  return params;
}

// silu MLP over registered ids; linear final layer.
Tape::Id mlp_on_tape(Tape& tape, const ParamIds& ids, Tape::Id input, std::size_t num_layers) {
  Tape::Id h = input;
  for (std::size_t l = 0; l < num_layers; ++l) {
    h = tape.add(tape.matmul(h, ids.at(layer_w(l))), ids.at(layer_b(l)));
    if (l + 1 < num_layers) h = tape.silu(h);
  }
  return h;
}

std::vector<std::size_t> mlp_widths(std::size_t in, const std::vector<std::size_t>& hidden,
                                    std::size_t out) {
  std::vector<std::size_t> widths{in};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);
  return widths;
}

}  // namespace

ParamIds register_params(Tape& tape, const ParamTree& params) {
  ParamIds ids;
  for (const auto& [name, t] : params) ids[name] = tape.param(name, t);
  return ids;
}

ParamIds register_constants(Tape& tape, const ParamTree& params) {
  ParamIds ids;
  for (const auto& [name, t] : params) ids[name] = tape.constant(t);
  return ids;
}

ParamTree init_denoiser(const DenoiserConfig& cfg, std::uint64_t seed) {
  return init_mlp(mlp_widths(cfg.input_dim(), cfg.hidden, cfg.latent_dim), seed,
                  /*zero_final=*/true);
}

ParamTree init_classifier(const ClassifierConfig& cfg, std::uint64_t seed) {
  return init_mlp(mlp_widths(cfg.input_dim, cfg.hidden, cfg.classes), seed,
                  /*zero_final=*/false);
}

std::vector<double> time_embedding(std::size_t t, std::size_t T, std::size_t dim) {
  if (dim % 2 != 0) throw std::invalid_argument("time_embedding: dim must be even");
  std::vector<double> e(dim);
  // Sinusoidal embedding of the normalized position t/T across geometric
  // frequencies up to 1000 cycles.
  double pos = static_cast<double>(t) / static_cast<double>(T);
  std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double freq =
        std::pow(1000.0, static_cast<double>(i) / static_cast<double>(half > 1 ? half - 1 : 1));
    e[i] = std::sin(2.0 * std::numbers::pi * pos * freq);
    e[half + i] = std::cos(2.0 * std::numbers::pi * pos * freq);
  }
  return e;
}

Tape::Id denoiser_on_tape(Tape& tape, const ParamIds& theta, Tape::Id zt_batch,
                          const std::vector<std::size_t>& ts,
                          const std::vector<TextEmbedding>& embeddings,
                          const NoiseSchedule& sched, const DenoiserConfig& cfg) {
  const Tensor& zt = tape.value(zt_batch);
  if (zt.rank() != 2 || zt.cols() != cfg.latent_dim)
    throw std::invalid_argument("denoiser_on_tape: latent batch must be [B," +
                                std::to_string(cfg.latent_dim) + "], got " + shape_str(zt.shape()));
  std::size_t batch = zt.rows();
  if (ts.size() != batch || embeddings.size() != batch)
    throw std::invalid_argument("denoiser_on_tape: ts/embeddings size must match batch");
  std::size_t T = sched.timesteps();

  Tensor cond = Tensor::zeros({batch, cfg.time_embed_dim + cfg.text_embed_dim});
  for (std::size_t i = 0; i < batch; ++i) {
    if (ts[i] < 1 || ts[i] > T)
      throw std::invalid_argument("denoiser_on_tape: timestep out of range");
    if (embeddings[i].size() != cfg.text_embed_dim)
      throw std::invalid_argument("denoiser_on_tape: text embedding dimension mismatch");
    std::vector<double> te = time_embedding(ts[i], T, cfg.time_embed_dim);
    for (std::size_t j = 0; j < cfg.time_embed_dim; ++j)
      cond.at(i * (cfg.time_embed_dim + cfg.text_embed_dim) + j) = te[j];
    for (std::size_t j = 0; j < cfg.text_embed_dim; ++j)
      cond.at(i * (cfg.time_embed_dim + cfg.text_embed_dim) + cfg.time_embed_dim + j) =
          embeddings[i][j];
  }
  Tape::Id input = tape.concat(zt_batch, tape.constant(std::move(cond)));
  return mlp_on_tape(tape, theta, input, cfg.hidden.size() + 1);
}

LatentVector denoiser_forward(const ParamTree& theta, const LatentVector& zt, std::size_t t,
                              const TextEmbedding& e, const NoiseSchedule& sched,
                              const DenoiserConfig& cfg) {
  Tape tape;
  ParamIds ids = register_constants(tape, theta);
  Tape::Id z = tape.constant(Tensor({1, zt.size()}, zt));
  Tape::Id out = denoiser_on_tape(tape, ids, z, {t}, {e}, sched, cfg);
  return tape.value(out).data();
}

Tape::Id classifier_logits_on_tape(Tape& tape, const ParamIds& phi, Tape::Id pixels_batch,
                                   const ClassifierConfig& cfg) {
  const Tensor& px = tape.value(pixels_batch);
  if (px.rank() != 2 || px.cols() != cfg.input_dim)
    throw std::invalid_argument("classifier: pixel batch must be [B," +
                                std::to_string(cfg.input_dim) + "], got " + shape_str(px.shape()));
  return mlp_on_tape(tape, phi, pixels_batch, cfg.hidden.size() + 1);
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> classifier_probs(const ParamTree& phi, const std::vector<double>& pixels,
                                     const ClassifierConfig& cfg) {
  Tape tape;
  ParamIds ids = register_constants(tape, phi);
  Tape::Id px = tape.constant(Tensor({1, pixels.size()}, pixels));
  Tape::Id logits = classifier_logits_on_tape(tape, ids, px, cfg);
  return softmax(tape.value(logits).data());
}

ParamTree train_classifier(const std::vector<ImageSample>& dataset, const ClassifierConfig& cfg,
                           const TrainClassifierConfig& tcfg) {
  if (dataset.empty()) throw std::invalid_argument("train_classifier: empty dataset");
  for (const ImageSample& s : dataset) {
    if (s.label >= cfg.classes) throw std::invalid_argument("train_classifier: label out of range");
    if (s.pixels.size() != cfg.input_dim)
      throw std::invalid_argument("train_classifier: pixel size mismatch");
  }
  ParamTree phi = init_classifier(cfg, substream_seed(tcfg.seed, "classifier-init"));
  AdamState state = init_adam(phi);
  AdamConfig acfg;
  acfg.weight_decay = tcfg.weight_decay;

  auto rng = make_rng(tcfg.seed, "classifier-shuffle");
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch) {
      std::size_t end = std::min(order.size(), start + tcfg.batch);
      std::size_t b = end - start;
      Tensor px = Tensor::zeros({b, cfg.input_dim});
      std::vector<std::size_t> labels(b);
      for (std::size_t i = 0; i < b; ++i) {
        const ImageSample& s = dataset[order[start + i]];
        std::copy(s.pixels.begin(), s.pixels.end(), px.data().begin() + i * cfg.input_dim);
        labels[i] = s.label;
      }
      Tape tape;
      ParamIds ids = register_params(tape, phi);
      Tape::Id logits = classifier_logits_on_tape(tape, ids, tape.constant(std::move(px)), cfg);
      Tape::Id loss = tape.softmax_cross_entropy(logits, labels);
      ParamTree grads = tape.backward(loss);
      adam_step(phi, grads, state, tcfg.lr, acfg);
    }
  }
  return phi;
}

double classifier_accuracy(const ParamTree& phi, const std::vector<ImageSample>& dataset,
                           const ClassifierConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("classifier_accuracy: empty dataset");
  std::size_t correct = 0;
  // One batched forward pass over the whole set.
  Tape tape;
  ParamIds ids = register_constants(tape, phi);
  Tensor px = Tensor::zeros({dataset.size(), cfg.input_dim});
  for (std::size_t i = 0; i < dataset.size(); ++i)
    std::copy(dataset[i].pixels.begin(), dataset[i].pixels.end(),
              px.data().begin() + i * cfg.input_dim);
  Tape::Id logits = classifier_logits_on_tape(tape, ids, tape.constant(std::move(px)), cfg);
  const Tensor& lg = tape.value(logits);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < cfg.classes; ++j)
      if (lg.at(i * cfg.classes + j) > lg.at(i * cfg.classes + best)) best = j;
    if (best == dataset[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

std::uint64_t param_tree_hash(const ParamTree& params) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, t] : params) {
    mix(name.data(), name.size());
    mix(t.data().data(), t.size() * sizeof(double));
  }
  return h;
}

}  // namespace dpd
