// dpd: command-line harness for the prototype-guided diffusion distillation
// pipeline. Every subcommand reads one flat JSON config, derives its stage
// seeds from the root seed, and drops its artifacts plus a manifest into
// --out-dir so runs can be audited and reproduced.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dpd/harness.hpp"
#include "dpd/io.hpp"
#include "dpd/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Flat JSON run config")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out-dir", args.out_dir, "Artifact directory");
  cmd->add_option("--seed", args.seed, "Override the root seed");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

dpd::RunConfig load_config(const CommonArgs& args) {
  dpd::RunConfig cfg;
  if (!args.config_path.empty()) cfg = dpd::RunConfig::from_json(slurp(args.config_path));
  if (args.seed) cfg = cfg.with_seed(*args.seed);
  else cfg = cfg.with_seed(cfg.seed);
  fs::create_directories(args.out_dir);
  return cfg;
}

// Every stage drops a manifest next to its artifacts: the resolved config,
// its hash, and a content hash per output file.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const dpd::RunConfig& cfg, const std::vector<std::string>& outputs,
                    json extra = json::object()) {
  json m;
  m["command"] = command;
  m["config"] = json::parse(cfg.to_json());
  m["config_hash"] = cfg.hash();
  m["seed"] = cfg.seed;
  json files = json::object();
  for (const std::string& f : outputs) files[fs::path(f).filename().string()] = dpd::file_hash(f);
  m["outputs"] = files;
  for (auto& [k, v] : extra.items()) m[k] = v;
  spit(out_dir + "/" + command + ".manifest.json", m.dump(2));
}

std::string path_of(const CommonArgs& args, const std::string& name) {
  return args.out_dir + "/" + name;
}

dpd::ToyDataset require_dataset(const CommonArgs& args, const dpd::RunConfig& cfg) {
  std::string train_path = path_of(args, "train.dpds");
  std::string test_path = path_of(args, "test.dpds");
  if (fs::exists(train_path) && fs::exists(test_path)) {
    dpd::ToyDataset ds;
    dpd::LoadedImageSet tr = dpd::load_image_set(train_path);
    dpd::LoadedImageSet te = dpd::load_image_set(test_path);
    ds.train = std::move(tr.images);
    ds.train_modes = std::move(tr.modes);
    ds.test = std::move(te.images);
    ds.test_modes = std::move(te.modes);
    dpd::ToyDataset names = dpd::generate_toy_dataset(
        dpd::ToyDatasetSpec{cfg.data.classes, cfg.data.modes_per_class, 1, 1, cfg.data.noise_level,
                            cfg.data.height, cfg.data.width, cfg.data.seed});
    ds.class_names = names.class_names;
    return ds;
  }
  // Deterministic from the config, so regenerating is as good as loading.
  return dpd::generate_toy_dataset(cfg.data);
}

std::vector<dpd::TextEmbedding> caption_all(const std::vector<dpd::ImageSample>& images,
                                            const dpd::ToyDataset& ds, const dpd::Vocabulary& vocab,
                                            const dpd::RunConfig& cfg) {
  std::vector<dpd::TextEmbedding> out(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    dpd::Caption c = dpd::caption_image(images[i], ds.class_names[images[i].label], vocab,
                                        cfg.data.height, cfg.data.width);
    out[i] = dpd::embed(c, vocab);
  }
  return out;
}

void save_prototypes(const std::string& path, const std::vector<dpd::PrototypePair>& protos,
                     std::size_t latent_dim) {
  std::vector<dpd::Record> recs;
  dpd::Record latents;
  latents.name = "latents";
  latents.dims = {static_cast<std::uint32_t>(protos.size()),
                  static_cast<std::uint32_t>(latent_dim)};
  for (const auto& p : protos)
    latents.f64_data.insert(latents.f64_data.end(), p.latent.begin(), p.latent.end());
  recs.push_back(std::move(latents));

  auto u32_record = [&](const std::string& name, auto getter) {
    dpd::Record r;
    r.name = name;
    r.dtype = dpd::Record::Dtype::u32;
    r.dims = {static_cast<std::uint32_t>(protos.size())};
    for (const auto& p : protos) r.u32_data.push_back(static_cast<std::uint32_t>(getter(p)));
    recs.push_back(std::move(r));
  };
  u32_record("cls", [](const dpd::PrototypePair& p) { return p.cls; });
  u32_record("cluster", [](const dpd::PrototypePair& p) { return p.cluster; });
  u32_record("source_index", [](const dpd::PrototypePair& p) { return p.source_index; });

  dpd::Record lens, toks;
  lens.name = "caption_lens";
  lens.dtype = dpd::Record::Dtype::u32;
  toks.name = "caption_tokens";
  toks.dtype = dpd::Record::Dtype::u32;
  for (const auto& p : protos) {
    lens.u32_data.push_back(static_cast<std::uint32_t>(p.caption.tokens.size()));
    for (std::size_t t : p.caption.tokens) toks.u32_data.push_back(static_cast<std::uint32_t>(t));
  }
  lens.dims = {static_cast<std::uint32_t>(lens.u32_data.size())};
  toks.dims = {static_cast<std::uint32_t>(toks.u32_data.size())};
  recs.push_back(std::move(lens));
  recs.push_back(std::move(toks));
  dpd::write_records(path, recs);
}

std::vector<dpd::PrototypePair> load_prototypes(const std::string& path) {
  std::vector<dpd::Record> recs = dpd::read_records(path);
  auto find = [&](const std::string& name) -> const dpd::Record& {
    for (const auto& r : recs)
      if (r.name == name) return r;
    throw std::runtime_error(path + ": missing record '" + name + "'");
  };
  const dpd::Record& latents = find("latents");
  std::size_t n = latents.dims.at(0), d = latents.dims.at(1);
  const dpd::Record& cls = find("cls");
  const dpd::Record& cluster = find("cluster");
  const dpd::Record& source = find("source_index");
  const dpd::Record& lens = find("caption_lens");
  const dpd::Record& toks = find("caption_tokens");
  std::vector<dpd::PrototypePair> protos(n);
  std::size_t tok_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    protos[i].latent.assign(latents.f64_data.begin() + i * d,
                            latents.f64_data.begin() + (i + 1) * d);
    protos[i].cls = cls.u32_data.at(i);
    protos[i].cluster = cluster.u32_data.at(i);
    protos[i].source_index = source.u32_data.at(i);
    for (std::uint32_t k = 0; k < lens.u32_data.at(i); ++k)
      protos[i].caption.tokens.push_back(toks.u32_data.at(tok_pos++));
  }
  return protos;
}

std::vector<dpd::PrototypePair> build_or_load_prototypes(const CommonArgs& args,
                                                         const dpd::RunConfig& cfg,
                                                         const dpd::ToyDataset& ds,
                                                         const dpd::Codec& codec,
                                                         const dpd::Vocabulary& vocab) {
  std::string path = path_of(args, "prototypes.dpds");
  if (fs::exists(path)) return load_prototypes(path);
  dpd::PrototypeOptions popts;
  popts.k = cfg.distill.ipc;
  popts.keep_ratio = cfg.keep_ratio;
  popts.caption_cap = cfg.caption_cap;
  popts.seed = dpd::substream_seed(cfg.seed, "prototype");
  return dpd::build_prototypes(ds.train, codec, vocab, ds.class_names, popts);
}

int cmd_gen_data(const CommonArgs& args) {
  dpd::RunConfig cfg = load_config(args);
  dpd::ToyDataset ds = dpd::generate_toy_dataset(cfg.data);
  std::string train_path = path_of(args, "train.dpds");
  std::string test_path = path_of(args, "test.dpds");
  dpd::save_image_set(train_path, ds.train, cfg.data.height, cfg.data.width, ds.train_modes);
  dpd::save_image_set(test_path, ds.test, cfg.data.height, cfg.data.width, ds.test_modes);
  json extra;
  extra["class_names"] = ds.class_names;
  extra["train_count"] = ds.train.size();
  extra["test_count"] = ds.test.size();
  write_manifest(args.out_dir, "gen-data", cfg, {train_path, test_path}, extra);
  std::cout << "wrote " << train_path << " (" << ds.train.size() << ") and " << test_path << " ("
            << ds.test.size() << ")\n";
  return 0;
}

int cmd_train_classifier(const CommonArgs& args) {
  dpd::RunConfig cfg = load_config(args);
  dpd::ToyDataset ds = require_dataset(args, cfg);
  dpd::ClassifierConfig ccfg = cfg.classifier_config();
  dpd::ParamTree phi = dpd::train_classifier(ds.train, ccfg, cfg.pretrain);
  double train_oa = 100.0 * dpd::classifier_accuracy(phi, ds.train, ccfg);
  double test_oa = 100.0 * dpd::classifier_accuracy(phi, ds.test, ccfg);
  std::string path = path_of(args, "classifier.dpds");
  dpd::save_param_tree(path, phi);
  json extra;
  extra["train_oa"] = train_oa;
  extra["test_oa"] = test_oa;
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(dpd::param_tree_hash(phi)));
  extra["param_hash"] = hash_hex;
  write_manifest(args.out_dir, "train-classifier", cfg, {path}, extra);
  std::printf("classifier: train OA %.2f%%, test OA %.2f%% -> %s\n", train_oa, test_oa,
              path.c_str());
  return 0;
}

int cmd_train_diffusion(const CommonArgs& args) {
  dpd::RunConfig cfg = load_config(args);
  std::string phi_path = path_of(args, "classifier.dpds");
  if (!fs::exists(phi_path))
    throw std::runtime_error(phi_path + " not found; run train-classifier first");
  dpd::ToyDataset ds = require_dataset(args, cfg);
  dpd::Codec codec(cfg.codec_config());
  dpd::Vocabulary vocab(cfg.vocabulary_config(ds.class_names));
  dpd::ParamTree phi = dpd::load_param_tree(phi_path);
  std::uint64_t phi_hash = dpd::param_tree_hash(phi);
  std::vector<dpd::TextEmbedding> embeddings = caption_all(ds.train, ds, vocab, cfg);
  dpd::TrainResult tr = dpd::train_diffusion(ds.train, embeddings, phi, cfg.diffusion, codec,
                                             cfg.denoiser_config(), cfg.classifier_config());
  if (dpd::param_tree_hash(phi) != phi_hash)
    throw std::logic_error("frozen classifier was mutated during diffusion training");
  std::string path = path_of(args, "denoiser.dpds");
  dpd::save_param_tree(path, tr.theta);
  spit(path_of(args, "vocab.json"), vocab.dump_json());
  json extra;
  extra["steps"] = tr.history.size();
  if (!tr.history.empty()) {
    extra["final_loss"] = tr.history.back().total;
    extra["final_diffusion_loss"] = tr.history.back().diffusion;
    extra["final_cls_loss"] = tr.history.back().cls;
  }
  write_manifest(args.out_dir, "train-diffusion", cfg, {path, path_of(args, "vocab.json")},
                 extra);
  if (!tr.history.empty())
    std::printf("denoiser: %zu steps, final loss %.6f -> %s\n", tr.history.size(),
                tr.history.back().total, path.c_str());
  return 0;
}

int cmd_prototypes(const CommonArgs& args) {
  dpd::RunConfig cfg = load_config(args);
  dpd::ToyDataset ds = require_dataset(args, cfg);
  dpd::Codec codec(cfg.codec_config());
  dpd::Vocabulary vocab(cfg.vocabulary_config(ds.class_names));
  dpd::PrototypeOptions popts;
  popts.k = cfg.distill.ipc;
  popts.keep_ratio = cfg.keep_ratio;
  popts.caption_cap = cfg.caption_cap;
  popts.seed = dpd::substream_seed(cfg.seed, "prototype");
  std::vector<dpd::PrototypePair> protos =
      dpd::build_prototypes(ds.train, codec, vocab, ds.class_names, popts);
  std::string path = path_of(args, "prototypes.dpds");
  save_prototypes(path, protos, cfg.latent_dim);

  json plist = json::array();
  for (const auto& p : protos) {
    json e;
    e["class"] = ds.class_names[p.cls];
    e["cluster"] = p.cluster;
    e["source_index"] = p.source_index;
    json tokens = json::array();
    for (std::size_t t : p.caption.tokens) tokens.push_back(vocab.token(t));
    e["caption"] = tokens;
    plist.push_back(e);
  }
  spit(path_of(args, "prototypes.json"), plist.dump(2));
  json extra;
  extra["count"] = protos.size();
  write_manifest(args.out_dir, "prototypes", cfg, {path, path_of(args, "prototypes.json")},
                 extra);
  std::cout << "wrote " << protos.size() << " prototype pairs -> " << path << "\n";
  return 0;
}

int cmd_distill(const CommonArgs& args) {
  dpd::RunConfig cfg = load_config(args);
  std::string theta_path = path_of(args, "denoiser.dpds");
  if (!fs::exists(theta_path))
    throw std::runtime_error(theta_path + " not found; run train-diffusion first");
  dpd::ToyDataset ds = require_dataset(args, cfg);
  dpd::Codec codec(cfg.codec_config());
  dpd::Vocabulary vocab(cfg.vocabulary_config(ds.class_names));
  dpd::ParamTree theta = dpd::load_param_tree(theta_path);
  std::vector<dpd::PrototypePair> protos;
  if (cfg.distill.prototype_init) protos = build_or_load_prototypes(args, cfg, ds, codec, vocab);
  dpd::NoiseSchedule sched =
      dpd::build_schedule(cfg.diffusion.t_train, cfg.diffusion.beta_start, cfg.diffusion.beta_end);
  dpd::DistilledDataset dd = dpd::distill(protos, theta, vocab, codec, sched,
                                          cfg.denoiser_config(), cfg.distill, cfg.data.classes);
  std::string path = path_of(args, "distilled.dpds");
  dpd::save_image_set(path, dd.samples, cfg.data.height, cfg.data.width);
  spit(path_of(args, "distilled.manifest.json"), dd.manifest_json);
  json extra;
  extra["count"] = dd.samples.size();
  write_manifest(args.out_dir, "distill", cfg, {path}, extra);
  std::cout << "wrote " << dd.samples.size() << " distilled images -> " << path << "\n";
  return 0;
}

int cmd_evaluate(const CommonArgs& args) {
  dpd::RunConfig cfg = load_config(args);
  std::string distilled_path = path_of(args, "distilled.dpds");
  if (!fs::exists(distilled_path))
    throw std::runtime_error(distilled_path + " not found; run distill first");
  dpd::ToyDataset ds = require_dataset(args, cfg);
  dpd::LoadedImageSet distilled = dpd::load_image_set(distilled_path);
  dpd::EvalReport report =
      dpd::evaluate(distilled.images, ds.test, cfg.eval.repeats, cfg.classifier_config(),
                    cfg.eval.train, dpd::substream_seed(cfg.seed, "eval"));
  report.ipc = cfg.distill.ipc;
  report.ratio = static_cast<double>(distilled.images.size()) / static_cast<double>(ds.train.size());
  report.config_hash = cfg.hash();
  std::string path = path_of(args, "report.json");
  spit(path, report.to_json());
  write_manifest(args.out_dir, "evaluate", cfg, {path});
  std::printf("distilled-set OA: %.2f%% +/- %.2f%% over %zu repeats -> %s\n", report.mean,
              report.stddev, cfg.eval.repeats, path.c_str());
  return 0;
}

int cmd_pipeline(const CommonArgs& args) {
  dpd::RunConfig cfg = load_config(args);
  dpd::PipelineResult res = dpd::run_pipeline(cfg);
  dpd::save_param_tree(path_of(args, "classifier.dpds"), res.phi);
  dpd::save_param_tree(path_of(args, "denoiser.dpds"), res.theta);
  dpd::save_image_set(path_of(args, "distilled.dpds"), res.distilled.samples, cfg.data.height,
                      cfg.data.width);
  spit(path_of(args, "distilled.manifest.json"), res.distilled.manifest_json);
  spit(path_of(args, "report.json"), res.report.to_json());
  json extra;
  extra["classifier_test_oa"] = res.phi_test_accuracy;
  extra["distilled_oa_mean"] = res.report.mean;
  extra["distilled_oa_std"] = res.report.stddev;
  write_manifest(args.out_dir, "pipeline", cfg,
                 {path_of(args, "classifier.dpds"), path_of(args, "denoiser.dpds"),
                  path_of(args, "distilled.dpds"), path_of(args, "report.json")},
                 extra);
  std::printf("pipeline: classifier OA %.2f%%, distilled-set OA %.2f%% +/- %.2f%%\n",
              res.phi_test_accuracy, res.report.mean, res.report.stddev);
  return 0;
}

int cmd_ablate(const CommonArgs& args, std::size_t num_seeds) {
  dpd::RunConfig cfg = load_config(args);
  dpd::AblationReport report = dpd::ablation_suite(cfg, num_seeds);
  spit(path_of(args, "ablation.json"), report.to_json());
  spit(path_of(args, "ablation.md"), report.to_markdown());
  write_manifest(args.out_dir, "ablate", cfg,
                 {path_of(args, "ablation.json"), path_of(args, "ablation.md")});
  std::cout << report.to_markdown();
  return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& param, const std::vector<double>& values,
              std::size_t num_seeds) {
  dpd::RunConfig cfg = load_config(args);
  dpd::SweepReport report = dpd::sweep(param, values, cfg, num_seeds);
  spit(path_of(args, "sweep-" + param + ".json"), report.to_json());
  spit(path_of(args, "sweep-" + param + ".md"), report.to_markdown());
  write_manifest(args.out_dir, "sweep", cfg,
                 {path_of(args, "sweep-" + param + ".json")});
  std::cout << report.to_markdown();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prototype-guided diffusion dataset distillation"};
  app.require_subcommand(1);

  CommonArgs args;
  std::size_t num_seeds = 5;
  std::string sweep_param;
  std::vector<double> sweep_values;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate the procedural toy dataset");
  CLI::App* tc = app.add_subcommand("train-classifier", "Pretrain the frozen classifier");
  CLI::App* td = app.add_subcommand("train-diffusion", "Train the conditional denoiser");
  CLI::App* pr = app.add_subcommand("prototypes", "Cluster latents and select prototype pairs");
  CLI::App* di = app.add_subcommand("distill", "Generate the distilled dataset");
  CLI::App* ev = app.add_subcommand("evaluate", "Score a distilled set on the real test split");
  CLI::App* ab = app.add_subcommand("ablate", "Cumulative component ablation over paired seeds");
  CLI::App* sw = app.add_subcommand("sweep", "Hyperparameter sweep");
  CLI::App* pl = app.add_subcommand("pipeline", "All stages end to end");

  for (CLI::App* cmd : {gen, tc, td, pr, di, ev, ab, sw, pl}) add_common(cmd, args);
  ab->add_option("--seeds", num_seeds, "Number of paired seeds");
  sw->add_option("--seeds", num_seeds, "Number of paired seeds");
  sw->add_option("--param", sweep_param, "lambda, sampler_steps, or ipc")->required();
  sw->add_option("--values", sweep_values, "Sweep values")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(args);
    if (tc->parsed()) return cmd_train_classifier(args);
    if (td->parsed()) return cmd_train_diffusion(args);
    if (pr->parsed()) return cmd_prototypes(args);
    if (di->parsed()) return cmd_distill(args);
    if (ev->parsed()) return cmd_evaluate(args);
    if (ab->parsed()) return cmd_ablate(args, num_seeds);
    if (sw->parsed()) return cmd_sweep(args, sweep_param, sweep_values, num_seeds);
    if (pl->parsed()) return cmd_pipeline(args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
