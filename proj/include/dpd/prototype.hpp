#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dpd/codec.hpp"
#include "dpd/conditioning.hpp"
#include "dpd/diffusion.hpp"

namespace dpd {

// Per-class latent collection; indices refer back into the source dataset.
struct ClassLatents {
  std::size_t cls = 0;
  std::vector<std::size_t> indices;
  std::vector<LatentVector> latents;
};

struct Clustering {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;  // point -> cluster in [0,k)
  std::vector<LatentVector> centroids;
  double inertia = 0.0;
};

struct KMeansOptions {
  std::size_t max_iters = 100;
  double tol = 1e-6;
  std::size_t restarts = 10;  // best-of-n k-means++ starts
};

// Best-inertia-of-restarts Lloyd iterations with k-means++ initialization.
// Assignment ties break to the lowest cluster index; an emptied cluster is
// reseeded to the point farthest from its assigned centroid.
Clustering kmeans(const std::vector<LatentVector>& points, std::size_t k, std::uint64_t seed,
                  const KMeansOptions& opts = {});

// min_{j != k} ||zi - mu_j|| - ||zi - mu_k||. With a single centroid the
// inter term is undefined; selection then falls back to the medoid rule.
double margin(const LatentVector& zi, std::size_t k, const std::vector<LatentVector>& centroids);

// Per cluster, the member index (into points) with maximal margin; ties
// break to the lowest point index. Returns (cluster, point index) pairs.
std::vector<std::pair<std::size_t, std::size_t>> select_prototypes(
    const Clustering& clustering, const std::vector<LatentVector>& points);

struct PrototypePair {
  LatentVector latent;       // an actual member of the cluster, not a centroid
  Caption caption;           // aggregated cluster caption
  std::size_t cls = 0;
  std::size_t cluster = 0;
  std::size_t source_index = 0;  // index into the source dataset
};

struct PrototypeOptions {
  std::size_t k = 10;  // = IPC
  double keep_ratio = 0.5;
  std::size_t caption_cap = 8;
  std::uint64_t seed = 0;
};

// Algorithm: per class encode latents, cluster, pick margin-maximal members,
// and aggregate the cluster captions. Returns C*K pairs ordered by
// (class, cluster).
std::vector<PrototypePair> build_prototypes(const std::vector<ImageSample>& dataset,
                                            const Codec& codec, const Vocabulary& vocab,
                                            const std::vector<std::string>& class_names,
                                            const PrototypeOptions& opts);

}  // namespace dpd
