#include "dpd/prototype.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dpd/rng.hpp"

namespace dpd {

namespace {

double sq_dist(const LatentVector& a, const LatentVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest_centroid(const LatentVector& p, const std::vector<LatentVector>& centroids) {
  std::size_t best = 0;
  double best_d = sq_dist(p, centroids[0]);
  for (std::size_t k = 1; k < centroids.size(); ++k) {
    double d = sq_dist(p, centroids[k]);
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = k;
    }
  }
  return best;
}

std::vector<LatentVector> kmeanspp_init(const std::vector<LatentVector>& points, std::size_t k,
                                        std::mt19937_64& rng) {
  std::vector<LatentVector> centroids;
  std::uniform_int_distribution<std::size_t> first(0, points.size() - 1);
  centroids.push_back(points[first(rng)]);
  std::vector<double> d2(points.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, sq_dist(points[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      double acc = 0.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);  // all points coincide with existing centroids
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

double compute_inertia(const std::vector<LatentVector>& points,
                       const std::vector<std::size_t>& assignments,
                       const std::vector<LatentVector>& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) s += sq_dist(points[i], centroids[assignments[i]]);
  return s;
}

}  // namespace

namespace {

// One Lloyd descent from a k-means++ start.
Clustering kmeans_single(const std::vector<LatentVector>& points, std::size_t k,
                         std::uint64_t seed, const KMeansOptions& opts) {
  std::size_t dim = points[0].size();
  auto rng = make_rng(seed, "kmeans++");
  std::vector<LatentVector> centroids = kmeanspp_init(points, k, rng);
  std::vector<std::size_t> assignments(points.size(), 0);
  double prev_inertia = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
    for (std::size_t i = 0; i < points.size(); ++i)
      assignments[i] = nearest_centroid(points[i], centroids);

    // Reseed emptied clusters to the point farthest from its centroid.
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t a : assignments) counts[a]++;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t farthest = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (counts[assignments[i]] <= 1) continue;  // do not empty another cluster
        double d = sq_dist(points[i], centroids[assignments[i]]);
        if (d > best) {
          best = d;
          farthest = i;
        }
      }
      counts[assignments[farthest]]--;
      assignments[farthest] = c;
      counts[c] = 1;
      centroids[c] = points[farthest];
    }

    // Centroid update (Lloyd step).
    std::vector<LatentVector> next(k, LatentVector(dim, 0.0));
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t j = 0; j < dim; ++j) next[assignments[i]][j] += points[i][j];
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < dim; ++j) next[c][j] /= static_cast<double>(counts[c]);
      shift = std::max(shift, std::sqrt(sq_dist(next[c], centroids[c])));
      centroids[c] = std::move(next[c]);
    }

    double inertia = compute_inertia(points, assignments, centroids);
    if (inertia > prev_inertia + 1e-12)
      throw std::logic_error("kmeans: inertia increased across a Lloyd iteration");
    prev_inertia = inertia;
    if (shift < opts.tol) break;
  }

  // Final assignment pass so every point maps to its nearest centroid.
  for (std::size_t i = 0; i < points.size(); ++i)
    assignments[i] = nearest_centroid(points[i], centroids);

  Clustering out;
  out.k = k;
  out.assignments = std::move(assignments);
  out.inertia = compute_inertia(points, out.assignments, centroids);
  out.centroids = std::move(centroids);
  return out;
}

}  // namespace

Clustering kmeans(const std::vector<LatentVector>& points, std::size_t k, std::uint64_t seed,
                  const KMeansOptions& opts) {
  if (k < 1) throw std::invalid_argument("kmeans: K must be >= 1");
  if (points.size() < k)
    throw std::invalid_argument("kmeans: " + std::to_string(points.size()) +
                                " points cannot form " + std::to_string(k) + " clusters");
  if (opts.restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
  std::size_t dim = points[0].size();
  for (const auto& p : points)
    if (p.size() != dim) throw std::invalid_argument("kmeans: latent dimensions differ");

  // Lloyd only descends to a local optimum, so take the best of several
  // seeded starts; ties keep the earliest restart for determinism.
  Clustering best;
  for (std::size_t r = 0; r < opts.restarts; ++r) {
    Clustering c =
        kmeans_single(points, k, substream_seed(seed, "restart-" + std::to_string(r)), opts);
    if (r == 0 || c.inertia < best.inertia) best = std::move(c);
  }
  return best;
}

double margin(const LatentVector& zi, std::size_t k, const std::vector<LatentVector>& centroids) {
  if (k >= centroids.size()) throw std::invalid_argument("margin: cluster index out of range");
  double intra = std::sqrt(sq_dist(zi, centroids[k]));
  double inter = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    if (j == k) continue;
    inter = std::min(inter, std::sqrt(sq_dist(zi, centroids[j])));
  }
  return inter - intra;
}

std::vector<std::pair<std::size_t, std::size_t>> select_prototypes(
    const Clustering& clustering, const std::vector<LatentVector>& points) {
  if (clustering.assignments.size() != points.size())
    throw std::invalid_argument("select_prototypes: clustering does not match point count");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t c = 0; c < clustering.k; ++c) {
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t best_idx = points.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (clustering.assignments[i] != c) continue;
      // K=1 has no inter-cluster term; pick the medoid-like member instead.
      double score = clustering.k == 1 ? -std::sqrt(sq_dist(points[i], clustering.centroids[0]))
                                       : margin(points[i], c, clustering.centroids);
      if (score > best_score) {  // strict: ties keep the lowest point index
        best_score = score;
        best_idx = i;
      }
    }
    if (best_idx == points.size())
      throw std::logic_error("select_prototypes: empty cluster " + std::to_string(c));
    out.emplace_back(c, best_idx);
  }
  return out;
}

std::vector<PrototypePair> build_prototypes(const std::vector<ImageSample>& dataset,
                                            const Codec& codec, const Vocabulary& vocab,
                                            const std::vector<std::string>& class_names,
                                            const PrototypeOptions& opts) {
  std::size_t classes = class_names.size();
  std::vector<ClassLatents> per_class(classes);
  for (std::size_t c = 0; c < classes; ++c) per_class[c].cls = c;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const ImageSample& s = dataset[i];
    if (s.label >= classes) throw std::invalid_argument("build_prototypes: label out of range");
    per_class[s.label].indices.push_back(i);
    per_class[s.label].latents.push_back(codec.encode(s.pixels));
  }

  std::vector<PrototypePair> pairs;
  for (std::size_t c = 0; c < classes; ++c) {
    const ClassLatents& cl = per_class[c];
    if (cl.latents.size() < opts.k)
      throw std::invalid_argument("build_prototypes: class '" + class_names[c] + "' has " +
                                  std::to_string(cl.latents.size()) + " samples, needs >= " +
                                  std::to_string(opts.k));
    Clustering clustering =
        kmeans(cl.latents, opts.k, substream_seed(opts.seed, "kmeans-class-" + std::to_string(c)));
    auto selected = select_prototypes(clustering, cl.latents);

    // Cluster captions, then aggregate.
    std::vector<std::vector<Caption>> cluster_captions(opts.k);
    for (std::size_t i = 0; i < cl.latents.size(); ++i) {
      const ImageSample& s = dataset[cl.indices[i]];
      cluster_captions[clustering.assignments[i]].push_back(caption_image(
          s, class_names[c], vocab, codec.config().height, codec.config().width));
    }
    for (const auto& [k, local_idx] : selected) {
      PrototypePair p;
      p.latent = cl.latents[local_idx];
      p.caption = aggregate(cluster_captions[k], opts.keep_ratio, opts.caption_cap);
      p.cls = c;
      p.cluster = k;
      p.source_index = cl.indices[local_idx];
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

}  // namespace dpd
