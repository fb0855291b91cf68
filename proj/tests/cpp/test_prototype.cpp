#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dpd/prototype.hpp"
#include "dpd/rng.hpp"

using dpd::Clustering;
using dpd::LatentVector;

namespace {

double dist2(const LatentVector& a, const LatentVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Exhaustive optimal k-partition inertia for tiny instances.
double brute_force_inertia(const std::vector<LatentVector>& pts, std::size_t k) {
  std::size_t n = pts.size(), d = pts[0].size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> assign(n, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= k;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = c % k;
      c /= k;
    }
    std::vector<LatentVector> mu(k, LatentVector(d, 0.0));
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++cnt[assign[i]];
      for (std::size_t j = 0; j < d; ++j) mu[assign[i]][j] += pts[i][j];
    }
    bool ok = true;
    for (std::size_t c2 = 0; c2 < k; ++c2) ok = ok && cnt[c2] > 0;
    if (!ok) continue;
    for (std::size_t c2 = 0; c2 < k; ++c2)
      for (std::size_t j = 0; j < d; ++j) mu[c2][j] /= static_cast<double>(cnt[c2]);
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += dist2(pts[i], mu[assign[i]]);
    best = std::min(best, inertia);
  }
  return best;
}

std::vector<LatentVector> random_points(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<LatentVector> pts(n, LatentVector(d));
  for (auto& p : pts)
    for (double& v : p) v = g(rng);
  return pts;
}

}  // namespace

TEST_CASE("kmeans reaches the brute-force optimum on most tiny instances") {
  std::size_t optimal = 0, trials = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto rng = dpd::make_rng(seed, "bf");
    std::size_t n = 5 + seed % 3, d = 2, k = 2 + seed % 2;
    std::vector<LatentVector> pts = random_points(n, d, rng);
    Clustering c = dpd::kmeans(pts, k, seed);
    double best = brute_force_inertia(pts, k);
    REQUIRE(c.inertia >= best - 1e-9);
    if (c.inertia <= best * (1.0 + 1e-9) + 1e-12) ++optimal;
    ++trials;
  }
  // Lloyd with k-means++ can land in a local optimum, but rarely at this size.
  CHECK(optimal >= trials * 9 / 10);
}

TEST_CASE("kmeans inertia equals the recomputed assignment cost") {
  auto rng = dpd::make_rng(4, "recompute");
  std::vector<LatentVector> pts = random_points(40, 3, rng);
  Clustering c = dpd::kmeans(pts, 5, 9);
  REQUIRE(c.assignments.size() == pts.size());
  REQUIRE(c.centroids.size() == 5);
  double inertia = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    // Each point must sit in its nearest centroid's cell.
    double assigned = dist2(pts[i], c.centroids[c.assignments[i]]);
    for (std::size_t j = 0; j < c.centroids.size(); ++j)
      CHECK(assigned <= dist2(pts[i], c.centroids[j]) + 1e-9);
    inertia += assigned;
  }
  CHECK(inertia == doctest::Approx(c.inertia).epsilon(1e-9));
}

TEST_CASE("kmeans recovers two well-separated blobs exactly") {
  auto rng = dpd::make_rng(8, "blobs");
  std::normal_distribution<double> g(0.0, 0.05);
  std::vector<LatentVector> pts;
  for (int i = 0; i < 20; ++i) pts.push_back({g(rng), g(rng)});
  for (int i = 0; i < 20; ++i) pts.push_back({10.0 + g(rng), g(rng)});
  Clustering c = dpd::kmeans(pts, 2, 3);
  for (int i = 1; i < 20; ++i) CHECK(c.assignments[i] == c.assignments[0]);
  for (int i = 21; i < 40; ++i) CHECK(c.assignments[i] == c.assignments[20]);
  CHECK(c.assignments[0] != c.assignments[20]);
}

TEST_CASE("kmeans is deterministic per seed") {
  auto rng = dpd::make_rng(10, "det");
  std::vector<LatentVector> pts = random_points(30, 4, rng);
  Clustering a = dpd::kmeans(pts, 4, 77);
  Clustering b = dpd::kmeans(pts, 4, 77);
  CHECK(a.assignments == b.assignments);
  CHECK(a.inertia == b.inertia);
}

TEST_CASE("margin matches the hand-computed value") {
  std::vector<LatentVector> centroids = {{0.0, 0.0}, {10.0, 0.0}};
  CHECK(dpd::margin({1.0, 0.0}, 0, centroids) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(dpd::margin({1.0, 0.0}, 1, centroids) == doctest::Approx(-8.0).epsilon(1e-12));
  CHECK_THROWS_AS(dpd::margin({1.0, 0.0}, 2, centroids), std::invalid_argument);
}

TEST_CASE("selected prototypes are margin-maximal members of their clusters") {
  auto rng = dpd::make_rng(14, "select");
  std::vector<LatentVector> pts = random_points(30, 2, rng);
  Clustering c = dpd::kmeans(pts, 3, 5);
  auto picks = dpd::select_prototypes(c, pts);
  REQUIRE(picks.size() == 3);
  for (auto [cluster, idx] : picks) {
    CHECK(c.assignments[idx] == cluster);
    double best = dpd::margin(pts[idx], cluster, c.centroids);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (c.assignments[i] != cluster) continue;
      double m = dpd::margin(pts[i], cluster, c.centroids);
      CHECK(m <= best + 1e-12);
      if (m == best) CHECK(idx <= i);  // ties break to the lowest index
    }
  }
}

TEST_CASE("single-cluster selection falls back to the medoid") {
  auto rng = dpd::make_rng(15, "medoid");
  std::vector<LatentVector> pts = random_points(12, 2, rng);
  Clustering c = dpd::kmeans(pts, 1, 5);
  auto picks = dpd::select_prototypes(c, pts);
  REQUIRE(picks.size() == 1);
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (dist2(pts[i], c.centroids[0]) < dist2(pts[best], c.centroids[0])) best = i;
  CHECK(picks[0].second == best);
}

TEST_CASE("prototype choice is invariant to uniform scaling") {
  auto rng = dpd::make_rng(16, "scale");
  std::vector<LatentVector> pts = random_points(24, 3, rng);
  std::vector<LatentVector> scaled = pts;
  for (auto& p : scaled)
    for (double& v : p) v *= 7.5;
  Clustering a = dpd::kmeans(pts, 3, 21);
  Clustering b = dpd::kmeans(scaled, 3, 21);
  CHECK(a.assignments == b.assignments);
  CHECK(dpd::select_prototypes(a, pts) == dpd::select_prototypes(b, scaled));
}

TEST_CASE("kmeans validates its inputs") {
  std::vector<LatentVector> pts = {{0.0}, {1.0}};
  CHECK_THROWS_AS(dpd::kmeans(pts, 3, 0), std::invalid_argument);
  CHECK_THROWS_AS(dpd::kmeans({}, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(dpd::kmeans(pts, 0, 0), std::invalid_argument);
}
