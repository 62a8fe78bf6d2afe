#pragma once

// Seeded k-means over 2D points and the Adjusted Rand Index.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "cartograph/common.hpp"

namespace cartograph {

struct Clustering {
  std::vector<int> labels;
  int k = 0;
  std::vector<Point2> centroids;
  double inertia = 0.0;
  std::uint64_t seed = 0;
};

struct KMeansOptions {
  int max_iterations = 300;
  int restarts = 1;
};

namespace detail {

inline std::size_t nearest_centroid(const Point2& p, std::span<const Point2> centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

inline std::vector<Point2> kmeanspp_init(std::span<const Point2> points, int k, std::mt19937_64& rng) {
  const std::size_t n = points.size();
  std::vector<Point2> centroids;
  centroids.reserve(std::size_t(k));
  centroids.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centroids[0]);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centroids.size() < std::size_t(k)) {
    double total = 0.0;
    for (double d : d2) total += d;
    // total > 0 because k <= number of distinct points.
    double target = unit(rng) * total;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      target -= d2[i];
      if (target < 0.0) break;
    }
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
  }
  return centroids;
}

struct KMeansState {
  std::vector<int> labels;
  std::vector<Point2> centroids;
  std::vector<std::size_t> sizes;
};

inline void recompute_centroids(std::span<const Point2> points, KMeansState& s) {
  const std::size_t k = s.centroids.size();
  std::vector<double> sx(k, 0.0), sy(k, 0.0);
  s.sizes.assign(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = std::size_t(s.labels[i]);
    sx[c] += points[i].x;
    sy[c] += points[i].y;
    ++s.sizes[c];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (s.sizes[c] > 0) s.centroids[c] = {sx[c] / double(s.sizes[c]), sy[c] / double(s.sizes[c])};
}

inline double inertia_of(std::span<const Point2> points, const KMeansState& s) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    total += squared_distance(points[i], s.centroids[std::size_t(s.labels[i])]);
  return total;
}

// Moves the point farthest from its centroid into each empty cluster.
inline void repair_empty(std::span<const Point2> points, KMeansState& s) {
  for (std::size_t c = 0; c < s.centroids.size(); ++c) {
    if (s.sizes[c] > 0) continue;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (s.sizes[std::size_t(s.labels[i])] < 2) continue;
      const double d = squared_distance(points[i], s.centroids[std::size_t(s.labels[i])]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    s.labels[far] = int(c);
    recompute_centroids(points, s);
  }
}

// Single-point transfers (Hartigan's criterion) that strictly lower inertia.
// Polishes Lloyd fixpoints such as three-vs-one splits of a square.
inline bool hartigan_pass(std::span<const Point2> points, KMeansState& s) {
  bool moved = false;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto from = std::size_t(s.labels[i]);
    const double n_from = double(s.sizes[from]);
    if (n_from < 2) continue;
    const double removal_gain = n_from / (n_from - 1.0) * squared_distance(points[i], s.centroids[from]);
    std::size_t best = from;
    double best_cost = removal_gain;
    for (std::size_t c = 0; c < s.centroids.size(); ++c) {
      if (c == from) continue;
      const double n_to = double(s.sizes[c]);
      const double cost = n_to / (n_to + 1.0) * squared_distance(points[i], s.centroids[c]);
      if (cost < best_cost * (1.0 - 1e-12)) {
        best_cost = cost;
        best = c;
      }
    }
    if (best != from) {
      s.labels[i] = int(best);
      recompute_centroids(points, s);
      moved = true;
    }
  }
  return moved;
}

inline Clustering kmeans_single(std::span<const Point2> points, int k, std::uint64_t seed, int max_iterations) {
  std::mt19937_64 rng(seed);
  KMeansState s;
  s.centroids = kmeanspp_init(points, k, rng);
  s.labels.assign(points.size(), -1);

  double previous = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const int c = int(nearest_centroid(points[i], s.centroids));
      if (c != s.labels[i]) {
        s.labels[i] = c;
        changed = true;
      }
    }
    recompute_centroids(points, s);
    repair_empty(points, s);
    const double current = inertia_of(points, s);
    assert(current <= previous * (1.0 + 1e-12) + 1e-12 && "k-means inertia increased");
    previous = current;
    if (!changed) break;
  }
  while (hartigan_pass(points, s)) {
  }

  Clustering out;
  out.labels = std::move(s.labels);
  out.k = k;
  out.centroids = std::move(s.centroids);
  out.seed = seed;
  KMeansState tmp{out.labels, out.centroids, {}};
  out.inertia = inertia_of(points, tmp);
  return out;
}

}  // namespace detail

inline std::size_t count_distinct(std::span<const Point2> points) {
  std::set<std::pair<double, double>> distinct;
  for (const auto& p : points) distinct.emplace(p.x, p.y);
  return distinct.size();
}

// k-means++ seeding, Lloyd iterations to a fixpoint (or the iteration cap),
// then single-point transfer polishing. With restarts > 1, seeds seed..seed+r-1
// are tried and the lowest inertia wins (ties to the lowest seed).
inline Clustering kmeans(std::span<const Point2> points, int k, std::uint64_t seed,
                         const KMeansOptions& options = {}) {
  if (k < 1) throw Error("k must be at least 1");
  const std::size_t distinct = count_distinct(points);
  if (std::size_t(k) > distinct)
    throw Error("k=" + std::to_string(k) + " exceeds the number of distinct points (" +
                std::to_string(distinct) + ")");
  Clustering best;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    auto candidate = detail::kmeans_single(points, k, seed + std::uint64_t(r), options.max_iterations);
    if (r == 0 || candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

inline Clustering kmeans(const std::vector<Point2>& points, int k, std::uint64_t seed,
                         const KMeansOptions& options = {}) {
  return kmeans(std::span<const Point2>(points), k, seed, options);
}

// Pair-counting ARI. Degenerate cases where the expected index equals its
// maximum (both partitions trivial) return 1.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size())
    throw Error("adjusted_rand_index: partitions have " + std::to_string(a.size()) + " and " +
                std::to_string(b.size()) + " documents");
  if (a.size() < 2) return 1.0;
  // Pair counts are integers, so the index is formed exactly and divided once:
  // ARI = (2 I P - 2 R C) / ((R + C) P - 2 R C) with P the total pair count.
  using Wide = __int128;
  std::map<std::pair<int, int>, std::uint64_t> joint;
  std::map<int, std::uint64_t> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  const auto pairs = [](std::uint64_t m) { return Wide(m) * Wide(m - 1) / 2; };
  Wide index = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [_, m] : joint) index += pairs(m);
  for (const auto& [_, m] : rows) sum_rows += pairs(m);
  for (const auto& [_, m] : cols) sum_cols += pairs(m);
  const Wide total = pairs(a.size());
  const Wide numerator = 2 * index * total - 2 * sum_rows * sum_cols;
  const Wide denominator = (sum_rows + sum_cols) * total - 2 * sum_rows * sum_cols;
  if (denominator == 0) return 1.0;
  return double(static_cast<long double>(numerator) / static_cast<long double>(denominator));
}

inline double adjusted_rand_index(const Clustering& a, const Clustering& b) {
  return adjusted_rand_index(std::span<const int>(a.labels), std::span<const int>(b.labels));
}

}  // namespace cartograph
