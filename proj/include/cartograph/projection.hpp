#pragma once

// 2D map coordinates from D-dimensional embeddings via exact t-SNE, and the
// rank-based trustworthiness score used to judge neighborhood preservation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cartograph/common.hpp"
#include "cartograph/embedding.hpp"

namespace cartograph {

struct Projection2D {
  std::vector<Point2> points;
  std::string method_tag;
  std::uint64_t seed = 0;
  std::map<std::string, double> params;
  bool degenerate = false;
};

struct TsneParams {
  double perplexity = 30.0;
  int iterations = 1000;
  // Unset: n / (4 * early_exaggeration), clamped to [50, 200]. Small inputs
  // oscillate at the full rate of 200.
  std::optional<double> learning_rate;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iteration = 250;
  double initial_sigma = 1e-4;
  int pca_dimensions = 50;

  std::map<std::string, double> as_map() const {
    return {{"perplexity", perplexity},
            {"iterations", static_cast<double>(iterations)},
            {"early_exaggeration", early_exaggeration},
            {"exaggeration_iterations", static_cast<double>(exaggeration_iterations)},
            {"pca_dimensions", static_cast<double>(pca_dimensions)}};
  }

  double effective_learning_rate(std::size_t n) const {
    if (learning_rate) return *learning_rate;
    return std::clamp(double(n) / (4.0 * early_exaggeration), 50.0, 200.0);
  }
};

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline RowMatrix to_matrix(const std::vector<Vector>& vectors) {
  const auto n = static_cast<Eigen::Index>(vectors.size());
  const auto d = static_cast<Eigen::Index>(vectors.empty() ? 0 : vectors.front().size());
  RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = vectors[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

// Centered data projected on its `dims` leading principal axes.
inline RowMatrix pca_reduce(const RowMatrix& x, int dims) {
  const RowMatrix centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / std::max<double>(1.0, double(x.rows() - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues come out ascending; take the last `dims` columns, largest first.
  const Eigen::Index d = cov.rows();
  Eigen::MatrixXd basis(d, dims);
  for (int c = 0; c < dims; ++c) basis.col(c) = solver.eigenvectors().col(d - 1 - c);
  return centered * basis;
}

inline std::vector<double> squared_distances(const RowMatrix& x) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (x.row(Eigen::Index(i)) - x.row(Eigen::Index(j))).squaredNorm();
      dist[i * n + j] = d;
      dist[j * n + i] = d;
    }
  return dist;
}

// Row-conditional Gaussian affinities whose entropy matches log(perplexity),
// found by bisection on the precision.
inline std::vector<double> conditional_affinities(const std::vector<double>& dist, std::size_t n,
                                                  double perplexity) {
  std::vector<double> p(n * n, 0.0);
  const double target = std::log(perplexity);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double min_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) min_d = std::min(min_d, dist[i * n + j]);

    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0;
      double weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
          row[j] = 0.0;
          continue;
        }
        const double shifted = dist[i * n + j] - min_d;
        row[j] = std::exp(-beta * shifted);
        sum += row[j];
        weighted += shifted * row[j];
      }
      // Shannon entropy (nats) of the normalized row; the shift cancels.
      const double entropy = std::log(sum) + beta * weighted / sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) p[i * n + j] = row[j] / sum;
  }
  return p;
}

}  // namespace detail

class Projector {
 public:
  virtual ~Projector() = default;
  virtual Projection2D project(const EmbeddedCorpus& ec, std::uint64_t seed) const = 0;
};

class TsneProjector final : public Projector {
 public:
  explicit TsneProjector(TsneParams params = {}) : params_(params) {}

  const TsneParams& params() const { return params_; }

  Projection2D project(const EmbeddedCorpus& ec, std::uint64_t seed) const override {
    const std::size_t n = ec.size();
    if (n < 3) throw Error("projection needs at least 3 documents, got " + std::to_string(n));
    if (ec.dimension() < 2) throw Error("projection needs embedding dimension >= 2");

    Projection2D out;
    out.method_tag = "tsne-exact";
    out.seed = seed;
    out.params = params_.as_map();
    out.points.assign(n, Point2{});

    const bool identical = std::all_of(ec.vectors.begin(), ec.vectors.end(),
                                       [&](const Vector& v) { return v == ec.vectors.front(); });
    if (identical) {
      warn("all embedding vectors are identical; every point is placed at the origin");
      out.degenerate = true;
      return out;
    }

    detail::RowMatrix x = detail::to_matrix(ec.vectors);
    if (x.cols() > params_.pca_dimensions) x = detail::pca_reduce(x, params_.pca_dimensions);

    const double perplexity = std::min(params_.perplexity, double(n - 1) / 3.0);
    out.params["effective_perplexity"] = perplexity;
    const double learning_rate = params_.effective_learning_rate(n);
    out.params["learning_rate"] = learning_rate;

    const auto dist = detail::squared_distances(x);
    auto p = detail::conditional_affinities(dist, n, perplexity);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double s = std::max((p[i * n + j] + p[j * n + i]) / (2.0 * double(n)),
                                  std::numeric_limits<double>::min());
        p[i * n + j] = s;
        p[j * n + i] = s;
      }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, params_.initial_sigma);
    std::vector<double> y(2 * n);
    for (auto& v : y) v = normal(rng);

    std::vector<double> update(2 * n, 0.0);
    std::vector<double> gains(2 * n, 1.0);
    std::vector<double> grad(2 * n);
    std::vector<double> num(n * n);

    for (int iter = 0; iter < params_.iterations; ++iter) {
      const double exaggeration = iter < params_.exaggeration_iterations ? params_.early_exaggeration : 1.0;
      const double momentum =
          iter < params_.momentum_switch_iteration ? params_.initial_momentum : params_.final_momentum;

      double num_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        num[i * n + i] = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
          const double dx = y[2 * i] - y[2 * j];
          const double dy = y[2 * i + 1] - y[2 * j + 1];
          const double q = 1.0 / (1.0 + dx * dx + dy * dy);
          num[i * n + j] = q;
          num[j * n + i] = q;
          num_sum += 2.0 * q;
        }
      }

      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double gx = 0.0;
        double gy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const double q = num[i * n + j];
          const double mult = (exaggeration * p[i * n + j] - q / num_sum) * q;
          gx += mult * (y[2 * i] - y[2 * j]);
          gy += mult * (y[2 * i + 1] - y[2 * j + 1]);
        }
        grad[2 * i] = 4.0 * gx;
        grad[2 * i + 1] = 4.0 * gy;
      }

      for (std::size_t k = 0; k < 2 * n; ++k) {
        const bool same_sign = (grad[k] > 0) == (update[k] > 0);
        gains[k] = same_sign ? std::max(gains[k] * 0.8, 0.01) : gains[k] + 0.2;
        update[k] = momentum * update[k] - learning_rate * gains[k] * grad[k];
        y[k] += update[k];
      }
      center(y);
    }

    center(y);
    for (std::size_t i = 0; i < n; ++i) {
      out.points[i] = {y[2 * i], y[2 * i + 1]};
      if (!std::isfinite(out.points[i].x) || !std::isfinite(out.points[i].y))
        throw Error("projection diverged to non-finite coordinates");
    }
    return out;
  }

 private:
  static void center(std::vector<double>& y) {
    const std::size_t n = y.size() / 2;
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += y[2 * i];
      my += y[2 * i + 1];
    }
    mx /= double(n);
    my /= double(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= mx;
      y[2 * i + 1] -= my;
    }
  }

  TsneParams params_;
};

inline Projection2D project_2d(const EmbeddedCorpus& ec, std::uint64_t seed, const TsneParams& params = {}) {
  return TsneProjector(params).project(ec, seed);
}

namespace detail {

// Neighbors of `i` ordered by distance, ties by index.
template <typename Dist>
std::vector<std::size_t> neighbor_order(std::size_t i, std::size_t n, Dist&& dist) {
  std::vector<std::size_t> order;
  order.reserve(n - 1);
  std::vector<double> d(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    order.push_back(j);
    d[j] = dist(i, j);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return d[a] != d[b] ? d[a] < d[b] : a < b;
  });
  return order;
}

}  // namespace detail

// Rank-based trustworthiness: 1 - 2/(n k (2n - 3k - 1)) * sum over points of
// (high-dimensional rank - k) for every low-dimensional k-NN intruder.
inline double trustworthiness(const std::vector<Vector>& high, const std::vector<Point2>& low, std::size_t k) {
  const std::size_t n = high.size();
  if (low.size() != n) throw Error("trustworthiness: point count mismatch");
  if (k == 0 || k >= n) throw Error("trustworthiness: k must satisfy 1 <= k < n");
  const double denom = double(n) * double(k) * (2.0 * double(n) - 3.0 * double(k) - 1.0);
  if (denom <= 0.0) throw Error("trustworthiness: k too large for n (need 3k < 2n - 1)");

  const auto high_dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t c = 0; c < high[a].size(); ++c) {
      const double diff = high[a][c] - high[b][c];
      s += diff * diff;
    }
    return s;
  };
  const auto low_dist = [&](std::size_t a, std::size_t b) { return squared_distance(low[a], low[b]); };

  double penalty = 0.0;
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto high_order = detail::neighbor_order(i, n, high_dist);
    for (std::size_t r = 0; r < high_order.size(); ++r) rank[high_order[r]] = r + 1;
    const auto low_order = detail::neighbor_order(i, n, low_dist);
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t j = low_order[r];
      if (rank[j] > k) penalty += double(rank[j] - k);
    }
  }
  return 1.0 - 2.0 / denom * penalty;
}

inline double trustworthiness(const EmbeddedCorpus& high, const Projection2D& low, std::size_t k) {
  return trustworthiness(high.vectors, low.points, k);
}

}  // namespace cartograph
