#pragma once

// Map geometry (convex hulls, KDE density grid) and the MapModel artifact the
// viewer consumes.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cartograph/clustering.hpp"
#include "cartograph/common.hpp"
#include "cartograph/projection.hpp"
#include "cartograph/topics.hpp"

namespace cartograph {

using Polygon = std::vector<Point2>;

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain. Counter-clockwise, collinear vertices dropped. A
// collinear input yields its two extreme points (with a warning).
inline Polygon convex_hull(std::vector<Point2> points) {
  if (points.empty()) throw Error("convex hull of an empty point set");
  std::sort(points.begin(), points.end(), [](const Point2& a, const Point2& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) return points;

  Polygon hull(2 * points.size());
  std::size_t k = 0;
  for (const auto& p : points) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) warn("convex hull input is collinear; returning a segment");
  return hull;
}

// True when p lies inside or on the boundary of a CCW convex polygon.
inline bool hull_contains(const Polygon& hull, const Point2& p, double eps = 1e-9) {
  if (hull.size() == 1) return squared_distance(hull[0], p) <= eps * eps;
  if (hull.size() == 2) {
    const double len2 = squared_distance(hull[0], hull[1]);
    if (std::abs(cross(hull[0], hull[1], p)) > eps * std::sqrt(len2)) return false;
    const double t = ((p.x - hull[0].x) * (hull[1].x - hull[0].x) + (p.y - hull[0].y) * (hull[1].y - hull[0].y)) / len2;
    return t >= -eps && t <= 1.0 + eps;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    const double scale = std::sqrt(squared_distance(a, b));
    if (cross(a, b, p) < -eps * std::max(1.0, scale)) return false;
  }
  return true;
}

struct DensityGrid {
  Point2 origin;     // lower-left corner of cell (0, 0)
  Point2 cell_size;  // dx, dy
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> values;  // row-major, values[iy * nx + ix]
  double bandwidth = 0.0;

  double at(std::size_t ix, std::size_t iy) const { return values[iy * nx + ix]; }
  double integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * cell_size.x * cell_size.y;
  }
};

// Scott's rule per axis (n^(-1/6) * sample sd), combined by geometric mean.
inline double scott_bandwidth(const std::vector<Point2>& points) {
  const auto n = double(points.size());
  if (points.size() < 2) return 0.0;
  double mx = 0, my = 0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= n;
  my /= n;
  double vx = 0, vy = 0;
  for (const auto& p : points) {
    vx += (p.x - mx) * (p.x - mx);
    vy += (p.y - my) * (p.y - my);
  }
  const double factor = std::pow(n, -1.0 / 6.0);
  const double hx = factor * std::sqrt(vx / (n - 1.0));
  const double hy = factor * std::sqrt(vy / (n - 1.0));
  if (hx > 0 && hy > 0) return std::sqrt(hx * hy);
  return std::max(hx, hy);
}

// Isotropic Gaussian KDE sampled at cell centers over the bounding box padded
// 5% per side.
inline DensityGrid kde_grid(const std::vector<Point2>& points, std::optional<double> bandwidth = std::nullopt,
                            std::size_t resolution = 100) {
  if (points.empty()) throw Error("kde_grid needs at least one point");
  if (resolution == 0) throw Error("kde_grid resolution must be positive");

  double min_x = points[0].x, max_x = points[0].x, min_y = points[0].y, max_y = points[0].y;
  for (const auto& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  double h = bandwidth.value_or(scott_bandwidth(points));
  if (!(h > 0.0) || !std::isfinite(h)) {
    const double extent = std::max(max_x - min_x, max_y - min_y);
    h = extent > 0.0 ? 0.1 * extent : 1.0;
  }
  // A flat axis gets a window of +-4 bandwidths so the kernel mass fits.
  if (max_x - min_x <= 0.0) {
    min_x -= 4.0 * h;
    max_x += 4.0 * h;
  }
  if (max_y - min_y <= 0.0) {
    min_y -= 4.0 * h;
    max_y += 4.0 * h;
  }
  const double pad_x = 0.05 * (max_x - min_x);
  const double pad_y = 0.05 * (max_y - min_y);
  min_x -= pad_x;
  max_x += pad_x;
  min_y -= pad_y;
  max_y += pad_y;

  DensityGrid grid;
  grid.nx = grid.ny = resolution;
  grid.origin = {min_x, min_y};
  grid.cell_size = {(max_x - min_x) / double(resolution), (max_y - min_y) / double(resolution)};
  grid.bandwidth = h;
  grid.values.assign(resolution * resolution, 0.0);

  const double norm = 1.0 / (2.0 * std::numbers::pi * h * h * double(points.size()));
  const double inv = 1.0 / (2.0 * h * h);
  for (std::size_t iy = 0; iy < grid.ny; ++iy) {
    const double cy = min_y + (double(iy) + 0.5) * grid.cell_size.y;
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const double cx = min_x + (double(ix) + 0.5) * grid.cell_size.x;
      double s = 0.0;
      for (const auto& p : points) s += std::exp(-((p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy)) * inv);
      grid.values[iy * grid.nx + ix] = s * norm;
    }
  }
  return grid;
}

struct MapPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  int cluster = 0;

  friend bool operator==(const MapPoint&, const MapPoint&) = default;
};

struct ClusterHull {
  int cluster = 0;
  Polygon vertices;

  friend bool operator==(const ClusterHull&, const ClusterHull&) = default;
};

struct MapModel {
  int version = 1;
  std::string embedder;
  std::uint64_t seed = 0;
  int k = 0;
  std::vector<MapPoint> points;
  std::vector<Topic> topics;
  std::vector<ClusterHull> hulls;
  DensityGrid density;
};

struct MapBuildOptions {
  std::size_t density_resolution = 100;
  std::optional<double> bandwidth;
};

inline MapModel build_map(const Corpus& corpus, const Projection2D& projection, const Clustering& clustering,
                          std::vector<Topic> topics, const std::string& embedder,
                          const MapBuildOptions& options = {}) {
  const std::size_t n = corpus.size();
  if (projection.points.size() != n || clustering.labels.size() != n)
    throw Error("build_map: corpus, projection and clustering sizes differ");
  if (topics.size() != std::size_t(clustering.k)) throw Error("build_map: one topic per cluster expected");

  MapModel map;
  map.embedder = embedder;
  map.seed = projection.seed;
  map.k = clustering.k;
  std::vector<std::vector<Point2>> members(std::size_t(clustering.k));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = projection.points[i];
    map.points.push_back({corpus.documents[i].id, p.x, p.y, clustering.labels[i]});
    members[std::size_t(clustering.labels[i])].push_back(p);
  }
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].empty()) throw Error("build_map: cluster " + std::to_string(c) + " is empty");
    double sx = 0, sy = 0;
    for (const auto& p : members[c]) {
      sx += p.x;
      sy += p.y;
    }
    topics[c].label_position = {sx / double(members[c].size()), sy / double(members[c].size())};
    map.hulls.push_back({int(c), convex_hull(members[c])});
  }
  map.topics = std::move(topics);
  map.density = kde_grid(projection.points, options.bandwidth, options.density_resolution);
  return map;
}

inline nlohmann::ordered_json map_to_json(const MapModel& map) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["version"] = map.version;
  j["embedder"] = map.embedder;
  j["seed"] = map.seed;
  j["k"] = map.k;
  auto& points = j["points"] = ordered_json::array();
  for (const auto& p : map.points) points.push_back({{"id", p.id}, {"x", p.x}, {"y", p.y}, {"cluster", p.cluster}});
  auto& topics = j["topics"] = ordered_json::array();
  for (const auto& t : map.topics) {
    ordered_json terms = ordered_json::array();
    for (const auto& s : t.specific_terms) terms.push_back(ordered_json::array({s.term, s.chi2}));
    ordered_json topic;
    topic["cluster"] = t.cluster_id;
    topic["name"] = t.name;
    topic["terms"] = std::move(terms);
    topic["label"] = {t.label_position.x, t.label_position.y};
    topic["size"] = t.size;
    topic["top_docs"] = t.top_documents;
    topics.push_back(std::move(topic));
  }
  auto& hulls = j["hulls"] = ordered_json::array();
  for (const auto& h : map.hulls) {
    ordered_json vertices = ordered_json::array();
    for (const auto& v : h.vertices) vertices.push_back({v.x, v.y});
    hulls.push_back({{"cluster", h.cluster}, {"vertices", std::move(vertices)}});
  }
  ordered_json density;
  density["origin"] = {map.density.origin.x, map.density.origin.y};
  density["cell"] = {map.density.cell_size.x, map.density.cell_size.y};
  density["shape"] = {map.density.nx, map.density.ny};
  density["values"] = map.density.values;
  j["density"] = std::move(density);
  return j;
}

inline std::string serialize_map(const MapModel& map) { return map_to_json(map).dump() + "\n"; }

inline MapModel map_from_json(const nlohmann::json& j) {
  try {
    MapModel map;
    map.version = j.at("version").get<int>();
    if (map.version != 1) throw Error("unsupported map version " + std::to_string(map.version));
    map.embedder = j.at("embedder").get<std::string>();
    map.seed = j.at("seed").get<std::uint64_t>();
    map.k = j.at("k").get<int>();
    for (const auto& p : j.at("points"))
      map.points.push_back({p.at("id").get<std::string>(), p.at("x").get<double>(), p.at("y").get<double>(),
                            p.at("cluster").get<int>()});
    for (const auto& t : j.at("topics")) {
      Topic topic;
      topic.cluster_id = t.at("cluster").get<int>();
      topic.name = t.at("name").get<std::string>();
      for (const auto& s : t.at("terms")) topic.specific_terms.push_back({s.at(0).get<std::string>(), s.at(1).get<double>(), 0});
      topic.label_position = {t.at("label").at(0).get<double>(), t.at("label").at(1).get<double>()};
      topic.size = t.at("size").get<std::size_t>();
      topic.top_documents = t.at("top_docs").get<std::vector<std::string>>();
      map.topics.push_back(std::move(topic));
    }
    for (const auto& h : j.at("hulls")) {
      ClusterHull hull{h.at("cluster").get<int>(), {}};
      for (const auto& v : h.at("vertices")) hull.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
      map.hulls.push_back(std::move(hull));
    }
    const auto& d = j.at("density");
    map.density.origin = {d.at("origin").at(0).get<double>(), d.at("origin").at(1).get<double>()};
    map.density.cell_size = {d.at("cell").at(0).get<double>(), d.at("cell").at(1).get<double>()};
    map.density.nx = d.at("shape").at(0).get<std::size_t>();
    map.density.ny = d.at("shape").at(1).get<std::size_t>();
    map.density.values = d.at("values").get<std::vector<double>>();
    if (map.density.values.size() != map.density.nx * map.density.ny) throw Error("density shape mismatch");
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed map JSON: ") + e.what());
  }
}

inline MapModel parse_map(const std::string& text) {
  try {
    return map_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("map JSON does not parse: ") + e.what());
  }
}

}  // namespace cartograph
