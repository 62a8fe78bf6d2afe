#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "cartograph/geometry.hpp"
#include "cartograph/pipeline.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace cartograph;

namespace {

struct WarningCapture {
  std::vector<std::string> messages;
  WarningHandler previous;
  WarningCapture() {
    previous = set_warning_handler([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { set_warning_handler(previous); }
};

double signed_area(const Polygon& poly) {
  double a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return a / 2.0;
}

MapModel small_map(int k = 3) {
  const auto blobs = fixtures::gaussian_blobs(3, 15, 8, 10.0, 1.0, 21);
  auto ec = fixtures::embedded(blobs.vectors, "fixture-embedder");
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < blobs.labels.size(); ++i)
    texts.push_back(fixtures::word("w", std::size_t(blobs.labels[i]), i % 4) + " " +
                    fixtures::word("w", std::size_t(blobs.labels[i]), (i + 1) % 4) + " shared");
  ec.corpus = fixtures::corpus_of(texts);
  PipelineOptions options;
  options.k = k;
  options.tsne.iterations = 300;
  options.topics.cutoff_fraction = 0.5;
  const auto result = run_pipeline(ec, options);
  return build_map(ec, result, {40, std::nullopt});
}

}  // namespace

TEST(ConvexHull, TriangleIsItsOwnHull) {
  const auto hull = convex_hull({{0, 0}, {2, 0}, {1, 3}});
  ASSERT_EQ(hull.size(), 3u);
  EXPECT_GT(signed_area(hull), 0.0);
  for (const auto& p : std::vector<Point2>{{0, 0}, {2, 0}, {1, 3}})
    EXPECT_NE(std::find(hull.begin(), hull.end(), p), hull.end());
}

TEST(ConvexHull, SquareWithCenterKeepsCorners) {
  const auto hull = convex_hull({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}, {0.5, 0}});
  EXPECT_EQ(hull, (Polygon{{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
}

TEST(ConvexHull, CollinearInputGivesSegmentAndWarning) {
  WarningCapture capture;
  const auto hull = convex_hull({{0, 0}, {1, 1}, {3, 3}, {2, 2}});
  EXPECT_EQ(hull, (Polygon{{0, 0}, {3, 3}}));
  EXPECT_EQ(capture.messages.size(), 1u);
  EXPECT_THROW(convex_hull({}), Error);
  EXPECT_EQ(convex_hull({{4, 5}}), (Polygon{{4, 5}}));
}

TEST(ConvexHull, RandomSetsAreContainedAndConvex) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point2> pts(std::size_t(3 + rng() % 60));
    for (auto& p : pts) p = {normal(rng) * 3.0, normal(rng)};
    const auto hull = convex_hull(pts);
    ASSERT_GE(hull.size(), 3u);
    EXPECT_GT(signed_area(hull), 0.0);
    for (std::size_t i = 0; i < hull.size(); ++i) {
      EXPECT_NE(std::find(pts.begin(), pts.end(), hull[i]), pts.end());
      EXPECT_GT(cross(hull[i], hull[(i + 1) % hull.size()], hull[(i + 2) % hull.size()]), 0.0);
    }
    for (const auto& p : pts) {
      EXPECT_TRUE(oracle::inside_or_on(hull, p));
      EXPECT_TRUE(hull_contains(hull, p));
    }
  }
}

TEST(Kde, SinglePointPeaksInItsCell) {
  const auto grid = kde_grid({{2.0, -1.0}}, 0.5, 51);
  const auto it = std::max_element(grid.values.begin(), grid.values.end());
  const auto idx = std::size_t(it - grid.values.begin());
  const auto ix = idx % grid.nx, iy = idx / grid.nx;
  EXPECT_LE(grid.origin.x + double(ix) * grid.cell_size.x, 2.0);
  EXPECT_GE(grid.origin.x + double(ix + 1) * grid.cell_size.x, 2.0);
  EXPECT_LE(grid.origin.y + double(iy) * grid.cell_size.y, -1.0);
  EXPECT_GE(grid.origin.y + double(iy + 1) * grid.cell_size.y, -1.0);
}

TEST(Kde, TwoDistantPointsGiveEqualPeaks) {
  const auto grid = kde_grid({{-5.0, 0.0}, {5.0, 0.0}}, 0.5, 101);
  double left = 0, right = 0;
  for (std::size_t iy = 0; iy < grid.ny; ++iy)
    for (std::size_t ix = 0; ix < grid.nx; ++ix) (ix < grid.nx / 2 ? left : right) = std::max(ix < grid.nx / 2 ? left : right, grid.at(ix, iy));
  EXPECT_NEAR(left, right, 1e-12 * left);
  // Mirror symmetry of the whole grid.
  for (std::size_t iy = 0; iy < grid.ny; ++iy)
    for (std::size_t ix = 0; ix < grid.nx; ++ix) EXPECT_NEAR(grid.at(ix, iy), grid.at(grid.nx - 1 - ix, iy), 1e-12);
}

TEST(Kde, GaussianSampleIntegratesToOne) {
  std::mt19937_64 rng(500);
  std::normal_distribution<double> normal;
  std::vector<Point2> pts(500);
  for (auto& p : pts) p = {normal(rng), normal(rng)};
  const auto grid = kde_grid(pts);
  EXPECT_EQ(grid.nx, 100u);
  EXPECT_NEAR(grid.integral(), 1.0, 0.05);
  for (double v : grid.values) EXPECT_GE(v, 0.0);
  EXPECT_NEAR(grid.bandwidth, std::pow(500.0, -1.0 / 6.0), 0.05);
}

TEST(Kde, DegenerateInputsStillNormalize) {
  EXPECT_THROW(kde_grid({}), Error);
  EXPECT_NEAR(kde_grid({{1, 1}, {1, 1}, {1, 1}}).integral(), 1.0, 0.05);
  // Few points: the kernel is wide relative to the 5% padding, so some mass
  // lies outside the grid, but never more than one unit is captured.
  const double partial = kde_grid({{0, 0}, {1, 0}, {2, 0}, {3, 0}}).integral();
  EXPECT_GT(partial, 0.5);
  EXPECT_LE(partial, 1.0);
}

TEST(BuildMap, AssemblesHullsLabelsAndDensity) {
  const auto map = small_map();
  EXPECT_EQ(map.k, 3);
  EXPECT_EQ(map.embedder, "fixture-embedder");
  EXPECT_EQ(map.points.size(), 45u);
  ASSERT_EQ(map.hulls.size(), 3u);
  ASSERT_EQ(map.topics.size(), 3u);
  EXPECT_EQ(map.density.values.size(), 40u * 40u);
  for (const auto& hull : map.hulls) {
    double sx = 0, sy = 0;
    int n = 0;
    for (const auto& p : map.points) {
      if (p.cluster != hull.cluster) continue;
      EXPECT_TRUE(oracle::inside_or_on(hull.vertices, {p.x, p.y}));
      sx += p.x;
      sy += p.y;
      ++n;
    }
    for (const auto& v : hull.vertices)
      EXPECT_TRUE(std::any_of(map.points.begin(), map.points.end(), [&](const MapPoint& p) {
        return p.cluster == hull.cluster && p.x == v.x && p.y == v.y;
      }));
    const auto& label = map.topics[std::size_t(hull.cluster)].label_position;
    EXPECT_NEAR(label.x, sx / n, 1e-12);
    EXPECT_NEAR(label.y, sy / n, 1e-12);
  }
}

TEST(BuildMap, SingleClusterHullCoversEverything) {
  const auto map = small_map(1);
  ASSERT_EQ(map.hulls.size(), 1u);
  for (const auto& p : map.points) EXPECT_TRUE(oracle::inside_or_on(map.hulls[0].vertices, {p.x, p.y}));
}

TEST(BuildMap, RejectsCountMismatch) {
  Projection2D proj;
  proj.points = {{0, 0}, {1, 1}};
  Clustering clustering;
  clustering.labels = {0, 0, 0};
  clustering.k = 1;
  EXPECT_THROW(build_map(fixtures::corpus_of({"a", "b", "c"}), proj, clustering, {Topic{}}, "e"), Error);
}

TEST(MapJson, RoundTripIsLossless) {
  const auto map = small_map();
  const auto text = serialize_map(map);
  const auto back = parse_map(text);
  EXPECT_EQ(serialize_map(back), text);
  EXPECT_EQ(back.points, map.points);
  EXPECT_EQ(back.hulls, map.hulls);
  EXPECT_EQ(back.density.values, map.density.values);
  EXPECT_EQ(back.density.origin, map.density.origin);
  EXPECT_EQ(back.density.cell_size, map.density.cell_size);
  ASSERT_EQ(back.topics.size(), map.topics.size());
  for (std::size_t i = 0; i < map.topics.size(); ++i) {
    EXPECT_EQ(back.topics[i].name, map.topics[i].name);
    EXPECT_EQ(back.topics[i].top_documents, map.topics[i].top_documents);
    EXPECT_EQ(back.topics[i].label_position, map.topics[i].label_position);
    ASSERT_EQ(back.topics[i].specific_terms.size(), map.topics[i].specific_terms.size());
    for (std::size_t t = 0; t < map.topics[i].specific_terms.size(); ++t) {
      EXPECT_EQ(back.topics[i].specific_terms[t].term, map.topics[i].specific_terms[t].term);
      EXPECT_EQ(back.topics[i].specific_terms[t].chi2, map.topics[i].specific_terms[t].chi2);
    }
  }
}

TEST(MapJson, FollowsTheSchemaKeyOrder) {
  const auto j = nlohmann::ordered_json::parse(serialize_map(small_map()));
  std::vector<std::string> keys;
  for (const auto& [key, _] : j.items()) keys.push_back(key);
  EXPECT_EQ(keys, (std::vector<std::string>{"version", "embedder", "seed", "k", "points", "topics", "hulls", "density"}));
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["density"]["shape"], nlohmann::ordered_json::array({40, 40}));
  EXPECT_TRUE(j["topics"][0]["terms"][0][0].is_string());
}

TEST(MapJson, MalformedInputIsAnError) {
  EXPECT_THROW(parse_map("{"), Error);
  EXPECT_THROW(parse_map(R"({"version": 2})"), Error);
  EXPECT_THROW(parse_map(R"({"version": 1, "embedder": "e"})"), Error);
}
