#pragma once

// embeddings -> 2D projection -> k-means -> topics (-> map).

#include <cstdint>

#include "cartograph/clustering.hpp"
#include "cartograph/embedding.hpp"
#include "cartograph/geometry.hpp"
#include "cartograph/projection.hpp"
#include "cartograph/topics.hpp"

namespace cartograph {

struct PipelineOptions {
  TsneParams tsne;
  std::uint64_t seed = 42;
  int k = 15;
  std::uint64_t cluster_seed = 0;
  int restarts = 1;
  TopicOptions topics;
};

struct PipelineResult {
  Projection2D projection;
  Clustering clustering;
  std::vector<Topic> topics;
};

inline PipelineResult run_pipeline(const EmbeddedCorpus& ec, const PipelineOptions& options,
                                   const TermExtractor& extractor) {
  validate(ec);
  PipelineResult r;
  r.projection = project_2d(ec, options.seed, options.tsne);
  r.clustering = kmeans(r.projection.points, options.k, options.cluster_seed, {300, options.restarts});
  r.topics = build_topics(ec.corpus, r.clustering, options.topics, extractor);
  return r;
}

inline PipelineResult run_pipeline(const EmbeddedCorpus& ec, const PipelineOptions& options = {}) {
  return run_pipeline(ec, options, HeuristicTermExtractor{});
}

inline MapModel build_map(const EmbeddedCorpus& ec, const PipelineResult& r, const MapBuildOptions& options = {}) {
  return build_map(ec.corpus, r.projection, r.clustering, r.topics, ec.embedder_name, options);
}

}  // namespace cartograph
