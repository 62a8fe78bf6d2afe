// Builds a small map from synthetic documents with the offline hashing
// embedder and prints a summary of the discovered topics.

#include <algorithm>
#include <iostream>
#include <random>

#include "cartograph/cartograph.hpp"

int main() {
  using namespace cartograph;

  const std::vector<std::string> themes[] = {
      {"river", "boat", "fishing", "harbor", "sail", "anchor"},
      {"oven", "bread", "flour", "butter", "bake", "dough"},
      {"planet", "orbit", "telescope", "comet", "galaxy", "star"},
  };
  std::mt19937_64 rng(3);
  Corpus corpus;
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t i = 0; i < 20; ++i) {
      auto words = themes[t];
      std::shuffle(words.begin(), words.end(), rng);
      std::string text = "a note about";
      for (std::size_t w = 0; w < 4; ++w) text += " " + words[w];
      corpus.documents.push_back(make_document(padded_index(corpus.size()), text));
    }

  HashingEmbeddingProvider embedder("hash-64", 64, 7);
  const auto embedded = embed_corpus(corpus, embedder);

  PipelineOptions options;
  options.k = 3;
  options.tsne.perplexity = 10;
  const auto result = run_pipeline(embedded, options);
  const auto map = build_map(embedded, result);

  std::cout << "documents: " << map.points.size() << "\n";
  std::cout << "trustworthiness (k=5): " << trustworthiness(embedded, result.projection, 5) << "\n";
  for (const auto& topic : map.topics)
    std::cout << "topic " << topic.cluster_id << " (" << topic.size << " docs): " << topic.name << "\n";
  return 0;
}
