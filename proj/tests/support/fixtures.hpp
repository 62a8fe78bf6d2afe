#pragma once

// Synthetic, seeded fixtures shared by the unit and acceptance suites.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cartograph/corpus.hpp"
#include "cartograph/dpo.hpp"
#include "cartograph/embedding.hpp"

namespace fixtures {

using namespace cartograph;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("cartograph_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& content) {
  std::ofstream(p, std::ios::binary) << content;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Base-26 letter code, so synthetic words survive alphabetic tokenization.
inline std::string letters(std::size_t v) {
  std::string s;
  do {
    s.insert(s.begin(), char('a' + v % 26));
    v /= 26;
  } while (v > 0);
  return s;
}

inline std::string word(const std::string& prefix, std::size_t topic, std::size_t j) {
  return prefix + letters(topic) + "q" + letters(j);
}

inline Corpus corpus_of(const std::vector<std::string>& texts) {
  Corpus c;
  for (std::size_t i = 0; i < texts.size(); ++i) c.documents.push_back(make_document(padded_index(i), texts[i]));
  return c;
}

inline EmbeddedCorpus embedded(const std::vector<Vector>& vectors, const std::string& name = "synthetic") {
  std::vector<std::string> texts(vectors.size(), "synthetic document");
  return EmbeddedCorpus{corpus_of(texts), vectors, name, false};
}

struct Blobs {
  std::vector<Vector> vectors;
  std::vector<int> labels;
};

// `clusters` Gaussian blobs in `dim` dimensions; centers ~ N(0, spread^2).
inline Blobs gaussian_blobs(std::size_t clusters, std::size_t per_cluster, std::size_t dim, double spread,
                            double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> centers(clusters, Vector(dim));
  for (auto& c : centers)
    for (auto& x : c) x = spread * normal(rng);
  Blobs b;
  for (std::size_t c = 0; c < clusters; ++c)
    for (std::size_t i = 0; i < per_cluster; ++i) {
      Vector v(dim);
      for (std::size_t d = 0; d < dim; ++d) v[d] = centers[c][d] + sigma * normal(rng);
      b.vectors.push_back(std::move(v));
      b.labels.push_back(int(c));
    }
  return b;
}

// Documents drawn from per-cluster vocabularies plus shared filler and a
// little cross-cluster noise.
struct PlantedCorpus {
  std::vector<std::string> texts;
  std::vector<int> labels;
};

inline PlantedCorpus planted_corpus(std::size_t clusters, std::size_t per_cluster, std::size_t vocab,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_word(0, vocab - 1);
  std::uniform_int_distribution<std::size_t> pick_cluster(0, clusters - 1);
  std::uniform_int_distribution<std::size_t> pick_filler(0, 7);
  std::uniform_int_distribution<int> length(5, 9);
  const std::vector<std::string> stop = {"the", "and", "of", "with", "about", "this"};
  PlantedCorpus out;
  for (std::size_t c = 0; c < clusters; ++c)
    for (std::size_t i = 0; i < per_cluster; ++i) {
      std::string text;
      const int n = length(rng);
      for (int w = 0; w < n; ++w) {
        if (!text.empty()) text += ' ';
        text += word("w", c, pick_word(rng));
        if (w % 2 == 1) text += " " + stop[std::size_t(w) % stop.size()];
      }
      text += " " + word("f", 0, pick_filler(rng));
      if (i % 3 == 0) text += " " + word("w", pick_cluster(rng), pick_word(rng));
      out.texts.push_back(text);
      out.labels.push_back(int(c));
    }
  return out;
}

// Preference triples with planted chosen-side topics. Chosen topics
// [0, clusters - unique) share their vocabulary with a rejected topic; the last
// `unique` chosen topics use words that never occur on the rejected side.
struct PlantedDpo {
  std::vector<PreferenceTriple> triples;
  std::vector<int> chosen_labels;
  EmbeddedCorpus chosen;
  EmbeddedCorpus rejected;
};

inline PlantedDpo planted_dpo(std::size_t clusters = 30, std::size_t per_cluster = 20, std::size_t unique = 5,
                              std::size_t dim = 32, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, 7);
  const auto text_from = [&](const std::string& prefix, std::size_t topic) {
    std::string t;
    for (int w = 0; w < 6; ++w) t += (w ? " " : "") + word(prefix, topic, pick(rng));
    return t + " and the rest";
  };
  const auto chosen_blobs = gaussian_blobs(clusters, per_cluster, dim, 4.0, 1.0, seed + 1);
  const auto rejected_blobs = gaussian_blobs(clusters, per_cluster, dim, 4.0, 1.0, seed + 2);

  PlantedDpo out;
  for (std::size_t i = 0; i < clusters * per_cluster; ++i) {
    const std::size_t topic = i / per_cluster;
    const bool is_unique = topic >= clusters - unique;
    PreferenceTriple t;
    t.id = "t" + padded_index(i);
    t.prompt = "question " + letters(i);
    t.chosen = text_from(is_unique ? "u" : "s", topic);
    // Rejected answers of unique-topic prompts come from rejected-only vocabularies.
    t.rejected = text_from(is_unique ? "r" : "s", topic);
    nlohmann::ordered_json raw{{"id", t.id}, {"prompt", t.prompt}, {"chosen", t.chosen}, {"rejected", t.rejected}};
    t.raw = raw.dump();
    out.triples.push_back(t);
    out.chosen_labels.push_back(int(topic));
  }
  out.chosen = {answers_corpus(out.triples, true), chosen_blobs.vectors, "planted", false};
  out.rejected = {answers_corpus(out.triples, false), rejected_blobs.vectors, "planted", false};
  return out;
}

}  // namespace fixtures
